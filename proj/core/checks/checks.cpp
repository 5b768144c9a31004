#include "gccn/checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <memory>
#include <numeric>
#include <sstream>

#include "gccn/encoder.hpp"
#include "gccn/fewshot.hpp"
#include "gccn/gc_features.hpp"
#include "gccn/gccn_net.hpp"
#include "gccn/grad_check.hpp"
#include "gccn/ops.hpp"
#include "gccn/oracles.hpp"
#include "gccn/rng.hpp"

namespace gccn::checks {

Var corrupt(Var x, double factor) {
  return x.graph().record(x.value(), {x}, [x, factor](Graph& g, const Tensor& go) {
    Tensor scaled = go;
    for (double& v : scaled.data()) v *= factor;
    g.accumulate(x, scaled);
  });
}

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.index(hi - lo + 1); }

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Values at least 0.04 apart in random order, so max operations have no
// near-ties within a finite-difference step.
Tensor distinct_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  std::vector<double> values(t.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = 0.05 * static_cast<double>(i) + rng.uniform(0.0, 0.01);
  rng.shuffle(values);
  const double shift = 0.025 * static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) t[i] = values[i] - shift;
  return t;
}

Tensor away_from_zero(Rng& rng, Shape shape) {
  Tensor t = random_tensor(rng, std::move(shape));
  for (double& v : t.data()) v += v < 0.0 ? -0.05 : 0.05;
  return t;
}

// Small integers, so ties are common.
Tensor tied_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = static_cast<double>(rng.index(4));
  return t;
}

Var weighted(Var out, const Tensor& weights) { return sum(mul(out, out.graph().constant(weights))); }

std::vector<int> class_major_labels(std::size_t ways, std::size_t per_class) {
  std::vector<int> labels;
  for (std::size_t k = 0; k < ways; ++k) labels.insert(labels.end(), per_class, static_cast<int>(k));
  return labels;
}

std::size_t count_for(const SuiteOptions& options, std::size_t fallback) {
  return options.instances ? options.instances : fallback;
}

std::string format(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << std::scientific << v;
  return s.str();
}

// ---- gradient suite ----------------------------------------------------------

using LossFn = std::function<Var(Graph&)>;
using Builder = std::function<LossFn(Rng&, ParameterSet&)>;

CheckResult gradient_check(const std::string& name, std::size_t count, Rng& rng, bool fault, const Builder& build) {
  CheckResult result;
  result.name = "grad." + name;
  result.instances = count;
  for (std::size_t k = 0; k < count; ++k) {
    ParameterSet params;
    LossFn fn = build(rng, params);
    LossFn loss = fault ? LossFn([fn](Graph& g) { return corrupt(fn(g)); }) : fn;
    const GradCheckReport report = grad_check(loss, params);
    result.worst = std::max(result.worst, report.max_rel_error);
    if (!report.passed) result.passed = false;
  }
  result.detail = "max relative error " + format(result.worst) + " (tol 1e-4)";
  return result;
}

LossFn conv_case(Rng& rng, ParameterSet& ps) {
  const std::size_t n = pick(rng, 1, 2), cin = pick(rng, 1, 3), cout = pick(rng, 1, 3);
  const std::size_t kh = pick(rng, 1, 3), kw = pick(rng, 1, 3), stride = pick(rng, 1, 2);
  const std::size_t h = pick(rng, kh, kh + 4), w = pick(rng, kw, kw + 4);
  Parameter& x = ps.add("input", random_tensor(rng, {n, h, w, cin}));
  Parameter& k = ps.add("kernel", random_tensor(rng, {kh, kw, cin, cout}));
  const Tensor r = random_tensor(rng, {n, (h - kh) / stride + 1, (w - kw) / stride + 1, cout});
  return [&x, &k, r, stride](Graph& g) { return weighted(conv2d(g.param(x), g.param(k), stride), r); };
}

LossFn maxpool_case(Rng& rng, ParameterSet& ps) {
  const std::size_t n = pick(rng, 1, 2), h = 2 * pick(rng, 1, 3), w = 2 * pick(rng, 1, 3), c = pick(rng, 1, 3);
  Parameter& x = ps.add("input", distinct_tensor(rng, {n, h, w, c}));
  const Tensor r = random_tensor(rng, {n, h / 2, w / 2, c});
  return [&x, r](Graph& g) { return weighted(maxpool2d(g.param(x)), r); };
}

LossFn batchnorm_case(Rng& rng, ParameterSet& ps) {
  const std::size_t n = pick(rng, 2, 3), h = pick(rng, 1, 3), w = pick(rng, 1, 3), c = pick(rng, 1, 3);
  Parameter& x = ps.add("input", random_tensor(rng, {n, h, w, c}));
  Parameter& gamma = ps.add("gamma", random_tensor(rng, {c}, 0.5, 1.5));
  Parameter& beta = ps.add("beta", random_tensor(rng, {c}));
  BatchNormBuffers buffers{&ps.add("running_mean", Tensor({c}, 0.0), false),
                           &ps.add("running_var", Tensor({c}, 1.0), false), &ps.add("ready", Tensor({1}, 0.0), false)};
  const Tensor r = random_tensor(rng, {n, h, w, c});
  return [&x, &gamma, &beta, buffers, r](Graph& g) {
    return weighted(batchnorm(g.param(x), g.param(gamma), g.param(beta), buffers, Mode::train), r);
  };
}

LossFn relu_case(Rng& rng, ParameterSet& ps) {
  const std::size_t n = pick(rng, 1, 4), d = pick(rng, 1, 8);
  Parameter& x = ps.add("input", away_from_zero(rng, {n, d}));
  const Tensor r = random_tensor(rng, {n, d});
  return [&x, r](Graph& g) { return weighted(relu(g.param(x)), r); };
}

LossFn linear_case(Rng& rng, ParameterSet& ps) {
  const std::size_t n = pick(rng, 1, 4), in = pick(rng, 1, 6), out = pick(rng, 1, 5);
  Parameter& x = ps.add("input", random_tensor(rng, {n, in}));
  Parameter& w = ps.add("weight", random_tensor(rng, {in, out}));
  Parameter& b = ps.add("bias", random_tensor(rng, {out}));
  const Tensor r = random_tensor(rng, {n, out});
  return [&x, &w, &b, r](Graph& g) { return weighted(linear(g.param(x), g.param(w), g.param(b)), r); };
}

LossFn softmax_case(Rng& rng, ParameterSet& ps) {
  const std::size_t n = pick(rng, 1, 4), k = pick(rng, 1, 6);
  Parameter& z = ps.add("logits", random_tensor(rng, {n, k}, -3.0, 3.0));
  const Tensor r = random_tensor(rng, {n, k});
  return [&z, r](Graph& g) { return weighted(softmax(g.param(z)), r); };
}

LossFn cross_entropy_case(Rng& rng, ParameterSet& ps) {
  const std::size_t n = pick(rng, 1, 4), k = pick(rng, 2, 6);
  Parameter& z = ps.add("logits", random_tensor(rng, {n, k}, -3.0, 3.0));
  std::vector<int> labels(n);
  for (int& y : labels) y = static_cast<int>(rng.index(k));
  return [&z, labels](Graph& g) { return cross_entropy(g.param(z), labels); };
}

LossFn extract_gc_case(Rng& rng, ParameterSet& ps) {
  GcConfig cfg;
  cfg.grid_rows = pick(rng, 1, 3);
  cfg.grid_cols = pick(rng, 1, 3);
  cfg.layers = pick(rng, 1, 3);
  cfg.collapse = rng.index(2) == 0 ? ChannelCollapse::max : ChannelCollapse::mean;
  const std::size_t n = pick(rng, 1, 2), count = pick(rng, cfg.layers, 3);
  std::vector<Parameter*> maps;
  for (std::size_t l = 0; l < count; ++l) {
    const Shape s{n, pick(rng, cfg.grid_rows, cfg.grid_rows + 3), pick(rng, cfg.grid_cols, cfg.grid_cols + 3),
                  pick(rng, 1, 3)};
    maps.push_back(&ps.add("map" + std::to_string(l), distinct_tensor(rng, s)));
  }
  const Tensor r = random_tensor(rng, {n, cfg.layers * cfg.grid_rows * cfg.grid_cols});
  return [maps, cfg, r](Graph& g) {
    std::vector<Var> vars;
    for (Parameter* p : maps) vars.push_back(g.param(*p));
    return weighted(extract_gc(std::span<const Var>(vars), cfg), r);
  };
}

Builder fuse_case(FusionMode mode) {
  return [mode](Rng& rng, ParameterSet& ps) -> LossFn {
    const std::size_t n = pick(rng, 1, 3), d = pick(rng, 1, 6), k = pick(rng, 1, 5);
    Parameter& cnn = ps.add("cnn", random_tensor(rng, {n, d}));
    Parameter& gc = ps.add("gc", random_tensor(rng, {n, k}, 0.1, 2.0));
    const std::size_t width = mode == FusionMode::norm ? d : d + k;
    const Tensor r = random_tensor(rng, {n, width});
    return [&cnn, &gc, mode, r](Graph& g) { return weighted(fuse(g.param(cnn), g.param(gc), mode), r); };
  };
}

Builder head_case(Head head, Metric metric) {
  return [head, metric](Rng& rng, ParameterSet& ps) -> LossFn {
    const std::size_t ways = pick(rng, 2, 4), shots = pick(rng, 1, 3), queries = pick(rng, 1, 2);
    const std::size_t d = pick(rng, 2, 6);
    Parameter& s = ps.add("support", random_tensor(rng, {ways * shots, d}));
    Parameter& q = ps.add("query", random_tensor(rng, {ways * queries, d}));
    const auto sl = class_major_labels(ways, shots);
    const auto ql = class_major_labels(ways, queries);
    const HeadConfig cfg{head, metric};
    return [&s, &q, sl, ql, ways, cfg](Graph& g) { return head_loss(g.param(s), sl, g.param(q), ql, ways, cfg).loss; };
  };
}

// Tiny end-to-end episode: 4x4 images, one encoder block, 2-way 1-shot.
Builder pipeline_case(Head head, Metric metric) {
  return [head, metric](Rng& rng, ParameterSet& ps) -> LossFn {
    auto data = std::make_shared<Dataset>();
    data->height = data->width = 4;
    for (int k = 0; k < 4; ++k) {
      data->images.push_back(random_tensor(rng, {4, 4, 1}));
      data->labels.push_back(k / 2);
    }
    Episode episode;
    episode.ways = 2;
    episode.shots = 1;
    episode.queries = 1;
    episode.classes = {0, 1};
    episode.support = {{0, 0}, {2, 1}};
    episode.query = {{1, 0}, {3, 1}};
    EncoderConfig enc;
    enc.num_blocks = 1;
    enc.filters_per_block = 4;
    enc.input_height = enc.input_width = 4;
    GcConfig gc;
    gc.grid_rows = gc.grid_cols = 1;
    auto net = std::make_shared<GccnNet>(enc, gc);
    net->init_params(ps, rng.index(1u << 30));
    net->reset_running_stats(ps);
    const HeadConfig cfg{head, metric};
    return [data, episode, net, cfg, &ps](Graph& g) {
      return episode_loss(g, *data, episode, *net, ps, cfg, Mode::train).loss;
    };
  };
}

LossFn encoder_case(Rng& rng, ParameterSet& ps) {
  EncoderConfig enc;
  enc.num_blocks = 2;
  enc.filters_per_block = 3;
  enc.input_height = enc.input_width = 10;
  auto encoder = std::make_shared<Encoder>(enc);
  encoder->init_params(ps, rng.index(1u << 30));
  for (std::size_t b = 0; b < enc.num_blocks; ++b) reset_running_stats(Encoder::buffers(ps, b));
  const Tensor images = random_tensor(rng, {3, 10, 10, 1});
  const Tensor r = random_tensor(rng, {3, encoder->embedding_size()});
  return [encoder, images, r, &ps](Graph& g) {
    return weighted(encoder->encode(g.constant(images), ps, Mode::train).embedding, r);
  };
}

// ---- oracle helpers --------------------------------------------------------

oracle::Map to_map(const Tensor& t) {
  return {t.dim(0), t.dim(1), t.dim(2), t.values()};
}

Tensor batch_of_one(const Tensor& t) { return t.reshaped({1, t.dim(0), t.dim(1), t.dim(2)}); }

CheckResult make(const std::string& name, std::size_t count) {
  CheckResult r;
  r.name = name;
  r.instances = count;
  return r;
}

void fail(CheckResult& r, std::size_t instance, const std::string& why) {
  if (r.passed) r.detail = "instance " + std::to_string(instance) + ": " + why;
  r.passed = false;
}

}  // namespace

std::vector<CheckResult> gradient_suite(const SuiteOptions& options) {
  Rng rng(options.seed);
  const std::size_t n = count_for(options, 20);
  const bool f = options.inject_fault;
  std::vector<CheckResult> out;
  out.push_back(gradient_check("conv2d", n, rng, f, conv_case));
  out.push_back(gradient_check("maxpool2d", n, rng, f, maxpool_case));
  out.push_back(gradient_check("batchnorm", n, rng, f, batchnorm_case));
  out.push_back(gradient_check("relu", n, rng, f, relu_case));
  out.push_back(gradient_check("linear", n, rng, f, linear_case));
  out.push_back(gradient_check("softmax", n, rng, f, softmax_case));
  out.push_back(gradient_check("cross_entropy", n, rng, f, cross_entropy_case));
  out.push_back(gradient_check("extract_gc", n, rng, f, extract_gc_case));
  out.push_back(gradient_check("fuse_aug", n, rng, f, fuse_case(FusionMode::aug)));
  out.push_back(gradient_check("fuse_norm", n, rng, f, fuse_case(FusionMode::norm)));
  out.push_back(gradient_check("fuse_augnorm", n, rng, f, fuse_case(FusionMode::augnorm)));
  out.push_back(gradient_check("proto_euclid", n, rng, f, head_case(Head::prototypical, Metric::euclidean)));
  out.push_back(gradient_check("proto_cosine", n, rng, f, head_case(Head::prototypical, Metric::cosine)));
  out.push_back(gradient_check("matching_euclid", n, rng, f, head_case(Head::matching, Metric::euclidean)));
  out.push_back(gradient_check("matching_cosine", n, rng, f, head_case(Head::matching, Metric::cosine)));
  out.push_back(gradient_check("encoder", n, rng, f, encoder_case));
  out.push_back(gradient_check("episode_proto", n, rng, f, pipeline_case(Head::prototypical, Metric::euclidean)));
  out.push_back(gradient_check("episode_matching", n, rng, f, pipeline_case(Head::matching, Metric::cosine)));
  return out;
}

std::vector<CheckResult> oracle_suite(const SuiteOptions& options) {
  Rng rng(options.seed + 1);
  const std::size_t n = count_for(options, 200);
  std::vector<CheckResult> out;

  CheckResult conv = make("oracle.conv2d", n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t kh = pick(rng, 1, 5), kw = pick(rng, 1, 5), cin = pick(rng, 1, 4), cout = pick(rng, 1, 4);
    const std::size_t h = pick(rng, kh, 16), w = pick(rng, kw, 16), stride = pick(rng, 1, 3);
    const Tensor x = random_tensor(rng, {h, w, cin});
    const Tensor k = random_tensor(rng, {kh, kw, cin, cout});
    Graph g(false);
    const Tensor got = conv2d(g.constant(x), g.constant(k), stride).value();
    const oracle::Map want = oracle::conv2d(to_map(x), k.values(), kh, kw, cout, stride);
    if (got.values() != want.v) fail(conv, t, "conv2d differs from the loop oracle");
  }
  if (conv.passed) conv.detail = "bitwise equal";
  out.push_back(conv);

  CheckResult pool = make("oracle.maxpool2d", n);
  for (std::size_t t = 0; t < n; ++t) {
    const Shape s{2 * pick(rng, 1, 8), 2 * pick(rng, 1, 8), pick(rng, 1, 4)};
    const Tensor x = t % 2 == 0 ? random_tensor(rng, s) : tied_tensor(rng, s);
    const Tensor r = random_tensor(rng, {s[0] / 2, s[1] / 2, s[2]});
    ParameterSet ps;
    Parameter& px = ps.add("x", x);
    ps.zero_grad();
    Graph g;
    Var y = maxpool2d(g.param(px));
    g.backward(weighted(y, r));
    const oracle::Pooled want = oracle::maxpool2x2(to_map(x));
    if (y.value().values() != want.out.v) fail(pool, t, "maxpool2d differs from the loop oracle");
    std::vector<double> routed(x.size(), 0.0);
    for (std::size_t o = 0; o < want.argmax.size(); ++o) routed[want.argmax[o]] += r[o];
    if (px.grad.values() != routed) fail(pool, t, "maxpool2d gradient not routed to the first argmax");
  }
  if (pool.passed) pool.detail = "bitwise equal";
  out.push_back(pool);

  CheckResult collapse = make("oracle.collapse_channels", n);
  for (std::size_t t = 0; t < n; ++t) {
    const Shape s{pick(rng, 1, 16), pick(rng, 1, 16), pick(rng, 1, 4)};
    const Tensor x = t % 2 == 0 ? random_tensor(rng, s) : tied_tensor(rng, s);
    const Tensor mx = collapse_channels(x, ChannelCollapse::max);
    const Tensor mn = collapse_channels(x, ChannelCollapse::mean);
    if (mx.values() != oracle::collapse_max(to_map(x)).v) fail(collapse, t, "channel max differs");
    if (mn.values() != oracle::collapse_mean(to_map(x)).v) fail(collapse, t, "channel mean differs");
  }
  if (collapse.passed) collapse.detail = "bitwise equal";
  out.push_back(collapse);

  CheckResult parts = make("oracle.partition", n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t h = pick(rng, 1, 16), w = pick(rng, 1, 16);
    const std::size_t rows = pick(rng, 1, std::min<std::size_t>(4, h)), cols = pick(rng, 1, std::min<std::size_t>(4, w));
    const auto got = partition(h, w, rows, cols);
    const auto want = oracle::patches(h, w, rows, cols);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].row == want[i].row && got[i].col == want[i].col && got[i].height == want[i].height &&
             got[i].width == want[i].width;
    }
    if (!same) fail(parts, t, "patch boxes differ");
  }
  if (parts.passed) parts.detail = "bitwise equal";
  out.push_back(parts);

  CheckResult gc = make("oracle.extract_gc", n);
  for (std::size_t t = 0; t < n; ++t) {
    GcConfig cfg;
    cfg.grid_rows = pick(rng, 1, 4);
    cfg.grid_cols = pick(rng, 1, 4);
    cfg.layers = pick(rng, 1, 3);
    cfg.collapse = t % 3 == 2 ? ChannelCollapse::mean : ChannelCollapse::max;
    const std::size_t count = pick(rng, cfg.layers, 3);
    std::vector<Tensor> maps;
    std::vector<oracle::Map> omaps;
    for (std::size_t l = 0; l < count; ++l) {
      const Shape s{pick(rng, cfg.grid_rows, 16), pick(rng, cfg.grid_cols, 16), pick(rng, 1, 4)};
      maps.push_back(t % 2 == 0 ? random_tensor(rng, s) : tied_tensor(rng, s));
      omaps.push_back(to_map(maps.back()));
    }
    const GcVector got = extract_gc(std::span<const Tensor>(maps), cfg);
    const auto want = oracle::extract_gc(omaps, cfg.grid_rows, cfg.grid_cols, cfg.layers,
                                         cfg.collapse == ChannelCollapse::max);
    if (got.values.values() != want) fail(gc, t, "GC vector differs from the brute-force oracle");
    if (got.sources.size() != want.size()) fail(gc, t, "GC sources do not match the vector length");
  }
  if (gc.passed) gc.detail = "bitwise equal";
  out.push_back(gc);

  CheckResult route = make("oracle.extract_gc_routing", n);
  for (std::size_t t = 0; t < n; ++t) {
    GcConfig cfg;
    cfg.grid_rows = pick(rng, 1, 4);
    cfg.grid_cols = pick(rng, 1, 4);
    cfg.layers = 1;
    const Shape s{pick(rng, cfg.grid_rows, 16), pick(rng, cfg.grid_cols, 16), pick(rng, 1, 4)};
    const Tensor x = t % 2 == 0 ? random_tensor(rng, s) : tied_tensor(rng, s);
    const Tensor r = random_tensor(rng, {1, cfg.grid_rows * cfg.grid_cols});
    ParameterSet ps;
    Parameter& px = ps.add("map", batch_of_one(x));
    ps.zero_grad();
    Graph g;
    const std::vector<Var> vars{g.param(px)};
    g.backward(weighted(extract_gc(std::span<const Var>(vars), cfg), r));
    std::vector<double> want(x.size(), 0.0);
    const auto boxes = oracle::patches(s[0], s[1], cfg.grid_rows, cfg.grid_cols);
    const oracle::Map flat = oracle::collapse_max(to_map(x));
    for (std::size_t p = 0; p < boxes.size(); ++p) {
      const auto& b = boxes[p];
      std::size_t by = b.row, bx = b.col;
      for (std::size_t y = b.row; y < b.row + b.height; ++y) {
        for (std::size_t xx = b.col; xx < b.col + b.width; ++xx) {
          if (flat.v[y * s[1] + xx] > flat.v[by * s[1] + bx]) {
            by = y;
            bx = xx;
          }
        }
      }
      std::size_t ch = 0;
      for (std::size_t c = 1; c < s[2]; ++c) {
        if (x[(by * s[1] + bx) * s[2] + c] > x[(by * s[1] + bx) * s[2] + ch]) ch = c;
      }
      want[(by * s[1] + bx) * s[2] + ch] += r[p];
    }
    if (px.grad.values() != want) fail(route, t, "GC gradient not routed to the first maximal cell");
  }
  if (route.passed) route.detail = "bitwise equal";
  out.push_back(route);
  return out;
}

std::vector<CheckResult> invariant_suite(const SuiteOptions& options) {
  Rng rng(options.seed + 2);
  std::vector<CheckResult> out;

  const std::size_t pairs = count_for(options, 1000);
  CheckResult identity = make("invariant.norm_identity", pairs);
  for (std::size_t t = 0; t < pairs; ++t) {
    const std::size_t d = pick(rng, 1, 512);
    std::vector<double> p(d), q(d);
    for (auto& v : p) v = rng.uniform(-1.0, 1.0);
    for (auto& v : q) v = rng.uniform(-1.0, 1.0);
    double pp = 0.0, qq = 0.0, pq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      pp += p[i] * p[i];
      qq += q[i] * q[i];
      pq += p[i] * q[i];
    }
    const double e = euclidean(p, q);
    const double lhs = e * e, rhs = pp + qq - 2.0 * pq;
    const double rel = std::fabs(lhs - rhs) / std::max(std::fabs(lhs), 1e-300);
    identity.worst = std::max(identity.worst, rel);
    if (rel > 1e-9) fail(identity, t, "relative error " + format(rel));
  }
  identity.detail = identity.passed ? "max relative error " + format(identity.worst) + " (tol 1e-9)" : identity.detail;
  out.push_back(identity);

  const std::size_t trials = count_for(options, 500);
  CheckResult proto_sum = make("invariant.proto_sums_to_one", trials);
  CheckResult match_sum = make("invariant.matching_convex", trials);
  CheckResult shift = make("invariant.softmax_shift", trials);
  CheckResult order = make("invariant.support_order", trials);
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t ways = pick(rng, 1, 6), shots = pick(rng, 1, 5), d = pick(rng, 1, 32);
    const Metric metric = t % 2 == 0 ? Metric::euclidean : Metric::cosine;
    Vectors support(ways * shots, std::vector<double>(d));
    for (auto& s : support) {
      for (auto& v : s) v = rng.uniform(-1.0, 1.0);
    }
    const auto labels = class_major_labels(ways, shots);
    std::vector<double> query(d);
    for (auto& v : query) v = rng.uniform(-1.0, 1.0);

    const Prediction pp = proto_predict(query, prototypes(support, labels, ways), metric);
    const double ps = std::accumulate(pp.probabilities.begin(), pp.probabilities.end(), 0.0);
    proto_sum.worst = std::max(proto_sum.worst, std::fabs(ps - 1.0));
    if (std::fabs(ps - 1.0) > 1e-12) fail(proto_sum, t, "sum " + format(ps));

    const Prediction mp = matching_predict(query, support, labels, ways, metric);
    const double ms = std::accumulate(mp.probabilities.begin(), mp.probabilities.end(), 0.0);
    match_sum.worst = std::max(match_sum.worst, std::fabs(ms - 1.0));
    if (std::fabs(ms - 1.0) > 1e-12) fail(match_sum, t, "sum " + format(ms));
    for (double v : mp.probabilities) {
      if (v < 0.0 || v > 1.0) fail(match_sum, t, "probability " + format(v - 1.0) + " outside [0,1]");
    }

    std::vector<double> z(pick(rng, 1, 10));
    for (auto& v : z) v = rng.uniform(-10.0, 10.0);
    const double c = rng.uniform(-50.0, 50.0);
    std::vector<double> zc = z;
    for (auto& v : zc) v += c;
    const auto a = softmax(z), b = softmax(zc);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = std::fabs(a[i] - b[i]);
      shift.worst = std::max(shift.worst, diff);
      if (diff > 1e-12) fail(shift, t, "difference " + format(diff));
    }

    std::vector<std::size_t> perm(support.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Vectors shuffled;
    std::vector<int> shuffled_labels;
    for (auto i : perm) {
      shuffled.push_back(support[i]);
      shuffled_labels.push_back(labels[i]);
    }
    const Prediction pp2 = proto_predict(query, prototypes(shuffled, shuffled_labels, ways), metric);
    const Prediction mp2 = matching_predict(query, shuffled, shuffled_labels, ways, metric);
    for (std::size_t k = 0; k < ways; ++k) {
      const double diff = std::max(std::fabs(pp.probabilities[k] - pp2.probabilities[k]),
                                   std::fabs(mp.probabilities[k] - mp2.probabilities[k]));
      order.worst = std::max(order.worst, diff);
      if (diff > 1e-12) fail(order, t, "difference " + format(diff));
    }
  }
  for (auto* r : {&proto_sum, &match_sum, &shift, &order}) {
    if (r->passed) r->detail = "max deviation " + format(r->worst) + " (tol 1e-12)";
    out.push_back(*r);
  }

  CheckResult scale = make("invariant.augnorm_scale", trials);
  for (std::size_t t = 0; t < trials; ++t) {
    const Tensor v = random_tensor(rng, {pick(rng, 1, 64)});
    const Tensor g = random_tensor(rng, {pick(rng, 1, 16)});
    const Tensor base = fuse(v, g, FusionMode::augnorm);
    for (double c : {0.5, 2.0, 10.0}) {
      Tensor cv = v, cg = g;
      for (double& x : cv.data()) x *= c;
      for (double& x : cg.data()) x *= c;
      const Tensor scaled = fuse(cv, cg, FusionMode::augnorm);
      for (std::size_t i = 0; i < base.size(); ++i) {
        const double diff = std::fabs(base[i] - scaled[i]);
        scale.worst = std::max(scale.worst, diff);
        if (diff > 1e-9) fail(scale, t, "difference " + format(diff) + " at c=" + format(c));
      }
    }
  }
  if (scale.passed) scale.detail = "max deviation " + format(scale.worst) + " (tol 1e-9)";
  out.push_back(scale);

  const std::size_t vectors = count_for(options, 100);
  CheckResult frob = make("invariant.frobenius", vectors);
  for (std::size_t t = 0; t < vectors; ++t) {
    const Tensor v = random_tensor(rng, {100});
    const double got = frobenius_norm(v.data());
    const double want = oracle::frobenius(v.values());
    const double rel = std::fabs(got - want) / want;
    frob.worst = std::max(frob.worst, rel);
    if (rel > 1e-12) fail(frob, t, "relative error " + format(rel));
  }
  if (frob.passed) frob.detail = "max relative error " + format(frob.worst) + " (tol 1e-12)";
  out.push_back(frob);
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

void print(std::ostream& out, const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " n=" << r.instances;
    if (!r.detail.empty()) out << ' ' << r.detail;
    out << '\n';
  }
}

}  // namespace gccn::checks
