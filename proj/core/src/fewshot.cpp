#include "gccn/fewshot.hpp"

#include <algorithm>
#include <cmath>

#include "gccn/error.hpp"
#include "gccn/ops.hpp"

namespace gccn {

std::string to_string(Metric metric) { return metric == Metric::euclidean ? "euclid" : "cosine"; }

std::string to_string(Head head) { return head == Head::prototypical ? "proto" : "matching"; }

Metric parse_metric(const std::string& text) {
  if (text == "euclid" || text == "euclidean") return Metric::euclidean;
  if (text == "cosine") return Metric::cosine;
  throw ConfigError("unknown metric '" + text + "' (euclid|cosine)");
}

Head parse_head(const std::string& text) {
  if (text == "proto" || text == "prototypical") return Head::prototypical;
  if (text == "matching") return Head::matching;
  throw ConfigError("unknown head '" + text + "' (proto|matching)");
}

namespace {

void require_same_dim(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw DimensionError("vector dimensions differ: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  }
}

double dot(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * q[i];
  return s;
}

double norm(std::span<const double> p) { return std::sqrt(dot(p, p)); }

}  // namespace

double euclidean(std::span<const double> p, std::span<const double> q) {
  require_same_dim(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (q[i] - p[i]) * (q[i] - p[i]);
  return std::sqrt(s);
}

double cosine(std::span<const double> p, std::span<const double> q) {
  require_same_dim(p, q);
  return dot(p, q) / (std::max(norm(p), kCosineNormFloor) * std::max(norm(q), kCosineNormFloor));
}

double similarity(std::span<const double> p, std::span<const double> q, Metric metric) {
  return metric == Metric::euclidean ? -euclidean(p, q) : cosine(p, q);
}

Vectors prototypes(const Vectors& support, std::span<const int> labels, std::size_t ways) {
  if (support.size() != labels.size()) throw DataError("prototypes: support and label counts differ");
  if (support.empty()) throw DataError("prototypes: empty support set");
  const std::size_t d = support.front().size();
  Vectors out(ways, std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(ways, 0);
  for (std::size_t i = 0; i < support.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= ways) throw DataError("prototypes: label out of range");
    if (support[i].size() != d) throw DimensionError("prototypes: support vectors differ in length");
    auto& mu = out[static_cast<std::size_t>(y)];
    for (std::size_t j = 0; j < d; ++j) mu[j] += support[i][j];
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t k = 0; k < ways; ++k) {
    if (counts[k] == 0) throw DataError("prototypes: class " + std::to_string(k) + " has no support sample");
    for (double& v : out[k]) v /= static_cast<double>(counts[k]);
  }
  return out;
}

Prediction proto_predict(std::span<const double> query, const Vectors& protos, Metric metric) {
  std::vector<double> scores;
  scores.reserve(protos.size());
  for (const auto& mu : protos) scores.push_back(similarity(query, mu, metric));
  Prediction out;
  out.probabilities = softmax(scores);
  out.label = argmax(scores);
  return out;
}

Prediction matching_predict(std::span<const double> query, const Vectors& support, std::span<const int> labels,
                            std::size_t ways, Metric metric) {
  if (support.size() != labels.size()) throw DataError("matching: support and label counts differ");
  std::vector<double> scores;
  scores.reserve(support.size());
  for (const auto& s : support) scores.push_back(similarity(query, s, metric));
  const auto attention = softmax(scores);
  Prediction out;
  out.probabilities.assign(ways, 0.0);
  for (std::size_t i = 0; i < support.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= ways) throw DataError("matching: label out of range");
    out.probabilities[static_cast<std::size_t>(y)] += attention[i];
  }
  for (double& p : out.probabilities) p = std::min(p, 1.0);
  out.label = argmax(out.probabilities);
  return out;
}

// ---- differentiable ----------------------------------------------------------

namespace {

struct Pair {
  std::size_t n, m, d;
};

Pair pair_dims(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw DimensionError(std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  return {a.dim(0), b.dim(0), a.dim(1)};
}

std::span<const double> row(const Tensor& t, std::size_t i, std::size_t d) {
  return std::span<const double>(t.data().data() + i * d, d);
}

}  // namespace

Var pairwise_euclidean(Var a, Var b) {
  const auto [n, m, d] = pair_dims(a.value(), b.value(), "pairwise_euclidean");
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = euclidean(row(a.value(), i, d), row(b.value(), j, d));
  }
  Tensor dist = out;
  return a.graph().record(std::move(out), {a, b},
                          [a, b, n, m, d, dist = std::move(dist)](Graph& g, const Tensor& go) {
                            const Tensor& x = g.value(a);
                            const Tensor& y = g.value(b);
                            Tensor* ga = g.requires_grad(a) ? &g.grad_buffer(a) : nullptr;
                            Tensor* gb = g.requires_grad(b) ? &g.grad_buffer(b) : nullptr;
                            for (std::size_t i = 0; i < n; ++i) {
                              for (std::size_t j = 0; j < m; ++j) {
                                const double dij = dist[i * m + j];
                                if (dij == 0.0) continue;
                                const double s = go[i * m + j] / dij;
                                for (std::size_t k = 0; k < d; ++k) {
                                  const double diff = (x[i * d + k] - y[j * d + k]) * s;
                                  if (ga) (*ga)[i * d + k] += diff;
                                  if (gb) (*gb)[j * d + k] -= diff;
                                }
                              }
                            }
                          });
}

Var pairwise_cosine(Var a, Var b) {
  const auto [n, m, d] = pair_dims(a.value(), b.value(), "pairwise_cosine");
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = cosine(row(a.value(), i, d), row(b.value(), j, d));
  }
  Tensor sim = out;
  return a.graph().record(
      std::move(out), {a, b}, [a, b, n, m, d, sim = std::move(sim)](Graph& g, const Tensor& go) {
        const Tensor& x = g.value(a);
        const Tensor& y = g.value(b);
        std::vector<double> na(n), nb(m);
        for (std::size_t i = 0; i < n; ++i) na[i] = norm(row(x, i, d));
        for (std::size_t j = 0; j < m; ++j) nb[j] = norm(row(y, j, d));
        Tensor* ga = g.requires_grad(a) ? &g.grad_buffer(a) : nullptr;
        Tensor* gb = g.requires_grad(b) ? &g.grad_buffer(b) : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
          const double ca = std::max(na[i], kCosineNormFloor);
          const bool free_a = na[i] >= kCosineNormFloor;
          for (std::size_t j = 0; j < m; ++j) {
            const double cb = std::max(nb[j], kCosineNormFloor);
            const bool free_b = nb[j] >= kCosineNormFloor;
            const double gij = go[i * m + j];
            const double c = sim[i * m + j];
            for (std::size_t k = 0; k < d; ++k) {
              const double xa = x[i * d + k], yb = y[j * d + k];
              if (ga) (*ga)[i * d + k] += gij * (yb / (ca * cb) - (free_a ? c * xa / (na[i] * na[i]) : 0.0));
              if (gb) (*gb)[j * d + k] += gij * (xa / (ca * cb) - (free_b ? c * yb / (nb[j] * nb[j]) : 0.0));
            }
          }
        }
      });
}

Var group_mean(Var x, std::span<const int> groups, std::size_t count) {
  const Tensor& v = x.value();
  if (v.rank() != 2) throw DimensionError("group_mean: expected [n,d], got " + shape_string(v.shape()));
  const std::size_t n = v.dim(0), d = v.dim(1);
  if (groups.size() != n) throw DataError("group_mean: group count does not match rows");
  std::vector<double> sizes(count, 0.0);
  for (int y : groups) {
    if (y < 0 || static_cast<std::size_t>(y) >= count) throw DataError("group_mean: group index out of range");
    sizes[static_cast<std::size_t>(y)] += 1.0;
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (sizes[k] == 0.0) throw DataError("group_mean: class " + std::to_string(k) + " has no rows");
  }
  Tensor out(Shape{count, d}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(groups[i]);
    for (std::size_t j = 0; j < d; ++j) out[k * d + j] += v[i * d + j];
  }
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t j = 0; j < d; ++j) out[k * d + j] /= sizes[k];
  }
  std::vector<int> ys(groups.begin(), groups.end());
  return x.graph().record(std::move(out), {x},
                          [x, ys = std::move(ys), sizes = std::move(sizes), d](Graph& g, const Tensor& go) {
                            Tensor& gx = g.grad_buffer(x);
                            for (std::size_t i = 0; i < ys.size(); ++i) {
                              const auto k = static_cast<std::size_t>(ys[i]);
                              for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += go[k * d + j] / sizes[k];
                            }
                          });
}

HeadOutput head_loss(Var support, std::span<const int> support_labels, Var query, std::span<const int> query_labels,
                     std::size_t ways, const HeadConfig& config) {
  Graph& g = support.graph();
  HeadOutput out;
  Var probs_or_scores;
  if (config.head == Head::prototypical) {
    Var protos = group_mean(support, support_labels, ways);
    Var scores = config.metric == Metric::euclidean ? scale(pairwise_euclidean(query, protos), -1.0)
                                                    : pairwise_cosine(query, protos);
    out.loss = cross_entropy(scores, query_labels);
    probs_or_scores = scores;
  } else {
    Var scores = config.metric == Metric::euclidean ? scale(pairwise_euclidean(query, support), -1.0)
                                                    : pairwise_cosine(query, support);
    const std::size_t ns = support_labels.size();
    Tensor onehot(Shape{ns, ways}, 0.0);
    for (std::size_t i = 0; i < ns; ++i) {
      const int y = support_labels[i];
      if (y < 0 || static_cast<std::size_t>(y) >= ways) throw DataError("matching: support label out of range");
      onehot[i * ways + static_cast<std::size_t>(y)] = 1.0;
    }
    Var probs = matmul(softmax(scores), g.constant(std::move(onehot)));
    out.loss = nll(log(probs), query_labels);
    probs_or_scores = probs;
  }

  const Tensor& s = probs_or_scores.value();
  const std::size_t nq = s.dim(0), k = s.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < nq; ++i) {
    const std::size_t p = argmax(std::span<const double>(&s[i * k], k));
    out.predicted.push_back(p);
    if (static_cast<int>(p) == query_labels[i]) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(nq);
  return out;
}

HeadOutput episode_loss(Graph& graph, const Dataset& dataset, const Episode& episode, const GccnNet& net,
                        ParameterSet& params, const HeadConfig& config, Mode mode) {
  std::vector<std::size_t> samples = episode.support_samples();
  const std::size_t ns = samples.size();
  for (auto q : episode.query_samples()) samples.push_back(q);
  Var images = graph.constant(dataset.batch(samples));
  Var features = net.embed(images, params, mode);
  Var support = slice_rows(features, 0, ns);
  Var query = slice_rows(features, ns, samples.size());
  const auto sl = episode.support_labels();
  const auto ql = episode.query_labels();
  return head_loss(support, sl, query, ql, episode.ways, config);
}

}  // namespace gccn
