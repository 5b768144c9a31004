// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "gccn/checks.hpp"
#include "gccn/checkpoint.hpp"
#include "gccn/config.hpp"
#include "gccn/dataset.hpp"
#include "gccn/gccn_net.hpp"
#include "gccn/ops.hpp"
#include "gccn/rng.hpp"
#include "gccn/trainer.hpp"

namespace fs = std::filesystem;
using namespace gccn;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool passed, const std::string& detail) {
  std::cout << (passed ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << detail.substr(std::min(detail.find_first_not_of(' '), detail.size()))
            << std::endl;
  failures += passed ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct CliRun {
  int code;
  std::string out, err;
  double seconds;
};

CliRun cli_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const auto t0 = std::chrono::steady_clock::now();
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str(), seconds_since(t0)};
}

const checks::CheckResult* find(const std::vector<checks::CheckResult>& rs, const std::string& name) {
  for (const auto& r : rs) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

std::string failed_names(const std::vector<checks::CheckResult>& rs) {
  std::string s;
  for (const auto& r : rs) {
    if (!r.passed) s += " " + r.name + " (" + r.detail + ")";
  }
  return s;
}

void gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rs = checks::gradient_suite();
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::size_t min_instances = SIZE_MAX;
  for (const auto& r : rs) {
    worst = std::max(worst, r.worst);
    min_instances = std::min(min_instances, r.instances);
  }
  const bool ok = checks::all_passed(rs) && min_instances >= 20 && secs < 60.0;
  report(1, "gradient fidelity", ok,
         std::to_string(rs.size()) + " ops, >= " + std::to_string(min_instances) + " instances each, worst rel " +
             fmt(worst) + " (tol 1e-4), " + fmt(secs, "%.2f") + " s (limit 60)" + failed_names(rs));
}

void oracle_equivalence() {
  const auto rs = checks::oracle_suite();
  std::size_t min_instances = SIZE_MAX;
  for (const auto& r : rs) min_instances = std::min(min_instances, r.instances);
  report(2, "oracle equivalence", checks::all_passed(rs) && min_instances >= 200,
         std::to_string(rs.size()) + " checks, " + std::to_string(min_instances) +
             " instances each, bitwise" + failed_names(rs));
}

void invariants(const std::vector<checks::CheckResult>& rs) {
  const auto* identity = find(rs, "invariant.norm_identity");
  report(3, "norm identity", identity && identity->passed && identity->instances >= 1000,
         identity ? std::to_string(identity->instances) + " pairs, worst rel " + fmt(identity->worst) +
                        " (tol 1e-9)" + (identity->passed ? "" : " " + identity->detail)
                  : "missing");

  bool ok = true;
  std::string detail;
  for (const char* name : {"invariant.proto_sums_to_one", "invariant.matching_convex", "invariant.softmax_shift",
                           "invariant.support_order"}) {
    const auto* r = find(rs, name);
    ok = ok && r && r->passed && r->instances >= 500;
    detail += std::string(detail.empty() ? "" : ", ") + name + (r ? " worst " + fmt(r->worst) : " missing");
    if (r && !r->passed) detail += " (" + r->detail + ")";
  }
  report(4, "distribution invariants", ok, detail + " (tol 1e-12, 500 trials each)");

  const auto* scale = find(rs, "invariant.augnorm_scale");
  report(5, "augnorm positive-scale fixed point", scale && scale->passed && scale->instances >= 500,
         scale ? std::to_string(scale->instances) + " pairs x c in {0.5, 2, 10}, worst " + fmt(scale->worst) +
                     " (tol 1e-9)" + (scale->passed ? "" : " " + scale->detail)
               : "missing");
}

struct FewshotOutcome {
  bool ran = false;
  double acc = 0.0, se = 0.0, seconds = 0.0;
  std::string error;
};

FewshotOutcome desk_run(const fs::path& work, const std::string& data, const std::string& mode) {
  const CliRun r = cli_run({"train-fewshot", "--data", data, "--out", (work / mode).string(), "--mode", mode,
                            "--head", "proto", "--metric", "euclid", "--ways", "5", "--shots", "1", "--queries",
                            "5", "--blocks", "3", "--grid-rows", "2", "--grid-cols", "2", "--epochs", "5",
                            "--episodes-per-epoch", "100", "--eval-episodes", "200", "--train-fraction", "0.8",
                            "--seed", "1"});
  FewshotOutcome o;
  o.seconds = r.seconds;
  std::smatch m;
  static const std::regex result(R"(RESULT head=proto metric=euclid ways=5 shots=1 acc=([0-9.]+) se=([0-9.]+))");
  if (r.code != 0 || !std::regex_search(r.out, m, result)) {
    o.error = "exit " + std::to_string(r.code) + " " + r.err;
    return o;
  }
  o.ran = true;
  o.acc = std::stod(m[1]);
  o.se = std::stod(m[2]);
  return o;
}

void desk_scale(const fs::path& work) {
  const std::string data = (work / "glyphs").string();
  const CliRun gen = cli_run({"gen-data", "--classes", "25", "--per-class", "40", "--size", "32", "--seed", "1",
                              "--out", data});
  if (gen.code != 0) {
    report(6, "desk-scale few-shot", false, "gen-data failed: " + gen.err);
    return;
  }
  const FewshotOutcome gc = desk_run(work, data, "augnorm");
  const FewshotOutcome plain = desk_run(work, data, "plain");
  const bool ok = gc.ran && plain.ran && gc.acc >= 0.85 && gc.seconds <= 600.0 && plain.seconds <= 600.0;
  const auto side = [](const char* name, const FewshotOutcome& o) {
    return std::string(name) + " acc=" + fmt(o.acc, "%.4f") + " se=" + fmt(o.se, "%.4f") + " " +
           fmt(o.seconds, "%.0f") + " s" + (o.ran ? "" : " [" + o.error + "]");
  };
  report(6, "desk-scale few-shot (25x40 glyphs 32x32, 20/5 classes, 5-way 1-shot, 500 episodes)", ok,
         side("augnorm", gc) + " | " + side("plain", plain) + " (need augnorm acc >= 0.85, each <= 600 s)");
}

void table_coverage() {
  EncoderConfig e;
  e.input_height = e.input_width = 84;
  e.num_blocks = 4;
  e.filters_per_block = 8;
  const std::size_t rows = 2, cols = 2;
  // 84 -> 41 -> 19 -> 8 -> 3 under conv3x3, crop-to-even, pool2x2.
  const std::size_t cnn = 3 * 3 * 8;
  Rng rng(5);
  Tensor images(Shape{2, 84, 84, 1});
  for (auto& v : images.data()) v = rng.uniform(0.0, 1.0);
  bool ok = true;
  std::string detail;
  for (auto mode : {FusionMode::aug, FusionMode::norm, FusionMode::augnorm}) {
    for (std::size_t layers = 1; layers <= 3; ++layers) {
      GcConfig g;
      g.grid_rows = rows;
      g.grid_cols = cols;
      g.layers = layers;
      g.mode = mode;
      const std::size_t expected = mode == FusionMode::norm ? cnn : cnn + layers * rows * cols;
      std::size_t got = 0;
      try {
        const GccnNet net(e, g);
        ParameterSet params;
        net.init_params(params, 7);
        Graph graph;
        const Var f = net.embed(graph.constant(images), params, Mode::train);
        got = f.value().dim(1);
        ok = ok && f.value().dim(0) == 2 && got == expected && net.feature_size() == expected &&
             f.value().all_finite();
      } catch (const std::exception& ex) {
        ok = false;
        detail += " [" + to_string(mode) + " L" + std::to_string(layers) + ": " + ex.what() + "]";
      }
      detail += " " + to_string(mode) + "/L" + std::to_string(layers) + "=" + std::to_string(got);
    }
  }
  report(7, "mode x layer coverage (84x84, 4 blocks, 2x2 grid, len(cnn)=" + std::to_string(cnn) + ")", ok, detail);
}

void determinism(const fs::path& work) {
  const std::string data = (work / "det").string();
  bool ok = cli_run({"gen-data", "--classes", "6", "--per-class", "10", "--size", "16", "--out", data}).code == 0;
  std::string detail;
  const auto twice = [&](const std::vector<std::string>& base, const std::string& tag,
                         const std::vector<std::string>& files) {
    for (const char* run : {"1", "2"}) {
      auto args = base;
      args.insert(args.end(), {"--data", data, "--out", (work / (tag + run)).string()});
      const CliRun r = cli_run(args);
      if (r.code != 0) {
        ok = false;
        detail += " " + tag + " failed: " + r.err;
        return;
      }
    }
    for (const auto& f : files) {
      const std::string a = slurp(work / (tag + "1") / f), b = slurp(work / (tag + "2") / f);
      const bool same = !a.empty() && a == b;
      ok = ok && same;
      detail += " " + tag + "/" + f + (same ? " identical" : " DIFFERS");
    }
  };
  twice({"train-fewshot", "--blocks", "2", "--filters", "4", "--grid-rows", "2", "--grid-cols", "2", "--ways", "3",
         "--epochs", "2", "--episodes-per-epoch", "3", "--eval-episodes", "5", "--train-fraction", "0.5"},
        "fewshot", {"checkpoint.gccn", "metrics.csv", "episodes.csv"});
  twice({"train-classify", "--blocks", "2", "--filters", "4", "--grid-rows", "2", "--grid-cols", "2", "--epochs",
         "2", "--batch-size", "8"},
        "classify", {"checkpoint.gccn", "metrics.csv"});

  try {
    const Dataset d = load_idx(idx_images_path(data), idx_labels_path(data));
    write_idx(d, work / "rt-images", work / "rt-labels");
    const Dataset back = load_idx(work / "rt-images", work / "rt-labels");
    const bool idx_ok = back == d && slurp(work / "rt-images") == slurp(idx_images_path(data)) &&
                        slurp(work / "rt-labels") == slurp(idx_labels_path(data));
    ok = ok && idx_ok;
    detail += std::string(" idx round-trip ") + (idx_ok ? "exact" : "DIFFERS");

    const Checkpoint ck = load_checkpoint(work / "fewshot1" / "checkpoint.gccn");
    save_checkpoint(ck, work / "rt.gccn");
    const Checkpoint again = load_checkpoint(work / "rt.gccn");
    const bool ck_ok = again.params == ck.params && again.fingerprint == ck.fingerprint &&
                       again.config_text == ck.config_text && again.rng_state == ck.rng_state &&
                       slurp(work / "rt.gccn") == slurp(work / "fewshot1" / "checkpoint.gccn");
    ok = ok && ck_ok;
    detail += std::string(", checkpoint round-trip ") + (ck_ok ? "exact" : "DIFFERS");
  } catch (const std::exception& ex) {
    ok = false;
    detail += std::string(" round-trip error: ") + ex.what();
  }
  report(8, "determinism and round-trips", ok, detail);
}

double untrained_accuracy(const Dataset& dataset, std::size_t episodes, double& se) {
  RunConfig c;
  c.encoder.num_blocks = 3;
  c.gc.grid_rows = c.gc.grid_cols = 2;
  fit_to_dataset(c, dataset);
  validate(c);
  const GccnNet net(c.encoder, c.gc);
  ParameterSet params;
  net.init_params(params, c.seed);
  net.reset_running_stats(params);
  Rng rng(c.seed);
  const FewshotEvaluation ev = evaluate_fewshot(net, params, dataset, c, episodes, rng);
  se = ev.accuracy.stderr_mean;
  return ev.accuracy.mean;
}

void chance_control() {
  // Pixel noise carries no information about the label.
  Rng rng(77);
  Dataset noise;
  noise.height = noise.width = 32;
  for (int c = 0; c < 25; ++c) {
    noise.class_names.push_back("noise" + std::to_string(c));
    for (int i = 0; i < 40; ++i) {
      Tensor img(Shape{32, 32, 1});
      for (auto& v : img.data()) v = rng.uniform(0.0, 1.0);
      noise.images.push_back(std::move(img));
      noise.labels.push_back(c);
    }
  }
  double se = 0.0;
  const double acc = untrained_accuracy(noise, 500, se);

  GlyphOptions o;
  const Dataset glyphs = gen_synthetic_glyphs(o);
  double glyph_se = 0.0;
  const double glyph_acc = untrained_accuracy(glyphs, 500, glyph_se);

  report(9, "chance-level control (untrained encoder, 5-way, 500 episodes)", acc >= 0.14 && acc <= 0.26,
         "label-independent noise images acc=" + fmt(acc, "%.4f") + " se=" + fmt(se, "%.4f") +
             " (band [0.14, 0.26]); for reference, glyph images acc=" + fmt(glyph_acc, "%.4f") +
             " (untrained features already separate glyph classes)");
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / "gccn_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  const auto t0 = std::chrono::steady_clock::now();

  const auto guarded = [](int id, const char* name, const auto& fn) {
    try {
      fn();
    } catch (const std::exception& ex) {
      report(id, name, false, std::string("exception: ") + ex.what());
    }
  };
  guarded(1, "gradient fidelity", gradient_fidelity);
  guarded(2, "oracle equivalence", oracle_equivalence);
  guarded(3, "invariant suites", [] { invariants(checks::invariant_suite()); });
  guarded(7, "mode x layer coverage", table_coverage);
  guarded(8, "determinism and round-trips", [&] { determinism(work); });
  guarded(9, "chance-level control", chance_control);
  guarded(6, "desk-scale few-shot", [&] { desk_scale(work); });

  std::cout << "acceptance: " << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << " in " << fmt(seconds_since(t0), "%.0f") << " s" << std::endl;
  std::error_code ec;
  fs::remove_all(work, ec);
  return failures == 0 ? 0 : 1;
}
