#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "gccn/checks.hpp"
#include "gccn/checkpoint.hpp"
#include "gccn/classify.hpp"
#include "gccn/config.hpp"
#include "gccn/dataset.hpp"
#include "gccn/error.hpp"
#include "gccn/features_io.hpp"
#include "gccn/trainer.hpp"

namespace gccn::cli {

namespace fs = std::filesystem;

namespace {

// Flags that map one-to-one onto config keys.
struct ConfigFlag {
  const char* flag;
  const char* key;
  const char* help;
};

const std::vector<ConfigFlag>& config_flags() {
  static const std::vector<ConfigFlag> flags = {
      {"--data", "data", "IDX prefix (<prefix>-images-idx3-ubyte, <prefix>-labels-idx1-ubyte)"},
      {"--out", "out", "output directory"},
      {"--seed", "seed", "run seed"},
      {"--blocks", "encoder.blocks", "encoder blocks"},
      {"--filters", "encoder.filters", "filters per block"},
      {"--grid-rows", "gc.rows", "GC patch grid rows"},
      {"--grid-cols", "gc.cols", "GC patch grid columns"},
      {"--collapse", "gc.collapse", "channel collapse: max|mean"},
      {"--layers", "gc.layers", "GC layers (1-3)"},
      {"--mode", "gc.mode", "fusion: plain|aug|norm|augnorm"},
      {"--optimizer", "optimizer", "sgd|adam"},
      {"--lr", "learning_rate", "learning rate"},
      {"--batch-size", "batch_size", "classifier batch size"},
      {"--epochs", "epochs", "training epochs"},
      {"--precision", "precision", "parameter precision: f64|f32"},
      {"--holdout-fraction", "holdout_fraction", "classifier held-out fraction per class"},
      {"--head", "head", "proto|matching"},
      {"--metric", "metric", "euclid|cosine"},
      {"--ways", "ways", "classes per episode"},
      {"--shots", "shots", "support samples per class"},
      {"--queries", "queries", "query samples per class"},
      {"--episodes-per-epoch", "episodes_per_epoch", "training episodes per epoch"},
      {"--eval-episodes", "eval_episodes", "test episodes after training"},
      {"--train-fraction", "train_fraction", "fraction of classes used for training"},
  };
  return flags;
}

struct TrainOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<const char*, std::string>> values;  // key, raw value
  std::vector<CLI::Option*> options;
};

void add_train_flags(CLI::App* cmd, TrainOptions& t) {
  cmd->add_option("--config", t.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", t.sets, "extra key=value override (repeatable)");
  t.values.resize(config_flags().size());
  for (std::size_t i = 0; i < config_flags().size(); ++i) {
    const auto& f = config_flags()[i];
    t.values[i].first = f.key;
    t.options.push_back(cmd->add_option(f.flag, t.values[i].second, f.help));
  }
}

// Config file first, then --set pairs, then dedicated flags.
RunConfig resolve(const TrainOptions& t, Task task) {
  RunConfig config;
  config.task = task;
  config.out = task == Task::classify ? "runs/classify" : "runs/fewshot";
  if (!t.config_path.empty()) config = load_config_file(t.config_path, config);
  config.task = task;
  for (const auto& s : t.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    set_value(config, s.substr(0, eq), s.substr(eq + 1));
  }
  for (std::size_t i = 0; i < t.options.size(); ++i) {
    if (t.options[i]->count() > 0) set_value(config, t.values[i].first, t.values[i].second);
  }
  return config;
}

Dataset load_data(const std::string& prefix) {
  if (prefix.empty()) throw ConfigError("no dataset given (--data PREFIX)");
  return load_idx(idx_images_path(prefix), idx_labels_path(prefix));
}

void print_config(std::ostream& out, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out << "config " << line << '\n';
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string result_line(const RunConfig& c, const Summary& acc) {
  return "RESULT head=" + to_string(c.head.head) + " metric=" + to_string(c.head.metric) +
         " ways=" + std::to_string(c.ways) + " shots=" + std::to_string(c.shots) + " acc=" + fixed(acc.mean) +
         " se=" + fixed(acc.stderr_mean);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- commands ----------------------------------------------------------------

struct GenOptions {
  GlyphOptions glyphs;
  std::string out = "data/glyphs";
};

int cmd_gen_data(const GenOptions& o, std::ostream& out) {
  out << "config classes = " << o.glyphs.num_classes << '\n'
      << "config per_class = " << o.glyphs.samples_per_class << '\n'
      << "config size = " << o.glyphs.size << '\n'
      << "config seed = " << o.glyphs.seed << '\n'
      << "config noise = " << format_number(o.glyphs.noise) << '\n'
      << "config jitter = " << format_number(o.glyphs.jitter) << '\n'
      << "config out = " << o.out << '\n';
  const Dataset ds = gen_synthetic_glyphs(o.glyphs);
  const fs::path images = idx_images_path(o.out), labels = idx_labels_path(o.out);
  if (images.has_parent_path()) fs::create_directories(images.parent_path());
  write_idx(ds, images, labels);
  out << "wrote " << ds.size() << " images to " << images.string() << " and " << labels.string() << '\n';
  return kOk;
}

struct RawOptions {
  std::string in;
  std::size_t height = 0, width = 0;
  std::string out;
};

int cmd_convert_raw(const RawOptions& o, std::ostream& out) {
  out << "config in = " << o.in << "\nconfig height = " << o.height << "\nconfig width = " << o.width
      << "\nconfig out = " << o.out << '\n';
  const Dataset ds = load_raw_directory(o.in, o.height, o.width);
  const fs::path images = idx_images_path(o.out), labels = idx_labels_path(o.out);
  if (images.has_parent_path()) fs::create_directories(images.parent_path());
  write_idx(ds, images, labels);
  out << "wrote " << ds.size() << " images in " << ds.num_classes() << " classes to " << images.string() << '\n';
  return kOk;
}

int cmd_train_classify(const TrainOptions& t, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig config = resolve(t, Task::classify);
  validate(config);
  const Dataset ds = load_data(config.data);
  fit_to_dataset(config, ds);
  validate(config);
  print_config(out, describe(config));
  out << "seed " << config.seed << '\n';

  Rng rng(config.seed);
  const auto [train, heldout] = split_holdout(ds, config.holdout_fraction, rng);
  out << "split train=" << train.size() << " heldout=" << heldout.size() << '\n';
  const ClassifyResult result = train_classifier(train, heldout, config, rng);
  for (const auto& m : result.metrics) {
    out << "epoch " << m.epoch << ' ' << m.split << " loss=" << fixed(m.loss, 6) << " acc=" << fixed(m.accuracy)
        << '\n';
  }
  const fs::path dir = config.out;
  fs::create_directories(dir);
  save_checkpoint(result.checkpoint, dir / "checkpoint.gccn");
  write_metrics_csv(dir / "metrics.csv", result.metrics);
  const EpochMetrics& last = result.metrics.back();
  out << "wrote " << (dir / "checkpoint.gccn").string() << " and " << (dir / "metrics.csv").string() << '\n';
  out << "RESULT task=classify classes=" << config.num_classes << " epochs=" << config.epochs
      << " heldout_acc=" << fixed(last.accuracy) << " heldout_loss=" << fixed(last.loss, 6)
      << " seconds=" << fixed(seconds_since(t0), 1) << '\n';
  return kOk;
}

int cmd_train_fewshot(const TrainOptions& t, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig config = resolve(t, Task::fewshot);
  validate(config);
  const Dataset ds = load_data(config.data);
  fit_to_dataset(config, ds);
  validate(config);
  print_config(out, describe(config));
  out << "seed " << config.seed << '\n';

  Rng rng(config.seed);
  const auto [train, test] = split_classes(ds, config.train_fraction, rng);
  out << "split train_classes=" << train.num_classes() << " test_classes=" << test.num_classes() << '\n';
  const FewshotResult result = train_fewshot(train, test, config, rng);
  for (const auto& m : result.metrics) {
    out << "epoch " << m.epoch << ' ' << m.split << " loss=" << fixed(m.loss, 6) << " acc=" << fixed(m.accuracy)
        << '\n';
  }
  const fs::path dir = config.out;
  fs::create_directories(dir);
  save_checkpoint(result.checkpoint, dir / "checkpoint.gccn");
  write_metrics_csv(dir / "metrics.csv", result.metrics);
  write_episodes_csv(dir / "episodes.csv", result.evaluation.episodes, config.ways, config.shots, config.head);
  out << "wrote " << (dir / "checkpoint.gccn").string() << ", metrics.csv and episodes.csv\n";
  out << "seconds " << fixed(seconds_since(t0), 1) << '\n';
  out << result_line(config, result.evaluation.accuracy) << '\n';
  return kOk;
}

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string config_path;
  std::optional<long long> episodes;
  std::string split = "test";
  std::string csv;
};

// Checkpoint config, optionally overridden by a config file whose result must
// reproduce the checkpoint fingerprint.
RunConfig checkpoint_config(const Checkpoint& ck, const std::string& config_path) {
  RunConfig config = config_from_checkpoint(ck);
  if (!config_path.empty()) {
    config = load_config_file(config_path, config);
    if (fingerprint(config) != ck.fingerprint) {
      throw FormatError("config fingerprint mismatch: checkpoint " + ck.fingerprint + ", config " +
                        fingerprint(config));
    }
  }
  return config;
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  if (o.episodes && *o.episodes <= 0) throw ConfigError("--episodes must be at least 1");
  if (o.split != "test" && o.split != "all") throw ConfigError("--split must be test or all");
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  RunConfig config = checkpoint_config(ck, o.config_path);
  config.data = o.data;
  const std::size_t episodes = o.episodes ? static_cast<std::size_t>(*o.episodes) : config.eval_episodes;
  print_config(out, describe(config));
  out << "config episodes = " << episodes << "\nconfig split = " << o.split << '\n';
  out << "seed " << config.seed << '\n';
  const Dataset ds = load_data(o.data);
  RunConfig fitted = config;
  fit_to_dataset(fitted, ds);
  ParameterSet params = ck.params;

  if (config.task == Task::classify) {
    const ClassifyEvaluation ev = evaluate(ck, ds);
    out << "confusion (rows true, columns predicted)\n";
    for (const auto& row : ev.confusion) {
      for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << row[j];
      out << '\n';
    }
    out << "RESULT task=classify classes=" << config.num_classes << " acc=" << fixed(ev.accuracy)
        << " loss=" << fixed(ev.loss, 6) << '\n';
    return kOk;
  }

  Rng rng(config.seed);
  Dataset target = ds;
  if (o.split == "test") target = split_classes(ds, config.train_fraction, rng).second;
  rng.restore(ck.rng_state);
  const GccnNet net(config.encoder, config.gc);
  const FewshotEvaluation ev = evaluate_fewshot(net, params, target, config, episodes, rng);
  if (!o.csv.empty()) write_episodes_csv(o.csv, ev.episodes, config.ways, config.shots, config.head);
  out << "accuracy " << fixed(ev.accuracy.mean) << " +- " << fixed(ev.accuracy.stderr_mean) << " over " << episodes
      << " episodes\n";
  out << result_line(config, ev.accuracy) << '\n';
  return kOk;
}

struct ExtractOptions {
  std::string checkpoint;
  std::string data;
  std::string config_path;
  std::string out;
  std::size_t batch = 64;
};

int cmd_extract(const ExtractOptions& o, std::ostream& out) {
  if (o.batch == 0) throw ConfigError("--batch must be at least 1");
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  RunConfig config = checkpoint_config(ck, o.config_path);
  config.data = o.data;
  config.out = o.out;
  print_config(out, describe(config));
  out << "seed " << config.seed << '\n';
  const Dataset ds = load_data(o.data);
  RunConfig fitted = config;
  fit_to_dataset(fitted, ds);
  ParameterSet params = ck.params;
  const GccnNet net(config.encoder, config.gc);
  Tensor rows(Shape{ds.size(), net.feature_size()});
  for (std::size_t start = 0; start < ds.size(); start += o.batch) {
    const std::size_t stop = std::min(ds.size(), start + o.batch);
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < stop; ++i) idx.push_back(i);
    Graph g(false);
    const Tensor& f = net.embed(g.constant(ds.batch(idx)), params, Mode::eval).value();
    std::copy(f.data().begin(), f.data().end(), rows.data().begin() + static_cast<std::ptrdiff_t>(start * f.dim(1)));
  }
  const fs::path path = o.out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_features(rows, path);
  out << "wrote " << ds.size() << " vectors of length " << net.feature_size() << " ("
      << feature_file_size(static_cast<std::uint32_t>(net.feature_size()), static_cast<std::uint32_t>(ds.size()))
      << " bytes) to " << path.string() << '\n';
  return kOk;
}

struct SelftestOptions {
  std::uint64_t seed = checks::SuiteOptions{}.seed;
  bool inject_fault = false;
};

int cmd_selftest(const SelftestOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  checks::SuiteOptions options;
  options.seed = o.seed;
  options.inject_fault = o.inject_fault;
  out << "config seed = " << o.seed << "\nconfig inject_fault = " << (o.inject_fault ? "true" : "false") << '\n';
  out << "seed " << o.seed << '\n';
  std::vector<checks::CheckResult> all;
  for (auto suite : {checks::gradient_suite, checks::oracle_suite, checks::invariant_suite}) {
    const auto results = suite(options);
    checks::print(out, results);
    all.insert(all.end(), results.begin(), results.end());
  }
  const auto failed = std::count_if(all.begin(), all.end(), [](const auto& r) { return !r.passed; });
  out << "selftest " << (failed ? "FAILED" : "passed") << ": " << all.size() - static_cast<std::size_t>(failed)
      << "/" << all.size() << " checks in " << fixed(seconds_since(t0), 1) << " s\n";
  if (failed) throw DataError("selftest: " + std::to_string(failed) + " checks failed");
  return kOk;
}

std::string kind_of(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const DataError*>(&e)) return "data";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const StateError*>(&e)) return "state";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  return "error";
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GCCN few-shot toolkit", "gccn"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic glyph dataset as an IDX pair");
  gen_cmd->add_option("--classes", gen.glyphs.num_classes, "number of classes")->capture_default_str();
  gen_cmd->add_option("--per-class", gen.glyphs.samples_per_class, "samples per class")->capture_default_str();
  gen_cmd->add_option("--size", gen.glyphs.size, "image side length")->capture_default_str();
  gen_cmd->add_option("--seed", gen.glyphs.seed, "generator seed")->capture_default_str();
  gen_cmd->add_option("--noise", gen.glyphs.noise, "pixel noise standard deviation")->capture_default_str();
  gen_cmd->add_option("--jitter", gen.glyphs.jitter, "per-sample displacement in pixels")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output IDX prefix")->capture_default_str();

  RawOptions raw;
  auto* raw_cmd = app.add_subcommand("convert-raw", "convert class folders of raw grayscale bytes to IDX");
  raw_cmd->add_option("--in", raw.in, "root directory, one subdirectory per class")->required();
  raw_cmd->add_option("--height", raw.height, "image height")->required();
  raw_cmd->add_option("--width", raw.width, "image width")->required();
  raw_cmd->add_option("--out", raw.out, "output IDX prefix")->required();

  TrainOptions classify_opts, fewshot_opts;
  auto* classify_cmd = app.add_subcommand("train-classify", "train the GCCN classifier");
  add_train_flags(classify_cmd, classify_opts);
  auto* fewshot_cmd = app.add_subcommand("train-fewshot", "episodic training of a few-shot head");
  add_train_flags(fewshot_cmd, fewshot_opts);

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval.data, "IDX prefix")->required();
  eval_cmd->add_option("--episodes", eval.episodes, "number of episodes (default: eval_episodes)");
  eval_cmd->add_option("--split", eval.split, "test (held-out classes) or all")->capture_default_str();
  eval_cmd->add_option("--config", eval.config_path, "config that must match the checkpoint fingerprint");
  eval_cmd->add_option("--csv", eval.csv, "write per-episode rows here");

  ExtractOptions extract;
  auto* extract_cmd = app.add_subcommand("extract-features", "export fused feature vectors (GCFV0001)");
  extract_cmd->add_option("--checkpoint", extract.checkpoint, "checkpoint file")->required();
  extract_cmd->add_option("--data", extract.data, "IDX prefix")->required();
  extract_cmd->add_option("--out", extract.out, "output file")->required();
  extract_cmd->add_option("--config", extract.config_path, "config that must match the checkpoint fingerprint");
  extract_cmd->add_option("--batch", extract.batch, "images per forward pass")->capture_default_str();

  SelftestOptions selftest;
  auto* selftest_cmd = app.add_subcommand("selftest", "gradient, oracle and invariant suites");
  selftest_cmd->add_option("--seed", selftest.seed, "suite seed")->capture_default_str();
  selftest_cmd->add_flag("--inject-fault", selftest.inject_fault, "corrupt every checked backward pass");

  std::vector<const char*> argv{"gccn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return kUsageError;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
    if (raw_cmd->parsed()) return cmd_convert_raw(raw, out);
    if (classify_cmd->parsed()) return cmd_train_classify(classify_opts, out);
    if (fewshot_cmd->parsed()) return cmd_train_fewshot(fewshot_opts, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (extract_cmd->parsed()) return cmd_extract(extract, out);
    if (selftest_cmd->parsed()) return cmd_selftest(selftest, out);
  } catch (const Error& e) {
    err << "error: " << kind_of(e) << ": " << one_line(e.what()) << '\n';
    const bool usage = dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e);
    return usage ? kUsageError : kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: runtime: " << one_line(e.what()) << '\n';
    return kRuntimeError;
  }
  err << "error: usage: no command given\n";
  return kUsageError;
}

}  // namespace gccn::cli
