#include "gccn/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gccn/error.hpp"
#include "gccn/gccn_net.hpp"

namespace gccn {

std::string to_string(Task task) { return task == Task::classify ? "classify" : "fewshot"; }

std::string to_string(Optimizer optimizer) { return optimizer == Optimizer::sgd ? "sgd" : "adam"; }

std::string to_string(Precision precision) { return precision == Precision::f64 ? "f64" : "f32"; }

Task parse_task(const std::string& text) {
  if (text == "classify") return Task::classify;
  if (text == "fewshot") return Task::fewshot;
  throw ConfigError("unknown task '" + text + "' (classify|fewshot)");
}

Optimizer parse_optimizer(const std::string& text) {
  if (text == "sgd") return Optimizer::sgd;
  if (text == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + text + "' (sgd|adam)");
}

Precision parse_precision(const std::string& text) {
  if (text == "f64" || text == "64") return Precision::f64;
  if (text == "f32" || text == "32") return Precision::f32;
  throw ConfigError("unknown precision '" + text + "' (f64|f32)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(to_u64(key, value));
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite number, got '" + value + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "task",          "seed",          "input.height",     "input.width",  "input.channels",
      "encoder.blocks", "encoder.filters", "encoder.kernel", "gc.rows",      "gc.cols",
      "gc.collapse",   "gc.layers",     "gc.mode",          "optimizer",    "learning_rate",
      "batch_size",    "epochs",        "precision",        "num_classes",  "holdout_fraction",
      "head",          "metric",        "ways",             "shots",        "queries",
      "episodes_per_epoch", "eval_episodes", "train_fraction", "data",      "out"};
  return keys;
}

void set_value(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "task") c.task = parse_task(v);
  else if (key == "seed") c.seed = to_u64(key, v);
  else if (key == "input.height") c.encoder.input_height = to_size(key, v);
  else if (key == "input.width") c.encoder.input_width = to_size(key, v);
  else if (key == "input.channels") c.encoder.input_channels = to_size(key, v);
  else if (key == "encoder.blocks") c.encoder.num_blocks = to_size(key, v);
  else if (key == "encoder.filters") c.encoder.filters_per_block = to_size(key, v);
  else if (key == "encoder.kernel") c.encoder.kernel_size = to_size(key, v);
  else if (key == "gc.rows") c.gc.grid_rows = to_size(key, v);
  else if (key == "gc.cols") c.gc.grid_cols = to_size(key, v);
  else if (key == "gc.collapse") c.gc.collapse = parse_collapse(v);
  else if (key == "gc.layers") c.gc.layers = to_size(key, v);
  else if (key == "gc.mode") c.gc.mode = parse_fusion_mode(v);
  else if (key == "optimizer") c.optimizer = parse_optimizer(v);
  else if (key == "learning_rate") c.learning_rate = to_double(key, v);
  else if (key == "batch_size") c.batch_size = to_size(key, v);
  else if (key == "epochs") c.epochs = to_size(key, v);
  else if (key == "precision") c.precision = parse_precision(v);
  else if (key == "num_classes") c.num_classes = to_size(key, v);
  else if (key == "holdout_fraction") c.holdout_fraction = to_double(key, v);
  else if (key == "head") c.head.head = parse_head(v);
  else if (key == "metric") c.head.metric = parse_metric(v);
  else if (key == "ways") c.ways = to_size(key, v);
  else if (key == "shots") c.shots = to_size(key, v);
  else if (key == "queries") c.queries = to_size(key, v);
  else if (key == "episodes_per_epoch") c.episodes_per_epoch = to_size(key, v);
  else if (key == "eval_episodes") c.eval_episodes = to_size(key, v);
  else if (key == "train_fraction") c.train_fraction = to_double(key, v);
  else if (key == "data") c.data = v;
  else if (key == "out") c.out = v;
  else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  for (const auto& [key, value] : parse_config_text(text)) set_value(base, key, value);
  return base;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), std::move(base));
}

std::string canonical(const RunConfig& c) {
  std::ostringstream s;
  auto line = [&s](const char* key, const std::string& value) { s << key << " = " << value << '\n'; };
  auto num = [&line](const char* key, std::uint64_t value) { line(key, std::to_string(value)); };
  line("task", to_string(c.task));
  num("seed", c.seed);
  num("input.height", c.encoder.input_height);
  num("input.width", c.encoder.input_width);
  num("input.channels", c.encoder.input_channels);
  num("encoder.blocks", c.encoder.num_blocks);
  num("encoder.filters", c.encoder.filters_per_block);
  num("encoder.kernel", c.encoder.kernel_size);
  num("gc.rows", c.gc.grid_rows);
  num("gc.cols", c.gc.grid_cols);
  line("gc.collapse", to_string(c.gc.collapse));
  num("gc.layers", c.gc.layers);
  line("gc.mode", to_string(c.gc.mode));
  line("optimizer", to_string(c.optimizer));
  line("learning_rate", format_double(c.learning_rate));
  num("batch_size", c.batch_size);
  num("epochs", c.epochs);
  line("precision", to_string(c.precision));
  num("num_classes", c.num_classes);
  line("holdout_fraction", format_double(c.holdout_fraction));
  line("head", to_string(c.head.head));
  line("metric", to_string(c.head.metric));
  num("ways", c.ways);
  num("shots", c.shots);
  num("queries", c.queries);
  num("episodes_per_epoch", c.episodes_per_epoch);
  num("eval_episodes", c.eval_episodes);
  line("train_fraction", format_double(c.train_fraction));
  return s.str();
}

std::string describe(const RunConfig& c) {
  return canonical(c) + "data = " + c.data + "\nout = " + c.out + "\n";
}

std::string fingerprint(const RunConfig& config) { return make_fingerprint(config.precision, canonical(config)); }

void validate(const RunConfig& c) {
  require(c.encoder.num_blocks >= 1, "encoder.blocks must be at least 1");
  require(c.encoder.filters_per_block >= 1, "encoder.filters must be at least 1");
  require(c.encoder.kernel_size >= 1, "encoder.kernel must be at least 1");
  require(c.encoder.input_channels >= 1, "input.channels must be at least 1");
  require(c.gc.grid_rows >= 1 && c.gc.grid_cols >= 1, "gc.rows and gc.cols must be at least 1");
  require(c.gc.layers >= 1 && c.gc.layers <= 3, "gc.layers must be 1, 2 or 3");
  require(c.gc.mode == FusionMode::plain || c.gc.layers <= c.encoder.num_blocks, "gc.layers exceeds encoder.blocks");
  require(c.learning_rate > 0.0, "learning_rate must be positive");
  require(c.batch_size >= 1, "batch_size must be at least 1");
  require(c.holdout_fraction > 0.0 && c.holdout_fraction < 1.0, "holdout_fraction must lie in (0, 1)");
  require(c.train_fraction > 0.0 && c.train_fraction < 1.0, "train_fraction must lie in (0, 1)");
  require(c.ways >= 1, "ways must be at least 1");
  require(c.shots >= 1, "shots must be at least 1");
  require(c.queries >= 1, "queries must be at least 1");
  require(c.episodes_per_epoch >= 1, "episodes_per_epoch must be at least 1");
  require(c.eval_episodes >= 1, "eval_episodes must be at least 1");
  if (c.task == Task::classify && c.num_classes != 0) require(c.num_classes >= 2, "num_classes must be at least 2");
  if (c.encoder.input_height != 0 && c.encoder.input_width != 0) GccnNet(c.encoder, c.gc);
}

void fit_to_dataset(RunConfig& c, const Dataset& dataset) {
  dataset.validate();
  EncoderConfig& e = c.encoder;
  if (e.input_height == 0 && e.input_width == 0) {
    e.input_height = dataset.height;
    e.input_width = dataset.width;
    e.input_channels = dataset.channels;
  } else if (e.input_height != dataset.height || e.input_width != dataset.width ||
             e.input_channels != dataset.channels) {
    throw DimensionError("config input " + shape_string({e.input_height, e.input_width, e.input_channels}) +
                         " does not match dataset images " + shape_string(dataset.image_shape()));
  }
  if (c.task == Task::classify && c.num_classes == 0) c.num_classes = dataset.num_classes();
}

RunConfig config_from_checkpoint(const Checkpoint& checkpoint) {
  RunConfig c = parse_config(checkpoint.config_text);
  if (fingerprint(c) != checkpoint.fingerprint) {
    throw FormatError("checkpoint config does not match its fingerprint " + checkpoint.fingerprint);
  }
  return c;
}

}  // namespace gccn
