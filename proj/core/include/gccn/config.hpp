#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gccn/checkpoint.hpp"
#include "gccn/dataset.hpp"
#include "gccn/encoder.hpp"
#include "gccn/fewshot.hpp"
#include "gccn/gc_features.hpp"

namespace gccn {

enum class Task { classify, fewshot };
enum class Optimizer { sgd, adam };

std::string to_string(Task task);
std::string to_string(Optimizer optimizer);
std::string to_string(Precision precision);
Task parse_task(const std::string& text);
Optimizer parse_optimizer(const std::string& text);
Precision parse_precision(const std::string& text);

// Everything a run needs. Input shape and class count are filled from the
// dataset when left at zero.
struct RunConfig {
  Task task = Task::fewshot;
  std::uint64_t seed = 1;

  EncoderConfig encoder;
  GcConfig gc;

  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  Precision precision = Precision::f64;
  std::size_t num_classes = 0;
  double holdout_fraction = 0.2;

  HeadConfig head;
  std::size_t ways = 5;
  std::size_t shots = 1;
  std::size_t queries = 5;
  std::size_t episodes_per_epoch = 100;
  std::size_t eval_episodes = 200;
  double train_fraction = 0.8;

  // Paths are not part of the canonical form.
  std::string data;
  std::string out;
};

// Names accepted by set_value, in canonical order.
const std::vector<std::string>& config_keys();

// Assigns one `key = value` pair. Throws ConfigError for an unknown key or a
// value that does not parse.
void set_value(RunConfig& config, const std::string& key, const std::string& value);

// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});
RunConfig parse_config(const std::string& text, RunConfig base = {});

// Stable `key = value` serialization of every non-path field. Doubles are
// written in shortest round-trip form.
std::string canonical(const RunConfig& config);

// Canonical form plus the data and output paths.
std::string describe(const RunConfig& config);

std::string fingerprint(const RunConfig& config);

// Throws ConfigError for non-positive counts, out-of-range fractions, an
// impossible encoder shape walk, or a GC grid that does not fit.
void validate(const RunConfig& config);

// Fills a zero input shape (and, for classify, a zero class count) from the
// dataset. Throws DimensionError if a shape that is already set disagrees.
void fit_to_dataset(RunConfig& config, const Dataset& dataset);

// Rebuilds the config stored in a checkpoint and checks it against the
// checkpoint's fingerprint.
RunConfig config_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace gccn
