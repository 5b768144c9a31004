#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gccn/fewshot.hpp"

namespace gccn {

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;  // "train", "heldout" or "test"
  double loss = 0.0;
  double accuracy = 0.0;
};

struct EpisodeRecord {
  std::size_t episode_id = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct Summary {
  double mean = 0.0;
  double stderr_mean = 0.0;  // sample standard deviation / sqrt(n); 0 for n < 2
};

Summary summarize(std::span<const double> values);

// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

// epoch,split,loss,accuracy
void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> rows);

// episode_id,W,K,metric,head,loss,accuracy
void write_episodes_csv(const std::filesystem::path& path, std::span<const EpisodeRecord> rows, std::size_t ways,
                        std::size_t shots, const HeadConfig& head);

}  // namespace gccn
