#pragma once

#include <cstddef>
#include <vector>

#include "gccn/dataset.hpp"
#include "gccn/rng.hpp"

namespace gccn {

struct EpisodeItem {
  std::size_t sample = 0;  // index into the source dataset
  int label = 0;           // episode-local class in 0..ways-1
};

// One W-way K-shot task: K support and Q query samples for each of W classes.
// Both sets are ordered class-major (all of label 0, then label 1, ...).
struct Episode {
  std::size_t ways = 0;
  std::size_t shots = 0;
  std::size_t queries = 0;
  std::vector<int> classes;  // dataset class of every episode label
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;

  // Throws DataError if counts, labels, or support/query disjointness are off.
  void validate() const;

  std::vector<std::size_t> support_samples() const;
  std::vector<std::size_t> query_samples() const;
  std::vector<int> support_labels() const;
  std::vector<int> query_labels() const;
};

// Draws W distinct classes uniformly, then K + Q distinct samples from each.
Episode sample_episode(const Dataset& dataset, std::size_t ways, std::size_t shots, std::size_t queries, Rng& rng);

// Same, using a precomputed Dataset::indices_by_class().
Episode sample_episode(const std::vector<std::vector<std::size_t>>& by_class, std::size_t ways, std::size_t shots,
                       std::size_t queries, Rng& rng);

}  // namespace gccn
