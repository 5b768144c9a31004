#pragma once

#include <cstddef>
#include <vector>

#include "gccn/checkpoint.hpp"
#include "gccn/config.hpp"
#include "gccn/gccn_net.hpp"
#include "gccn/metrics.hpp"

namespace gccn {

struct FewshotEvaluation {
  Summary accuracy;
  double mean_loss = 0.0;
  std::vector<EpisodeRecord> episodes;
};

struct FewshotResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;  // one train row per epoch, then the final test row
  FewshotEvaluation evaluation;       // on the test classes
};

// Samples `episodes` W-way K-shot tasks from `dataset` with `rng` and scores
// the queries in eval mode.
FewshotEvaluation evaluate_fewshot(const GccnNet& net, ParameterSet& params, const Dataset& dataset,
                                   const RunConfig& config, std::size_t episodes, Rng& rng);

// Episodic training: epochs x episodes_per_epoch episodes drawn from `train`,
// one optimizer step each, then eval_episodes test episodes from `test`. The
// checkpoint holds the rng state taken between training and evaluation, so
// that restoring it reproduces the test episodes.
FewshotResult train_fewshot(const Dataset& train, const Dataset& test, const RunConfig& config, Rng& rng);

}  // namespace gccn
