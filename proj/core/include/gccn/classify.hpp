#pragma once

#include <cstddef>
#include <vector>

#include "gccn/checkpoint.hpp"
#include "gccn/config.hpp"
#include "gccn/gccn_net.hpp"
#include "gccn/metrics.hpp"

namespace gccn {

// GCCN vector -> fully connected layer -> class logits.
class Classifier {
 public:
  Classifier(const RunConfig& config);

  const GccnNet& net() const { return net_; }
  std::size_t num_classes() const { return classes_; }

  // Encoder parameters plus "head.fc.weight" [features, classes] and
  // "head.fc.bias" [classes]; batchnorm statistics start at mean 0, var 1.
  void init_params(ParameterSet& params, std::uint64_t seed) const;

  // images [n, h, w, c] -> logits [n, classes]
  Var logits(Var images, ParameterSet& params, Mode mode) const;

 private:
  GccnNet net_;
  std::size_t classes_;
};

struct ClassifyResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;  // one train row and one heldout row per epoch
};

struct ClassifyEvaluation {
  double accuracy = 0.0;
  double loss = 0.0;
  // confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

// Mini-batch training with cross-entropy. The config must already be fitted
// to the data; randomness (batch order) is drawn from `rng`, whose state after
// training is stored in the checkpoint.
ClassifyResult train_classifier(const Dataset& train, const Dataset& heldout, const RunConfig& config, Rng& rng);

ClassifyEvaluation evaluate(const Classifier& model, ParameterSet& params, const Dataset& dataset,
                            std::size_t batch_size);

// Throws DimensionError if the dataset images do not match the checkpoint.
ClassifyEvaluation evaluate(const Checkpoint& checkpoint, const Dataset& dataset);

}  // namespace gccn
