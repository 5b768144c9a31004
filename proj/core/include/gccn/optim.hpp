#pragma once

#include <cstdint>
#include <vector>

#include "gccn/autodiff.hpp"

namespace gccn {

// Plain gradient descent: θ -= lr * g for every trainable parameter.
void sgd_step(ParameterSet& params, double learning_rate);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are created lazily and keyed by
// parameter order, so the set must not change between steps.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(ParameterSet& params);
  std::int64_t steps() const { return steps_; }

 private:
  AdamOptions options_;
  std::int64_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// Free-function form of one Adam update using state held by the caller.
void adam_step(ParameterSet& params, Adam& state);

// Rounds every parameter value to the nearest binary32 value.
void round_to_float(ParameterSet& params);

}  // namespace gccn
