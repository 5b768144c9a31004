#pragma once

#include "gccn/config.hpp"
#include "gccn/optim.hpp"

namespace gccn::detail {

// The configured optimizer plus the precision rounding applied after each step.
class Stepper {
 public:
  explicit Stepper(const RunConfig& config)
      : kind_(config.optimizer),
        precision_(config.precision),
        learning_rate_(config.learning_rate),
        adam_(AdamOptions{.learning_rate = config.learning_rate}) {}

  void step(ParameterSet& params) {
    if (kind_ == Optimizer::sgd) {
      sgd_step(params, learning_rate_);
    } else {
      adam_.step(params);
    }
    settle(params);
  }

  void settle(ParameterSet& params) const {
    if (precision_ == Precision::f32) round_to_float(params);
  }

 private:
  Optimizer kind_;
  Precision precision_;
  double learning_rate_;
  Adam adam_;
};

}  // namespace gccn::detail
