#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "gccn/autodiff.hpp"

namespace gccn {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor),
  // so gradients that are zero on both sides do not divide by zero.
  double floor = 1e-6;
};

// Builds a fresh graph with `loss_fn` for every evaluation and compares the
// reverse-mode gradient of each trainable parameter in `params` against
// central finite differences. `loss_fn` must be deterministic and return a
// single-element Var. Parameter values are restored before returning.
GradCheckReport grad_check(const std::function<Var(Graph&)>& loss_fn, ParameterSet& params,
                           const GradCheckOptions& options = {});

inline GradCheckReport grad_check(const std::function<Var(Graph&)>& loss_fn, ParameterSet& params,
                                  double step, double tolerance) {
  return grad_check(loss_fn, params, GradCheckOptions{step, tolerance});
}

}  // namespace gccn
