#include "gccn/optim.hpp"

#include <cmath>

#include "gccn/error.hpp"

namespace gccn {

void sgd_step(ParameterSet& params, double learning_rate) {
  for (auto& p : params) {
    if (!p.trainable) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= learning_rate * p.grad[i];
  }
}

void Adam::step(ParameterSet& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.shape(), 0.0);
      v_.emplace_back(p.value.shape(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw StateError("Adam: parameter set changed between steps");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  std::size_t idx = 0;
  for (auto& p : params) {
    Tensor& m = m_[idx];
    Tensor& v = v_[idx];
    ++idx;
    if (!p.trainable) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= options_.learning_rate * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

void adam_step(ParameterSet& params, Adam& state) { state.step(params); }

void round_to_float(ParameterSet& params) {
  for (auto& p : params) {
    for (double& v : p.value.data()) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace gccn
