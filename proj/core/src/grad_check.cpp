#include "gccn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace gccn {

namespace {

double evaluate(const std::function<Var(Graph&)>& loss_fn) {
  Graph g;
  return loss_fn(g).value().item();
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(Graph&)>& loss_fn, ParameterSet& params,
                           const GradCheckOptions& options) {
  params.zero_grad();
  {
    Graph g;
    Var loss = loss_fn(g);
    g.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (auto& p : params) {
    if (!p.trainable) continue;
    GradCheckEntry entry;
    entry.name = p.name;
    const Tensor analytic = p.grad;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      const double hi = saved + options.step, lo = saved - options.step;
      p.value[i] = hi;
      const double up = evaluate(loss_fn);
      p.value[i] = lo;
      const double down = evaluate(loss_fn);
      p.value[i] = saved;

      // Divide by the step actually taken after rounding.
      const double numeric = (up - down) / (hi - lo);
      const double a = analytic[i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), options.floor});
      if (rel_err > entry.max_rel_error) {
        entry.max_rel_error = rel_err;
        entry.worst_index = i;
      }
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error <= options.tolerance;
  params.zero_grad();
  return report;
}

}  // namespace gccn
