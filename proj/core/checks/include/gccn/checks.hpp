#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gccn/autodiff.hpp"

// Self-test suites shared by the unit tests, the acceptance runner, and the
// `selftest` command.
namespace gccn::checks {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t instances = 0;
  double worst = 0.0;  // largest error measure seen (meaning depends on the check)
  std::string detail;
};

struct SuiteOptions {
  std::uint64_t seed = 20240611;
  // Overrides the per-check instance count when non-zero.
  std::size_t instances = 0;
  // Routes every checked output through an identity node whose backward
  // scales the gradient by 1.01; gradient checks must then fail.
  bool inject_fault = false;
};

// Identity forward, gradient scaled by `factor` backward.
Var corrupt(Var x, double factor = 1.01);

// Central finite differences at 64-bit, relative tolerance 1e-4, 20 random
// instances per differentiable operation.
std::vector<CheckResult> gradient_suite(const SuiteOptions& options = {});

// Bitwise comparison against the loop oracles, 200 random instances each.
std::vector<CheckResult> oracle_suite(const SuiteOptions& options = {});

// Norm identity (1000 pairs), head distribution invariants (500 trials each),
// AugNorm scale invariance (500 pairs x 3 scales), Frobenius two-pass oracle.
std::vector<CheckResult> invariant_suite(const SuiteOptions& options = {});

bool all_passed(const std::vector<CheckResult>& results);

// "PASS <name> n=<instances> worst=<value> <detail>" per result.
void print(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace gccn::checks
