#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "coreda/tensor.hpp"

namespace coreda {

// A differentiable scalar function of `params`, given as a closure that
// rebuilds its graph from the parameters' current values. The closure must be
// pure: two calls with the same parameter data return the same scalar.
struct GradCheckCase {
  std::string name;
  std::vector<Tensor> params;
  std::function<Tensor()> build;
  // 0 checks every coordinate; otherwise a deterministic subsample per tensor
  std::size_t max_coords_per_param = 0;
};

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  bool pass = false;
};

/// Central finite differences against the tape's analytic gradients.
/// rel_err = |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult check_gradients(const GradCheckCase& c, double h = 1e-6, double tol = 1e-5,
                                std::uint64_t coord_seed = 0);

struct GradCheckReport {
  std::vector<GradCheckResult> results;
  double h = 1e-6;
  double tol = 1e-5;
  bool all_pass = false;
};

/// Checks every kernel op plus one fully composed training step.
GradCheckReport run_gradcheck_suite(std::uint64_t seed);

}  // namespace coreda
