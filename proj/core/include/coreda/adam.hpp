#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "coreda/tensor.hpp"

namespace coreda {

// First/second moment buffers for one parameter group, plus the shared step
// counter. Moments start at zero and are bias-corrected on every step.
struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// In-place Adam update of `params` from their accumulated grads.
/// On the first call the moments are allocated to match the parameter shapes;
/// afterwards any shape drift is a DimensionError.
void adam_step(std::span<const Tensor> params, AdamState& state, double lr);

}  // namespace coreda
