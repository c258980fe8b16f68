#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hubs/tensor.hpp"

namespace hubs {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Throws ContractError unless 0 < beta1, beta2 < 1, epsilon > 0 and the
// learning rate is positive.
void validate(const AdamConfig& config);

// First and second moment buffers, one pair per parameter.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update at step t (1-based) using each parameter's
// accumulated gradient; a parameter without a gradient counts as zero.
// Throws NumericError naming the parameter when a gradient is not finite;
// nothing is updated in that case.
void adam_step(std::span<NamedTensor> params, AdamState& state, const AdamConfig& config, std::size_t t);

}  // namespace hubs
