#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hubs/tensor.hpp"

namespace hubs {

struct GradCheckOptions {
  double step = 1e-6;
  // Coordinates sampled uniformly without replacement across all parameters;
  // every coordinate is checked when the total is not larger.
  std::size_t max_coordinates = 200;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares reverse-mode gradients of `loss_fn` against central differences
//   (f(x + h) - f(x - h)) / 2h
// per sampled coordinate; the error is |analytic - numeric| / max(1e-8, |numeric|).
// loss_fn must rebuild its graph from the current parameter values on every
// call. Parameter gradients are zeroed before and after the check.
GradCheckResult finite_difference_check(const std::function<Tensor()>& loss_fn, std::vector<NamedTensor> params,
                                        const GradCheckOptions& options = {});

}  // namespace hubs
