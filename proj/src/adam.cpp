#include "hubs/adam.hpp"

#include <cmath>
#include <string>

#include "hubs/errors.hpp"

namespace hubs {

void validate(const AdamConfig& c) {
  if (!(c.beta1 > 0.0 && c.beta1 < 1.0)) throw ContractError("adam: beta1 must lie in (0, 1)");
  if (!(c.beta2 > 0.0 && c.beta2 < 1.0)) throw ContractError("adam: beta2 must lie in (0, 1)");
  if (!(c.epsilon > 0.0)) throw ContractError("adam: epsilon must be positive");
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw ContractError("adam: learning rate must be positive");
  }
}

void adam_step(std::span<NamedTensor> params, AdamState& state, const AdamConfig& config, std::size_t t) {
  validate(config);
  if (t < 1) throw ContractError("adam: step counter starts at 1");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.size(), 0.0);
      state.v.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam: state does not match the parameter list");
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in parameter '" + p.name + "'");
    }
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].tensor;
    const auto grad = p.grad();
    auto value = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != value.size()) throw ContractError("adam: moment size mismatch for '" + params[i].name + "'");
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad.empty() ? 0.0 : grad[k];
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      value[k] -= config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + config.epsilon);
    }
  }
}

}  // namespace hubs
