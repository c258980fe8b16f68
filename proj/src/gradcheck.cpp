#include "hubs/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hubs/errors.hpp"

namespace hubs {

namespace {

double evaluate(const std::function<Tensor()>& loss_fn) {
  const double v = loss_fn().item();
  if (!std::isfinite(v)) throw NumericError("finite_difference_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckResult finite_difference_check(const std::function<Tensor()>& loss_fn, std::vector<NamedTensor> params,
                                        const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ContractError("finite_difference_check: step must be positive");

  for (auto& p : params) p.tensor.zero_grad();
  Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) throw NumericError("finite_difference_check: loss is not finite");
  loss.backward();

  // Flat (parameter, index) enumeration.
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].tensor.size(); ++i) coords.emplace_back(p, i);
  }
  if (coords.size() > options.max_coordinates) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
  }

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    auto g = p.tensor.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(p.tensor.size(), 0.0);
  }

  GradCheckResult result;
  const double h = options.step;
  for (auto [p, i] : coords) {
    auto values = params[p].tensor.mutable_data();
    const double original = values[i];
    values[i] = original + h;
    const double up = evaluate(loss_fn);
    values[i] = original - h;
    const double down = evaluate(loss_fn);
    values[i] = original;

    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[p][i] - numeric) / std::max(1e-8, std::abs(numeric));
    ++result.coordinates_checked;
    if (err > result.max_relative_error || result.coordinates_checked == 1) {
      result.max_relative_error = err;
      result.worst_parameter = params[p].name;
      result.worst_index = i;
      result.worst_analytic = analytic[p][i];
      result.worst_numeric = numeric;
    }
  }
  for (auto& p : params) p.tensor.zero_grad();
  return result;
}

}  // namespace hubs
