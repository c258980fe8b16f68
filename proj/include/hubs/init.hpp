#pragma once

#include <cstdint>
#include <string_view>

#include "hubs/tensor.hpp"

namespace hubs {

// Stable per-name seed, so a parameter's initial values depend only on the
// run seed and its name (and not on which other parameters exist).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

// Uniform in +-sqrt(6 / (fan_in + fan_out)), drawn from derive_seed(seed, name).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed, std::string_view name);

// Same distribution written into a contiguous block of an existing tensor.
void glorot_fill(std::span<double> out, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed,
                 std::string_view name);

}  // namespace hubs
