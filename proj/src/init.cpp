#include "hubs/init.hpp"

#include <cmath>
#include <random>

namespace hubs {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name, mixed with the seed through splitmix64.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (h | 1u);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void glorot_fill(std::span<double> out, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed,
                 std::string_view name) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::mt19937_64 rng(derive_seed(seed, name));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : out) v = dist(rng);
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed, std::string_view name) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  glorot_fill(t.mutable_data(), fan_in, fan_out, seed, name);
  return t;
}

}  // namespace hubs
