#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace dialrel {

// All randomness in the toolkit is drawn from std::mt19937_64 engines whose
// seeds are derived from one top-level seed:
//
//   derive_seed(seed, tag) = splitmix64(seed ^ fnv1a64(tag))
//   derive_seed(seed, tag, index) = splitmix64(derive_seed(seed, tag) + index)
//
// Bounded draws use rejection sampling on the raw engine output, so results
// do not depend on the standard library's distribution implementations.

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index);

using Engine = std::mt19937_64;

// Small counter-based engine for short per-trial streams.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    const auto out = splitmix64(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return out;
  }

 private:
  std::uint64_t state_;
};

// Uniform integer in [0, bound). bound must be > 0.
template <typename G>
std::uint64_t uniform_below(G& engine, std::uint64_t bound) {
  // Reject the top partial block so every residue is equally likely.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t r;
  do {
    r = engine();
  } while (r >= limit);
  return r % bound;
}

// Uniform real in [0, 1) with 53 random bits.
template <typename G>
double uniform_unit(G& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on uniform_unit.
double standard_normal(Engine& engine);

// In-place Fisher-Yates shuffle.
template <typename T, typename G>
void fisher_yates(std::span<T> items, G& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(engine, i));
    std::swap(items[i - 1], items[j]);
  }
}

std::vector<std::size_t> random_permutation(std::size_t n, Engine& engine);

}  // namespace dialrel
