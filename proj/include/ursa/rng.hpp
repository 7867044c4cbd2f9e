#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "ursa/linalg.hpp"

namespace ursa {

// Seeded 64-bit Mersenne Twister. The engine's output sequence is fixed by
// the C++ standard; every distribution below is derived from raw 64-bit words
// here instead of <random>'s distributions, whose algorithms are
// implementation-defined.
class Rng {
 public:
  static constexpr std::string_view algorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // [lo, hi); requires lo < hi.
  double uniform(double lo, double hi);

  // Unbiased integer in [0, bound); requires bound > 0.
  std::uint64_t uniform_index(std::uint64_t bound);

  // Standard normal via Box-Muller. Always consumes exactly two words.
  double normal();

  // N(0, std²) saturated to [-clip, clip].
  double clipped_normal(double std, double clip);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Entries uniform in [lo, hi). Value range is kept half-open after rounding
// to T.
template <typename T>
Matrix<T> sample_uniform(Rng& rng, T lo, T hi, std::size_t rows, std::size_t cols);

// Entries N(0, std²) clamped to [-clip, clip]. Out-of-range draws saturate to
// the boundary, so the number of engine words consumed is independent of the
// values drawn.
template <typename T>
Matrix<T> sample_clipped_normal(Rng& rng, T std, T clip, std::size_t rows, std::size_t cols);

// Fisher-Yates permutation of `indices` driven by `rng`.
void shuffle(std::span<std::size_t> indices, Rng& rng);

// Seed for the per-sample stream of item `index`: base ⊕ index.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) { return base ^ index; }

}  // namespace ursa
