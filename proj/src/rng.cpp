#include "ursa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ursa {

double Rng::uniform(double lo, double hi) {
  require(lo < hi, "uniform: lo must be < hi");
  const double v = lo + (hi - lo) * uniform01();
  return v < hi ? v : std::nextafter(hi, lo);
}

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
  require(bound > 0, "uniform_index: bound must be positive");
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

double Rng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::clipped_normal(double std, double clip) {
  require(std > 0.0, "clipped_normal: std must be positive");
  require(clip > 0.0, "clipped_normal: clip must be positive");
  return std::clamp(std * normal(), -clip, clip);
}

template <typename T>
Matrix<T> sample_uniform(Rng& rng, T lo, T hi, std::size_t rows, std::size_t cols) {
  require(lo < hi, "sample_uniform: lo must be < hi");
  Matrix<T> out(rows, cols);
  for (T& v : out.values()) {
    T x = static_cast<T>(rng.uniform(lo, hi));
    if (!(x < hi)) x = std::nextafter(hi, lo);
    v = x;
  }
  return out;
}

template <typename T>
Matrix<T> sample_clipped_normal(Rng& rng, T std, T clip, std::size_t rows, std::size_t cols) {
  require(std > T{0}, "sample_clipped_normal: std must be positive");
  require(clip > T{0}, "sample_clipped_normal: clip must be positive");
  Matrix<T> out(rows, cols);
  for (T& v : out.values()) {
    v = std::clamp(static_cast<T>(rng.clipped_normal(std, clip)), -clip, clip);
  }
  return out;
}

void shuffle(std::span<std::size_t> indices, Rng& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(indices[i - 1], indices[j]);
  }
}

template Matrix<float> sample_uniform(Rng&, float, float, std::size_t, std::size_t);
template Matrix<double> sample_uniform(Rng&, double, double, std::size_t, std::size_t);
template Matrix<float> sample_clipped_normal(Rng&, float, float, std::size_t, std::size_t);
template Matrix<double> sample_clipped_normal(Rng&, double, double, std::size_t, std::size_t);

}  // namespace ursa
