#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ursa/linalg.hpp"
#include "ursa/rng.hpp"

namespace ursa {

// Radial basis used to turn star-to-point distances into a feature.
enum class Measure { gaussian, exponential, minimum };

std::string_view to_string(Measure measure);
Measure parse_measure(std::string_view name);  // throws ConfigError

// Distance below which the exponential and minimum measures treat a
// point-star pair as coincident and contribute no gradient.
inline constexpr double kCoincidenceEpsilon = 1e-8;

// An unordered set of n points in d dimensions, stored as an n×d matrix.
// Row order carries no meaning.
template <typename T>
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(Matrix<T> points);

  std::size_t n() const noexcept { return points_.rows(); }
  std::size_t d() const noexcept { return points_.cols(); }
  const Matrix<T>& points() const noexcept { return points_; }
  Matrix<T>& points() noexcept { return points_; }
  std::span<const T> point(std::size_t j) const { return points_.row(j); }

 private:
  Matrix<T> points_;
};

// The layer's trainable state: m stars in d dimensions (m×d) and the measure
// with its width hyper-parameter. sigma is read only by the Gaussian measure
// and lambda only by the exponential one.
template <typename T>
struct Constellation {
  Matrix<T> stars;
  Measure measure = Measure::gaussian;
  T sigma = T(0.1);
  T lambda = T(10);

  std::size_t m() const noexcept { return stars.rows(); }
  std::size_t d() const noexcept { return stars.cols(); }
  std::size_t parameter_count() const noexcept { return stars.size(); }
};

template <typename T>
using FeatureVector = std::vector<T>;

// Features plus ∂vᵢ/∂qᵢ for every star (stored m×d). The Jacobian of the
// layer is block diagonal, so this is all backward needs.
template <typename T>
struct LayerOutput {
  FeatureVector<T> features;
  Matrix<T> star_jacobian;
};

// vᵢ = Σⱼ exp(-‖pⱼ - qᵢ‖² / 2σ²)
template <typename T>
FeatureVector<T> forward_gaussian(const PointCloud<T>& cloud, const Constellation<T>& constellation);

// vᵢ = Σⱼ exp(-λ‖pⱼ - qᵢ‖)
template <typename T>
FeatureVector<T> forward_exponential(const PointCloud<T>& cloud, const Constellation<T>& constellation);

// vᵢ = minⱼ ‖pⱼ - qᵢ‖
template <typename T>
FeatureVector<T> forward_minimum(const PointCloud<T>& cloud, const Constellation<T>& constellation);

// Dispatches on constellation.measure.
template <typename T>
FeatureVector<T> forward(const PointCloud<T>& cloud, const Constellation<T>& constellation);

// Forward pass that also accumulates the per-star Jacobian in the same sweep
// over points.
template <typename T>
LayerOutput<T> forward_with_jacobian(const PointCloud<T>& cloud, const Constellation<T>& constellation);

// Gradient of a scalar loss with respect to the stars (m×d), given
// ∂loss/∂v. Points receive no gradient.
template <typename T>
Matrix<T> backward(const PointCloud<T>& cloud, const Constellation<T>& constellation,
                   std::span<const T> upstream);

// Scales each Jacobian row by the matching upstream entry.
template <typename T>
Matrix<T> scale_jacobian(const Matrix<T>& star_jacobian, std::span<const T> upstream);

// Stars drawn uniformly from [-1, 1]^d.
template <typename T>
Constellation<T> init_constellation(Rng& rng, std::size_t m, std::size_t d, Measure measure,
                                    T sigma = T(0.1), T lambda = T(10));

}  // namespace ursa
