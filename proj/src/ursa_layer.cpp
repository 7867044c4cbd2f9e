#include "ursa/ursa_layer.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ursa/error.hpp"

namespace ursa {

std::string_view to_string(Measure measure) {
  switch (measure) {
    case Measure::gaussian: return "gaussian";
    case Measure::exponential: return "exponential";
    case Measure::minimum: return "minimum";
  }
  return "unknown";
}

Measure parse_measure(std::string_view name) {
  if (name == "gaussian") return Measure::gaussian;
  if (name == "exponential") return Measure::exponential;
  if (name == "minimum") return Measure::minimum;
  throw ConfigError("unknown measure '" + std::string(name) + "' (expected gaussian|exponential|minimum)");
}

template <typename T>
PointCloud<T>::PointCloud(Matrix<T> points) : points_(std::move(points)) {
  require(points_.rows() >= 1 && points_.cols() >= 1, "PointCloud: need n >= 1 and d >= 1");
  require(points_.all_finite(), "PointCloud: coordinates must be finite");
}

namespace {

template <typename T>
void check_shapes(const PointCloud<T>& cloud, const Constellation<T>& q) {
  require(q.m() >= 1, "constellation must have at least one star");
  require(cloud.d() == q.d(), "point dimension does not match star dimension");
  require(cloud.n() >= 1, "point cloud is empty");
}

// Single pass over the points in input order. For every point the squared
// distance to all stars is computed first (stars laid out coordinate-major so
// the inner loops run over contiguous star indices), then folded into the
// per-star accumulators. Each star's accumulator sees points in index order.
template <typename T, bool WithJacobian>
LayerOutput<T> run_layer(const PointCloud<T>& cloud, const Constellation<T>& q) {
  check_shapes(cloud, q);
  const std::size_t n = cloud.n(), m = q.m(), d = q.d();
  const Matrix<T> star_t = transpose(q.stars);  // d×m
  const T* qs = star_t.data();

  std::vector<T> r2(m), term(m);
  std::vector<T> acc(m, T{0});
  // ∂v/∂q accumulated coordinate-major (d×m), transposed at the end.
  Matrix<T> jac_t(WithJacobian ? d : 0, WithJacobian ? m : 0);
  std::vector<std::size_t> nearest;
  if (q.measure == Measure::minimum) {
    acc.assign(m, std::numeric_limits<T>::infinity());
    nearest.assign(m, 0);
  }

  const T gauss_scale = T{1} / (T{2} * q.sigma * q.sigma);
  const T eps = static_cast<T>(kCoincidenceEpsilon);
  if (q.measure == Measure::gaussian) require(q.sigma > T{0}, "gaussian measure needs sigma > 0");
  if (q.measure == Measure::exponential) require(q.lambda > T{0}, "exponential measure needs lambda > 0");

  for (std::size_t j = 0; j < n; ++j) {
    const T* p = cloud.points().data() + j * d;
    for (std::size_t i = 0; i < m; ++i) r2[i] = T{0};
    for (std::size_t k = 0; k < d; ++k) {
      const T pk = p[k];
      const T* qk = qs + k * m;
      for (std::size_t i = 0; i < m; ++i) {
        const T diff = pk - qk[i];
        r2[i] += diff * diff;
      }
    }

    switch (q.measure) {
      case Measure::gaussian:
        for (std::size_t i = 0; i < m; ++i) term[i] = std::exp(-r2[i] * gauss_scale);
        for (std::size_t i = 0; i < m; ++i) acc[i] += term[i];
        if constexpr (WithJacobian) {
          for (std::size_t k = 0; k < d; ++k) {
            const T pk = p[k];
            const T* qk = qs + k * m;
            T* jk = jac_t.data() + k * m;
            for (std::size_t i = 0; i < m; ++i) jk[i] += term[i] * (pk - qk[i]);
          }
        }
        break;
      case Measure::exponential:
        for (std::size_t i = 0; i < m; ++i) r2[i] = std::sqrt(r2[i]);  // now ‖p - q‖
        for (std::size_t i = 0; i < m; ++i) term[i] = std::exp(-q.lambda * r2[i]);
        for (std::size_t i = 0; i < m; ++i) acc[i] += term[i];
        if constexpr (WithJacobian) {
          for (std::size_t i = 0; i < m; ++i) term[i] = r2[i] > eps ? term[i] / r2[i] : T{0};
          for (std::size_t k = 0; k < d; ++k) {
            const T pk = p[k];
            const T* qk = qs + k * m;
            T* jk = jac_t.data() + k * m;
            for (std::size_t i = 0; i < m; ++i) jk[i] += term[i] * (pk - qk[i]);
          }
        }
        break;
      case Measure::minimum:
        // Strict comparison keeps the lowest index on ties.
        for (std::size_t i = 0; i < m; ++i) {
          if (r2[i] < acc[i]) {
            acc[i] = r2[i];
            nearest[i] = j;
          }
        }
        break;
    }
  }

  LayerOutput<T> out;
  if (q.measure == Measure::minimum) {
    for (std::size_t i = 0; i < m; ++i) acc[i] = std::sqrt(acc[i]);
  }
  if constexpr (WithJacobian) {
    out.star_jacobian = Matrix<T>(m, d);
    switch (q.measure) {
      case Measure::gaussian: {
        const T inv_var = T{1} / (q.sigma * q.sigma);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t k = 0; k < d; ++k) out.star_jacobian(i, k) = jac_t(k, i) * inv_var;
        break;
      }
      case Measure::exponential:
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t k = 0; k < d; ++k) out.star_jacobian(i, k) = jac_t(k, i) * q.lambda;
        break;
      case Measure::minimum:
        for (std::size_t i = 0; i < m; ++i) {
          if (acc[i] < eps) continue;  // star sits on a point: zero subgradient
          const T* p = cloud.points().data() + nearest[i] * d;
          for (std::size_t k = 0; k < d; ++k)
            out.star_jacobian(i, k) = (q.stars(i, k) - p[k]) / acc[i];
        }
        break;
    }
  }
  out.features = std::move(acc);
  return out;
}

}  // namespace

template <typename T>
FeatureVector<T> forward_gaussian(const PointCloud<T>& cloud, const Constellation<T>& constellation) {
  require(constellation.measure == Measure::gaussian, "forward_gaussian: measure is not gaussian");
  return run_layer<T, false>(cloud, constellation).features;
}

template <typename T>
FeatureVector<T> forward_exponential(const PointCloud<T>& cloud, const Constellation<T>& constellation) {
  require(constellation.measure == Measure::exponential, "forward_exponential: measure is not exponential");
  return run_layer<T, false>(cloud, constellation).features;
}

template <typename T>
FeatureVector<T> forward_minimum(const PointCloud<T>& cloud, const Constellation<T>& constellation) {
  require(constellation.measure == Measure::minimum, "forward_minimum: measure is not minimum");
  return run_layer<T, false>(cloud, constellation).features;
}

template <typename T>
FeatureVector<T> forward(const PointCloud<T>& cloud, const Constellation<T>& constellation) {
  return run_layer<T, false>(cloud, constellation).features;
}

template <typename T>
LayerOutput<T> forward_with_jacobian(const PointCloud<T>& cloud, const Constellation<T>& constellation) {
  return run_layer<T, true>(cloud, constellation);
}

template <typename T>
Matrix<T> scale_jacobian(const Matrix<T>& star_jacobian, std::span<const T> upstream) {
  require(upstream.size() == star_jacobian.rows(), "backward: upstream length != star count");
  Matrix<T> grad(star_jacobian.rows(), star_jacobian.cols());
  for (std::size_t i = 0; i < grad.rows(); ++i)
    for (std::size_t k = 0; k < grad.cols(); ++k) grad(i, k) = upstream[i] * star_jacobian(i, k);
  return grad;
}

template <typename T>
Matrix<T> backward(const PointCloud<T>& cloud, const Constellation<T>& constellation,
                   std::span<const T> upstream) {
  require(upstream.size() == constellation.m(), "backward: upstream length != star count");
  return scale_jacobian(run_layer<T, true>(cloud, constellation).star_jacobian, upstream);
}

template <typename T>
Constellation<T> init_constellation(Rng& rng, std::size_t m, std::size_t d, Measure measure, T sigma,
                                    T lambda) {
  require(m >= 1 && d >= 1, "init_constellation: need m >= 1 and d >= 1");
  require(sigma > T{0} && lambda > T{0}, "init_constellation: sigma and lambda must be positive");
  Constellation<T> c;
  c.stars = sample_uniform<T>(rng, T{-1}, T{1}, m, d);
  c.measure = measure;
  c.sigma = sigma;
  c.lambda = lambda;
  return c;
}

#define URSA_INSTANTIATE(T)                                                                      \
  template class PointCloud<T>;                                                                  \
  template FeatureVector<T> forward_gaussian(const PointCloud<T>&, const Constellation<T>&);     \
  template FeatureVector<T> forward_exponential(const PointCloud<T>&, const Constellation<T>&);  \
  template FeatureVector<T> forward_minimum(const PointCloud<T>&, const Constellation<T>&);      \
  template FeatureVector<T> forward(const PointCloud<T>&, const Constellation<T>&);              \
  template LayerOutput<T> forward_with_jacobian(const PointCloud<T>&, const Constellation<T>&);  \
  template Matrix<T> scale_jacobian(const Matrix<T>&, std::span<const T>);                       \
  template Matrix<T> backward(const PointCloud<T>&, const Constellation<T>&, std::span<const T>); \
  template Constellation<T> init_constellation(Rng&, std::size_t, std::size_t, Measure, T, T);

URSA_INSTANTIATE(float)
URSA_INSTANTIATE(double)

#undef URSA_INSTANTIATE

}  // namespace ursa
