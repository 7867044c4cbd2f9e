#include "ursa/augment.hpp"

#include <cmath>
#include <vector>

#include "ursa/error.hpp"

namespace ursa {

void AugmentConfig::validate() const {
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi)) throw ConfigError("augmentation scale range must satisfy 0 < lo <= hi");
  if (!(rotation_std > 0.0 && rotation_clip > 0.0)) throw ConfigError("rotation std and clip must be positive");
  if (!(shift_range > 0.0)) throw ConfigError("shift range must be positive");
  if (!(jitter_std > 0.0 && jitter_clip > 0.0)) throw ConfigError("jitter std and clip must be positive");
}

template <typename T>
void apply_scale(PointCloud<T>& cloud, T factor) {
  for (T& v : cloud.points().values()) v *= factor;
}

template <typename T>
void apply_rotation_2d(PointCloud<T>& cloud, T angle) {
  require(cloud.d() == 2, "apply_rotation_2d: cloud is not 2-D");
  const T c = std::cos(angle), s = std::sin(angle);
  auto& pts = cloud.points();
  for (std::size_t j = 0; j < cloud.n(); ++j) {
    const T x = pts(j, 0), y = pts(j, 1);
    pts(j, 0) = c * x - s * y;
    pts(j, 1) = s * x + c * y;
  }
}

template <typename T>
void apply_rotation_3d(PointCloud<T>& cloud, T angle_x, T angle_y, T angle_z) {
  require(cloud.d() == 3, "apply_rotation_3d: cloud is not 3-D");
  const T cx = std::cos(angle_x), sx = std::sin(angle_x);
  const T cy = std::cos(angle_y), sy = std::sin(angle_y);
  const T cz = std::cos(angle_z), sz = std::sin(angle_z);
  const Matrix<T> rx{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}};
  const Matrix<T> ry{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}};
  const Matrix<T> rz{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}};
  const Matrix<T> r = matmul(rz, matmul(ry, rx));
  // Points are rows, so p' = p Rᵀ.
  cloud.points() = matmul_transpose_b(cloud.points(), r);
}

template <typename T>
void apply_shift(PointCloud<T>& cloud, std::span<const T> offset) {
  require(offset.size() == cloud.d(), "apply_shift: offset dimension mismatch");
  auto& pts = cloud.points();
  for (std::size_t j = 0; j < cloud.n(); ++j)
    for (std::size_t k = 0; k < cloud.d(); ++k) pts(j, k) += offset[k];
}

template <typename T>
PointCloud<T> augment(const PointCloud<T>& cloud, const AugmentConfig& cfg, Rng& rng) {
  PointCloud<T> out = cloud;
  if (!cfg.enabled) return out;
  cfg.validate();
  if (cfg.scale) {
    const double s = cfg.scale_lo < cfg.scale_hi ? rng.uniform(cfg.scale_lo, cfg.scale_hi) : cfg.scale_lo;
    apply_scale(out, static_cast<T>(s));
  }
  if (cfg.rotate) {
    if (out.d() == 2) {
      apply_rotation_2d(out, static_cast<T>(rng.clipped_normal(cfg.rotation_std, cfg.rotation_clip)));
    } else if (out.d() == 3) {
      const auto ax = static_cast<T>(rng.clipped_normal(cfg.rotation_std, cfg.rotation_clip));
      const auto ay = static_cast<T>(rng.clipped_normal(cfg.rotation_std, cfg.rotation_clip));
      const auto az = static_cast<T>(rng.clipped_normal(cfg.rotation_std, cfg.rotation_clip));
      apply_rotation_3d(out, ax, ay, az);
    }
  }
  if (cfg.shift) {
    std::vector<T> offset(out.d());
    for (T& o : offset) o = static_cast<T>(rng.uniform(-cfg.shift_range, cfg.shift_range));
    apply_shift<T>(out, offset);
  }
  if (cfg.jitter) {
    for (T& v : out.points().values())
      v += static_cast<T>(rng.clipped_normal(cfg.jitter_std, cfg.jitter_clip));
  }
  return out;
}

#define URSA_INSTANTIATE(T)                                             \
  template void apply_scale(PointCloud<T>&, T);                         \
  template void apply_rotation_2d(PointCloud<T>&, T);                   \
  template void apply_rotation_3d(PointCloud<T>&, T, T, T);             \
  template void apply_shift(PointCloud<T>&, std::span<const T>);        \
  template PointCloud<T> augment(const PointCloud<T>&, const AugmentConfig&, Rng&);

URSA_INSTANTIATE(float)
URSA_INSTANTIATE(double)

#undef URSA_INSTANTIATE

}  // namespace ursa
