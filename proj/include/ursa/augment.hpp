#pragma once

#include <span>

#include "ursa/rng.hpp"
#include "ursa/ursa_layer.hpp"

namespace ursa {

// Training-time perturbation of a cloud, applied in the order
// scale → rotate → shift → jitter. Rotation is one angle in 2-D and three
// Euler angles applied about X, then Y, then Z in 3-D; other dimensions are
// not rotated.
struct AugmentConfig {
  bool enabled = true;
  bool scale = true;
  bool rotate = true;
  bool shift = true;
  bool jitter = true;

  double scale_lo = 0.8;
  double scale_hi = 1.25;
  double rotation_std = 0.06;  // radians, clipped normal
  double rotation_clip = 0.18;
  double shift_range = 0.1;  // uniform in [-range, range) per dimension
  double jitter_std = 0.01;  // per coordinate, clipped normal
  double jitter_clip = 0.05;

  void validate() const;  // throws ConfigError
};

template <typename T>
void apply_scale(PointCloud<T>& cloud, T factor);

// 2-D counter-clockwise rotation by `angle`.
template <typename T>
void apply_rotation_2d(PointCloud<T>& cloud, T angle);

// R = Rz · Ry · Rx, i.e. X rotation first.
template <typename T>
void apply_rotation_3d(PointCloud<T>& cloud, T angle_x, T angle_y, T angle_z);

template <typename T>
void apply_shift(PointCloud<T>& cloud, std::span<const T> offset);

template <typename T>
PointCloud<T> augment(const PointCloud<T>& cloud, const AugmentConfig& cfg, Rng& rng);

}  // namespace ursa
