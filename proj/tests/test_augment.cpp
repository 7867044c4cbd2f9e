#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ursa/augment.hpp"

using namespace ursa;

namespace {

PointCloud<double> random_cloud(std::uint64_t seed, std::size_t n, std::size_t d) {
  Rng rng(seed);
  return PointCloud<double>(sample_uniform<double>(rng, -1.0, 1.0, n, d));
}

AugmentConfig only(bool scale, bool rotate, bool shift, bool jitter) {
  AugmentConfig cfg;
  cfg.scale = scale;
  cfg.rotate = rotate;
  cfg.shift = shift;
  cfg.jitter = jitter;
  return cfg;
}

double norm(std::span<const double> p) {
  double s = 0.0;
  for (double x : p) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("disabled augmentation is the identity") {
  const auto cloud = random_cloud(1, 30, 3);
  AugmentConfig cfg;
  cfg.enabled = false;
  Rng rng(2);
  CHECK(augment(cloud, cfg, rng).points() == cloud.points());
}

TEST_CASE("scale forced to one is the identity") {
  const auto cloud = random_cloud(3, 30, 2);
  auto cfg = only(true, false, false, false);
  cfg.scale_lo = cfg.scale_hi = 1.0;
  Rng rng(4);
  CHECK(augment(cloud, cfg, rng).points() == cloud.points());
}

TEST_CASE("2-D rotation by a forced angle preserves norms") {
  auto cloud = random_cloud(5, 50, 2);
  const auto original = cloud;
  apply_rotation_2d(cloud, 0.7);
  for (std::size_t j = 0; j < 50; ++j) CHECK(std::abs(norm(cloud.point(j)) - norm(original.point(j))) <= 1e-6);
  PointCloud<double> unit(Matrix<double>{{1.0, 0.0}});
  apply_rotation_2d(unit, std::numbers::pi / 2);
  CHECK(unit.points()(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(unit.points()(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("3-D rotation applies X then Y then Z") {
  PointCloud<double> p(Matrix<double>{{0.0, 1.0, 0.0}});
  // Rx(90°) sends y to z; Ry(90°) then sends z to x; Rz(0) leaves it.
  apply_rotation_3d(p, std::numbers::pi / 2, std::numbers::pi / 2, 0.0);
  CHECK(p.points()(0, 0) == doctest::Approx(1.0));
  CHECK(std::abs(p.points()(0, 1)) < 1e-12);
  CHECK(std::abs(p.points()(0, 2)) < 1e-12);
  auto cloud = random_cloud(6, 40, 3);
  const auto original = cloud;
  apply_rotation_3d(cloud, 0.1, -0.17, 0.05);
  for (std::size_t j = 0; j < 40; ++j) CHECK(std::abs(norm(cloud.point(j)) - norm(original.point(j))) <= 1e-12);
}

TEST_CASE("random rotation stays within the clip and preserves norms") {
  const auto cloud = random_cloud(7, 20, 2);
  const auto cfg = only(false, true, false, false);
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(s);
    const auto out = augment(cloud, cfg, rng);
    for (std::size_t j = 0; j < 20; ++j) {
      CHECK(std::abs(norm(out.point(j)) - norm(cloud.point(j))) <= 1e-12);
      const double a0 = std::atan2(cloud.points()(j, 1), cloud.points()(j, 0));
      const double a1 = std::atan2(out.points()(j, 1), out.points()(j, 0));
      double delta = std::remainder(a1 - a0, 2 * std::numbers::pi);
      CHECK(std::abs(delta) <= 0.18 + 1e-9);
    }
  }
}

TEST_CASE("scale, shift and jitter ranges") {
  const auto cloud = random_cloud(8, 25, 3);
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(s);
    const auto scaled = augment(cloud, only(true, false, false, false), rng);
    const double factor = scaled.points()(0, 0) / cloud.points()(0, 0);
    CHECK(factor >= 0.8 - 1e-12);
    CHECK(factor <= 1.25 + 1e-12);
    for (std::size_t i = 0; i < cloud.points().size(); ++i)
      CHECK(scaled.points()[i] == doctest::Approx(cloud.points()[i] * factor).epsilon(1e-12));

    Rng rng2(s);
    const auto shifted = augment(cloud, only(false, false, true, false), rng2);
    for (std::size_t k = 0; k < 3; ++k) {
      const double offset = shifted.points()(0, k) - cloud.points()(0, k);
      CHECK(std::abs(offset) <= 0.1);
      for (std::size_t j = 1; j < 25; ++j)
        CHECK(shifted.points()(j, k) - cloud.points()(j, k) == doctest::Approx(offset).epsilon(1e-12));
    }

    Rng rng3(s);
    const auto jittered = augment(cloud, only(false, false, false, true), rng3);
    for (std::size_t i = 0; i < cloud.points().size(); ++i)
      CHECK(std::abs(jittered.points()[i] - cloud.points()[i]) <= 0.05 + 1e-12);
  }
}

TEST_CASE("augmentation is deterministic per seed and keeps the shape") {
  const auto cloud = random_cloud(9, 60, 3);
  AugmentConfig cfg;
  Rng a(10), b(10), c(11);
  const auto x = augment(cloud, cfg, a);
  CHECK(x.points() == augment(cloud, cfg, b).points());
  CHECK(x.points() != augment(cloud, cfg, c).points());
  CHECK(x.n() == 60);
  CHECK(x.d() == 3);
}

TEST_CASE("invalid augmentation settings") {
  AugmentConfig cfg;
  cfg.scale_lo = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AugmentConfig{};
  cfg.jitter_clip = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
