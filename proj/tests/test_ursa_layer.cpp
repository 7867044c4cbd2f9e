#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "ursa/ursa_layer.hpp"

using namespace ursa;

namespace {

PointCloud<double> cloud_of(std::initializer_list<std::initializer_list<double>> rows) {
  return PointCloud<double>(Matrix<double>(rows));
}

Constellation<double> stars_of(std::initializer_list<std::initializer_list<double>> rows, Measure measure,
                               double sigma = 0.1, double lambda = 10.0) {
  Constellation<double> c;
  c.stars = Matrix<double>(rows);
  c.measure = measure;
  c.sigma = sigma;
  c.lambda = lambda;
  return c;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

// Scalar loss L = Σ wᵢ vᵢ differentiated by central differences.
Matrix<double> numeric_star_gradient(const PointCloud<double>& cloud, Constellation<double> c,
                                     const std::vector<double>& w, double h) {
  Matrix<double> g(c.m(), c.d());
  auto loss = [&](const Constellation<double>& cc) {
    const auto v = forward(cloud, cc);
    return std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
  };
  for (std::size_t i = 0; i < c.m(); ++i)
    for (std::size_t k = 0; k < c.d(); ++k) {
      const double orig = c.stars(i, k);
      c.stars(i, k) = orig + h;
      const double up = loss(c);
      c.stars(i, k) = orig - h;
      const double down = loss(c);
      c.stars(i, k) = orig;
      g(i, k) = (up - down) / (2 * h);
    }
  return g;
}

}  // namespace

TEST_CASE("gaussian scalar cases") {
  CHECK(forward_gaussian(cloud_of({{0, 0}}), stars_of({{0, 0}}, Measure::gaussian))[0] == 1.0);
  CHECK(forward_gaussian(cloud_of({{0.1, 0}}), stars_of({{0, 0}}, Measure::gaussian))[0] ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(forward_gaussian(cloud_of({{0.1, 0}}), stars_of({{0, 0}}, Measure::gaussian))[0] ==
        doctest::Approx(0.60653).epsilon(1e-5));
  CHECK(forward_gaussian(cloud_of({{0.3, -0.2}, {0.3, -0.2}, {0.3, -0.2}, {0.3, -0.2}}),
                         stars_of({{0.3, -0.2}}, Measure::gaussian))[0] == 4.0);
}

TEST_CASE("exponential scalar cases") {
  CHECK(forward_exponential(cloud_of({{0, 0}}), stars_of({{0, 0}}, Measure::exponential))[0] == 1.0);
  CHECK(forward_exponential(cloud_of({{0.1, 0}}), stars_of({{0, 0}}, Measure::exponential))[0] ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(forward_exponential(cloud_of({{0.1, 0}}), stars_of({{0, 0}}, Measure::exponential))[0] ==
        doctest::Approx(0.36788).epsilon(1e-5));
  CHECK(forward_exponential(cloud_of({{0.1, 0}, {0, -0.1}}), stars_of({{0, 0}}, Measure::exponential))[0] ==
        doctest::Approx(2 * std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("minimum scalar cases") {
  CHECK(forward_minimum(cloud_of({{1, 0}, {0, 2}}), stars_of({{0, 0}}, Measure::minimum))[0] == 1.0);
  const auto v = forward_minimum(cloud_of({{0.5, 0.5}, {-0.25, 0.75}, {0.9, -0.1}}),
                                 stars_of({{3, 3}, {-0.25, 0.75}}, Measure::minimum));
  CHECK(v[1] == 0.0);
}

TEST_CASE("minimum matches the exhaustive distance table") {
  Rng rng(21);
  const PointCloud<double> cloud(sample_uniform<double>(rng, -1.0, 1.0, 100, 3));
  Constellation<double> c = init_constellation<double>(rng, 16, 3, Measure::minimum);
  const auto v = forward_minimum(cloud, c);
  for (std::size_t i = 0; i < 16; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < 100; ++j) best = std::min(best, distance(cloud.point(j), c.stars.row(i)));
    CHECK(v[i] == best);
  }
}

TEST_CASE("gaussian and exponential match a direct double sum") {
  Rng rng(22);
  const PointCloud<double> cloud(sample_uniform<double>(rng, -1.0, 1.0, 50, 3));
  for (Measure measure : {Measure::gaussian, Measure::exponential}) {
    Constellation<double> c = init_constellation<double>(rng, 9, 3, measure, 0.4, 3.0);
    const auto v = forward(cloud, c);
    for (std::size_t i = 0; i < 9; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 50; ++j) {
        const double r = distance(cloud.point(j), c.stars.row(i));
        s += measure == Measure::gaussian ? std::exp(-r * r / (2 * 0.4 * 0.4)) : std::exp(-3.0 * r);
      }
      CHECK(v[i] == doctest::Approx(s).epsilon(1e-12));
    }
  }
}

TEST_CASE("forward with jacobian agrees with forward") {
  Rng rng(23);
  const PointCloud<float> cloud(sample_uniform<float>(rng, -1.f, 1.f, 40, 2));
  for (Measure measure : {Measure::gaussian, Measure::exponential, Measure::minimum}) {
    const auto c = init_constellation<float>(rng, 12, 2, measure);
    const auto plain = forward(cloud, c);
    const auto both = forward_with_jacobian(cloud, c);
    CHECK(both.features == plain);
    CHECK(both.star_jacobian.rows() == 12);
    CHECK(both.star_jacobian.cols() == 2);
  }
}

TEST_CASE("dimension mismatch and wrong measure are contract violations") {
  const auto cloud = cloud_of({{0, 0, 0}});
  CHECK_THROWS_AS(forward(cloud, stars_of({{0, 0}}, Measure::gaussian)), ContractViolation);
  CHECK_THROWS_AS(forward_minimum(cloud_of({{0, 0}}), stars_of({{0, 0}}, Measure::gaussian)), ContractViolation);
  const auto c = stars_of({{0, 0}, {1, 1}}, Measure::gaussian);
  const std::vector<double> upstream(3, 1.0);
  CHECK_THROWS_AS(backward(cloud_of({{0, 0}}), c, std::span<const double>(upstream)), ContractViolation);
  CHECK_THROWS_AS(PointCloud<double>(Matrix<double>(0, 2)), ContractViolation);
  CHECK_THROWS_AS(cloud_of({{std::nan(""), 0}}), ContractViolation);
}

TEST_CASE("zero upstream gives zero star gradient") {
  Rng rng(24);
  const PointCloud<double> cloud(sample_uniform<double>(rng, -1.0, 1.0, 10, 3));
  for (Measure measure : {Measure::gaussian, Measure::exponential, Measure::minimum}) {
    const auto c = init_constellation<double>(rng, 5, 3, measure);
    const std::vector<double> zero(5, 0.0);
    const auto g = backward(cloud, c, std::span<const double>(zero));
    CHECK(max_abs(g) == 0.0);
  }
}

TEST_CASE("gaussian single point single star matches central difference") {
  const auto cloud = cloud_of({{0.13}});
  const auto c = stars_of({{-0.04}}, Measure::gaussian);
  const std::vector<double> w{1.0};
  const auto g = backward(cloud, c, std::span<const double>(w));
  const auto n = numeric_star_gradient(cloud, c, w, 1e-5);
  CHECK(std::abs(g[0] - n[0]) / std::abs(n[0]) <= 1e-6);
}

TEST_CASE("all measures match central differences away from kinks") {
  Rng rng(25);
  const PointCloud<double> cloud(sample_uniform<double>(rng, -1.0, 1.0, 7, 3));
  for (Measure measure : {Measure::gaussian, Measure::exponential, Measure::minimum}) {
    const auto c = init_constellation<double>(rng, 4, 3, measure, 0.5, 2.0);
    std::vector<double> w(4);
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    const auto g = backward(cloud, c, std::span<const double>(w));
    const auto n = numeric_star_gradient(cloud, c, w, 1e-6);
    const double scale = std::max(max_abs(g), max_abs(n));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i] - n[i]) / scale <= 1e-6);
  }
}

TEST_CASE("minimum gradient is the unit vector from the nearest point to the star") {
  const auto cloud = cloud_of({{0.0, 0.0}, {2.0, 2.0}});
  const auto c = stars_of({{0.3, 0.4}}, Measure::minimum);
  const std::vector<double> w{1.0};
  const auto g = backward(cloud, c, std::span<const double>(w));
  CHECK(g(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(g(0, 1) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("coincident points contribute no gradient") {
  const auto cloud = cloud_of({{0.2, 0.2}, {0.9, -0.4}});
  const std::vector<double> w{1.0};
  const auto gm = backward(cloud, stars_of({{0.2, 0.2}}, Measure::minimum), std::span<const double>(w));
  CHECK(max_abs(gm) == 0.0);
  const auto ge = backward(cloud, stars_of({{0.2, 0.2}}, Measure::exponential, 0.1, 1.0),
                           std::span<const double>(w));
  CHECK(ge.all_finite());
  // Only the far point contributes: λ e^{-λr} (p - q)/r.
  const double r = std::hypot(0.7, -0.6);
  CHECK(ge(0, 0) == doctest::Approx(std::exp(-r) * 0.7 / r).epsilon(1e-12));
}

TEST_CASE("minimum ties go to the lowest point index") {
  const auto cloud = cloud_of({{1.0, 0.0}, {0.0, 1.0}});
  const auto c = stars_of({{0.0, 0.0}}, Measure::minimum);
  const std::vector<double> w{1.0};
  const auto g = backward(cloud, c, std::span<const double>(w));
  CHECK(g(0, 0) == -1.0);
  CHECK(g(0, 1) == 0.0);
}

TEST_CASE("constellation initialisation") {
  Rng rng(26);
  const auto c = init_constellation<float>(rng, 512, 3, Measure::gaussian);
  CHECK(c.parameter_count() == 1536);
  for (float v : c.stars.values()) {
    CHECK(v >= -1.f);
    CHECK(v <= 1.f);
  }
  Rng a(4), b(4);
  CHECK(init_constellation<double>(a, 8, 2, Measure::minimum).stars ==
        init_constellation<double>(b, 8, 2, Measure::minimum).stars);
  Rng s(5);
  const auto one = init_constellation<double>(s, 1, 2, Measure::exponential);
  CHECK(one.stars.rows() == 1);
  CHECK(one.stars.cols() == 2);
  CHECK(std::abs(one.stars(0, 0)) <= 1.0);
  CHECK(std::abs(one.stars(0, 1)) <= 1.0);
}

TEST_CASE("measure names round trip") {
  for (Measure m : {Measure::gaussian, Measure::exponential, Measure::minimum}) CHECK(parse_measure(to_string(m)) == m);
  CHECK_THROWS_AS(parse_measure("cosine"), ConfigError);
}
