#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "ursa/gradient_check.hpp"

using namespace ursa;

namespace {

GradCheckInstance instance(Measure measure, std::uint64_t seed, std::size_t dim = 2) {
  InstanceSpec spec;
  spec.measure = measure;
  spec.dim = dim;
  return make_random_instance(seed, spec);
}

}  // namespace

TEST_CASE("gaussian random small model passes") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = instance(Measure::gaussian, seed, 2 + seed % 2);
    const auto r = gradient_check(inst.model, inst.clouds, inst.labels);
    CHECK(r.passed);
    CHECK(r.max_rel_error <= 1e-4);
    CHECK(r.excluded == 0);
  }
}

TEST_CASE("exponential with a coincident point-star pair excludes it and passes the rest") {
  auto inst = instance(Measure::exponential, 11);
  auto& pts = inst.clouds[0].points();
  for (std::size_t k = 0; k < 2; ++k) pts(0, k) = inst.model.constellation.stars(0, k);
  const auto r = gradient_check(inst.model, inst.clouds, inst.labels);
  CHECK(r.excluded >= 1);
  CHECK(r.passed);
  const auto singular = singular_stars(inst.model.constellation, inst.clouds, 1e-6);
  CHECK(singular[0]);
}

TEST_CASE("minimum with unique argmins passes") {
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    const auto inst = instance(Measure::minimum, seed, 3);
    const auto singular = singular_stars(inst.model.constellation, inst.clouds, 1e-6);
    CHECK(std::count(singular.begin(), singular.end(), true) == 0);
    const auto r = gradient_check(inst.model, inst.clouds, inst.labels);
    CHECK(r.passed);
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("minimum argmin tie is flagged") {
  auto inst = instance(Measure::minimum, 30);
  auto& pts = inst.clouds[1].points();
  const auto& stars = inst.model.constellation.stars;
  pts(0, 0) = stars(2, 0) + 0.01;
  pts(0, 1) = stars(2, 1);
  pts(1, 0) = stars(2, 0) - 0.01;
  pts(1, 1) = stars(2, 1);
  const auto singular = singular_stars(inst.model.constellation, inst.clouds, 1e-6);
  CHECK(singular[2]);
  const auto r = gradient_check(inst.model, inst.clouds, inst.labels);
  CHECK(r.excluded >= 2);
  CHECK(r.passed);
}

TEST_CASE("a corrupted gradient is detected") {
  // A huge finite-difference step breaks agreement.
  const auto inst = instance(Measure::gaussian, 40);
  GradCheckOptions opts;
  opts.step = 0.3;
  const auto r = gradient_check(inst.model, inst.clouds, inst.labels, opts);
  CHECK_FALSE(r.passed);
  std::ostringstream out;
  r.print(out);
  CHECK(out.str().find("stars") != std::string::npos);
}

TEST_CASE("instances are reproducible") {
  const auto a = instance(Measure::exponential, 50);
  const auto b = instance(Measure::exponential, 50);
  CHECK(a.model.constellation.stars == b.model.constellation.stars);
  CHECK(a.clouds[2].points() == b.clouds[2].points());
  CHECK(a.labels == b.labels);
}
