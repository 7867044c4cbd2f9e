#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ursa/rng.hpp"

using namespace ursa;

TEST_CASE("engine is the standard mt19937_64") {
  // 10000th output for the default seed is fixed by the C++ standard.
  Rng rng(5489);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  CHECK(x == 9981545732273789042ULL);
}

TEST_CASE("uniform mean over a million draws") {
  Rng rng(42);
  const auto m = sample_uniform<double>(rng, 0.0, 1.0, 1000, 1000);
  double sum = 0.0;
  for (double v : m.values()) sum += v;
  CHECK(std::abs(sum / 1e6 - 0.5) < 0.01);
}

TEST_CASE("uniform range is half open") {
  Rng rng(3);
  const auto m = sample_uniform<float>(rng, -1.f, 1.f, 500, 200);
  const auto [lo, hi] = std::minmax_element(m.values().begin(), m.values().end());
  CHECK(*lo >= -1.f);
  CHECK(*hi < 1.f);
}

TEST_CASE("fixed seed gives identical matrices") {
  Rng a(9), b(9);
  CHECK(sample_uniform<double>(a, -1.0, 1.0, 7, 5) == sample_uniform<double>(b, -1.0, 1.0, 7, 5));
  CHECK(sample_clipped_normal<float>(a, 0.06f, 0.18f, 7, 5) == sample_clipped_normal<float>(b, 0.06f, 0.18f, 7, 5));
}

TEST_CASE("invalid bounds are contract violations") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_uniform<double>(rng, 1.0, 1.0, 1, 1), ContractViolation);
  CHECK_THROWS_AS(sample_uniform<double>(rng, 2.0, 1.0, 1, 1), ContractViolation);
  CHECK_THROWS_AS(sample_clipped_normal<double>(rng, 0.0, 1.0, 1, 1), ContractViolation);
  CHECK_THROWS_AS(sample_clipped_normal<double>(rng, 0.1, -1.0, 1, 1), ContractViolation);
  CHECK_THROWS_AS(rng.uniform_index(0), ContractViolation);
}

TEST_CASE("clipped normal stays in range") {
  Rng rng(5);
  for (auto [std_dev, clip] : {std::pair{0.06, 0.18}, std::pair{0.01, 0.05}}) {
    const auto m = sample_clipped_normal<double>(rng, std_dev, clip, 1000, 100);
    for (double v : m.values()) {
      CHECK(v >= -clip);
      CHECK(v <= clip);
    }
  }
}

TEST_CASE("clipped normal sample std") {
  Rng rng(17);
  const auto m = sample_clipped_normal<double>(rng, 0.06, 0.18, 1000, 1000);
  double sum = 0.0, sq = 0.0;
  for (double v : m.values()) {
    sum += v;
    sq += v * v;
  }
  const double mean = sum / 1e6;
  const double sd = std::sqrt(sq / 1e6 - mean * mean);
  CHECK(sd >= 0.055);
  CHECK(sd <= 0.065);
}

TEST_CASE("uniform_index covers its range evenly") {
  Rng rng(8);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("shuffle is a permutation and depends on the seed") {
  std::vector<std::size_t> a(100), b(100);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  Rng r1(1), r2(2);
  shuffle(a, r1);
  shuffle(b, r2);
  CHECK(a != b);
  std::vector<std::size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
}

TEST_CASE("derived seeds") {
  CHECK(derive_seed(0xff, 0x0f) == 0xf0);
  CHECK(derive_seed(12345, 0) == 12345);
}
