#include <cmath>

#include "doctest.h"
#include "ursa/linalg.hpp"
#include "ursa/rng.hpp"

using namespace ursa;

namespace {

template <typename T>
Matrix<T> triple_loop(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      T s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

}  // namespace

TEST_CASE("identity times A is A") {
  const Matrix<double> a{{1, 2, 3}, {4, 5, 6}};
  CHECK(matmul(Matrix<double>::identity(2), a) == a);
  CHECK(matmul(a, Matrix<double>::identity(3)) == a);
}

TEST_CASE("hand-checked 2x2 product") {
  const Matrix<double> a{{1, 2}, {3, 4}};
  const Matrix<double> b{{1}, {1}};
  const Matrix<double> expected{{3}, {7}};
  CHECK(matmul(a, b) == expected);
}

TEST_CASE("random products match the triple loop") {
  Rng rng(7);
  const auto a = sample_uniform<double>(rng, -1.0, 1.0, 5, 4);
  const auto b = sample_uniform<double>(rng, -1.0, 1.0, 4, 3);
  const auto c = matmul(a, b);
  const auto oracle = triple_loop(a, b);
  REQUIRE(c.rows() == 5);
  REQUIRE(c.cols() == 3);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(oracle[i]).epsilon(1e-14));

  const auto bt = transpose(b);
  const auto c2 = matmul_transpose_b(a, bt);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c2[i] == doctest::Approx(oracle[i]).epsilon(1e-14));

  const auto at = transpose(a);
  const auto c3 = matmul_transpose_a(at, b);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c3[i] == doctest::Approx(oracle[i]).epsilon(1e-14));
}

TEST_CASE("larger float products match the triple loop") {
  Rng rng(11);
  const auto a = sample_uniform<float>(rng, -1.f, 1.f, 33, 70);
  const auto b = sample_uniform<float>(rng, -1.f, 1.f, 70, 17);
  const auto c = matmul(a, b);
  const auto oracle = triple_loop(a, b);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(c[i] - oracle[i]) < 1e-4f);
}

TEST_CASE("dimension mismatch is a contract violation") {
  const Matrix<double> a(2, 3), b(2, 3);
  CHECK_THROWS_AS(matmul(a, b), ContractViolation);
  CHECK_THROWS_AS(matmul_transpose_b(a, Matrix<double>(3, 2)), ContractViolation);
  CHECK_THROWS_AS(matmul_transpose_a(a, Matrix<double>(3, 2)), ContractViolation);
  CHECK_THROWS_AS((Matrix<double>(2, 2, std::vector<double>(3))), ContractViolation);
}

TEST_CASE("norms and finiteness") {
  Matrix<double> a{{3, -4}, {0, 0}};
  CHECK(frobenius_norm(a) == 5.0);
  CHECK(max_abs(a) == 4.0);
  CHECK(a.all_finite());
  a(1, 1) = std::nan("");
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("transpose and cast") {
  const Matrix<double> a{{1, 2, 3}, {4, 5, 6}};
  const auto t = transpose(a);
  CHECK(t.rows() == 3);
  CHECK(t(2, 1) == 6.0);
  CHECK(transpose(t) == a);
  const auto f = cast<float>(a);
  CHECK(f(1, 0) == 4.0f);
}
