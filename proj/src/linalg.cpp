#include "ursa/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace ursa {

template <typename T>
Matrix<T>::Matrix(std::initializer_list<std::initializer_list<T>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, "Matrix: ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

template <typename T>
Matrix<T> Matrix<T>::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
  return m;
}

template <typename T>
void Matrix<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool Matrix<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.cols() == b.rows(), "matmul: a.cols != b.rows");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix<T> out(n, m);
  // i-k-j order keeps the inner loop contiguous in both b and out.
  for (std::size_t i = 0; i < n; ++i) {
    T* o = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a(i, p);
      const T* br = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

template <typename T>
Matrix<T> matmul_transpose_b(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.cols() == b.cols(), "matmul_transpose_b: a.cols != b.cols");
  // Row-by-row dot products would not vectorize without reassociation;
  // transposing b once keeps the contiguous i-k-j kernel.
  return matmul(a, transpose(b));
}

template <typename T>
Matrix<T> matmul_transpose_a(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.rows() == b.rows(), "matmul_transpose_a: a.rows != b.rows");
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  Matrix<T> out(n, m);
  for (std::size_t p = 0; p < k; ++p) {
    const T* ar = a.data() + p * n;
    const T* br = b.data() + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const T av = ar[i];
      T* o = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

template <typename T>
T max_abs(const Matrix<T>& a) {
  T best{0};
  for (T v : a.values()) best = std::max(best, std::abs(v));
  return best;
}

template <typename T>
double frobenius_norm(const Matrix<T>& a) {
  double acc = 0.0;
  for (T v : a.values()) acc += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(acc);
}

template class Matrix<float>;
template class Matrix<double>;

#define URSA_INSTANTIATE(T)                                                  \
  template Matrix<T> matmul(const Matrix<T>&, const Matrix<T>&);             \
  template Matrix<T> matmul_transpose_b(const Matrix<T>&, const Matrix<T>&); \
  template Matrix<T> matmul_transpose_a(const Matrix<T>&, const Matrix<T>&); \
  template Matrix<T> transpose(const Matrix<T>&);                            \
  template T max_abs(const Matrix<T>&);                                      \
  template double frobenius_norm(const Matrix<T>&);

URSA_INSTANTIATE(float)
URSA_INSTANTIATE(double)

#undef URSA_INSTANTIATE

}  // namespace ursa
