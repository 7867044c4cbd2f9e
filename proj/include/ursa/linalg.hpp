#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "ursa/error.hpp"

namespace ursa {

// Dense row-major matrix. Vectors are 1×n or n×1 matrices.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, "Matrix: data length != rows * cols");
  }
  Matrix(std::initializer_list<std::initializer_list<T>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  void fill(T value);
  bool all_finite() const;
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// a × b
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);

// a × bᵀ (b stored out×in, as dense weights are)
template <typename T>
Matrix<T> matmul_transpose_b(const Matrix<T>& a, const Matrix<T>& b);

// aᵀ × b
template <typename T>
Matrix<T> matmul_transpose_a(const Matrix<T>& a, const Matrix<T>& b);

template <typename T>
Matrix<T> transpose(const Matrix<T>& a);

// Largest absolute entry.
template <typename T>
T max_abs(const Matrix<T>& a);

// Frobenius norm, accumulated in double.
template <typename T>
double frobenius_norm(const Matrix<T>& a);

template <typename To, typename From>
Matrix<To> cast(const Matrix<From>& a) {
  std::vector<To> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<To>(a[i]);
  return Matrix<To>(a.rows(), a.cols(), std::move(out));
}

extern template class Matrix<float>;
extern template class Matrix<double>;

}  // namespace ursa
