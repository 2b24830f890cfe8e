#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "urasim/errors.hpp"

namespace urasim {

using cplx = std::complex<double>;

/// Dense row-major matrix. Deliberately thin: the numerical modules keep
/// their update loops explicit, this only owns storage and shape.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T value = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T value) { data_.assign(data_.size(), value); }

  bool all_finite() const {
    for (const T& v : data_) {
      if constexpr (std::is_same_v<T, cplx>) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
      } else {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const T& v : data_) s += std::norm(v);
    return s;
  }
  double frobenius_norm() const { return std::sqrt(squared_norm()); }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using ComplexMatrix = Matrix<cplx>;
using RealMatrix = Matrix<double>;

inline void require_shape(const ComplexMatrix& m, std::size_t rows, std::size_t cols,
                          const char* name) {
  if (m.rows() != rows || m.cols() != cols)
    throw DimensionError(std::string(name) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
}

/// a * b
inline ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()));
  ComplexMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      if (aik == cplx{}) continue;
      const cplx* brow = b.row(k).data();
      cplx* orow = out.row(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

/// a^H * b
inline ComplexMatrix adjoint_matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows())
    throw DimensionError("adjoint_matmul: inner dimensions " + std::to_string(a.rows()) +
                         " vs " + std::to_string(b.rows()));
  ComplexMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const cplx* arow = a.row(k).data();
    const cplx* brow = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const cplx c = std::conj(arow[i]);
      cplx* orow = out.row(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += c * brow[j];
    }
  }
  return out;
}

inline ComplexMatrix conj_transpose(const ComplexMatrix& a) {
  ComplexMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = std::conj(a(i, j));
  return out;
}

/// <a, b> = sum conj(a_ij) b_ij
inline cplx inner_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("inner_product: shape mismatch");
  cplx s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a.data()[i]) * b.data()[i];
  return s;
}

}  // namespace urasim
