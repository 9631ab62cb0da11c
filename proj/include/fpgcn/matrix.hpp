#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fpgcn/common.hpp"

namespace fpgcn {

// Row-major dense matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

  std::vector<double> &data() noexcept { return data_; }
  const std::vector<double> &data() const noexcept { return data_; }

  bool operator==(const Matrix &) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix matmul(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.rows())
    throw ValidationError("matrix dimension mismatch");
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  Matrix out(n, m);
  const double *pa = a.data().data();
  const double *pb = b.data().data();
  double *po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double *__restrict row = po + i * m;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = pa[i * inner + k];
      if (aik == 0.0)
        continue;
      const double *__restrict brow = pb + k * m;
      for (std::size_t j = 0; j < m; ++j)
        row[j] += aik * brow[j];
    }
  }
  return out;
}

// aᵀ b
inline Matrix matmul_tn(const Matrix &a, const Matrix &b) {
  if (a.rows() != b.rows())
    throw ValidationError("matrix dimension mismatch");
  const std::size_t n = a.rows(), p = a.cols(), m = b.cols();
  Matrix out(p, m);
  const double *pa = a.data().data();
  const double *pb = b.data().data();
  double *po = out.data().data();
  for (std::size_t k = 0; k < n; ++k) {
    const double *__restrict brow = pb + k * m;
    for (std::size_t i = 0; i < p; ++i) {
      const double aki = pa[k * p + i];
      if (aki == 0.0)
        continue;
      double *__restrict row = po + i * m;
      for (std::size_t j = 0; j < m; ++j)
        row[j] += aki * brow[j];
    }
  }
  return out;
}

// a bᵀ
inline Matrix matmul_nt(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.cols())
    throw ValidationError("matrix dimension mismatch");
  const std::size_t n = a.rows(), inner = a.cols(), m = b.rows();
  Matrix out(n, m);
  const double *pa = a.data().data();
  const double *pb = b.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double *__restrict arow = pa + i * inner;
    for (std::size_t j = 0; j < m; ++j) {
      const double *__restrict brow = pb + j * inner;
      double sum = 0;
      for (std::size_t k = 0; k < inner; ++k)
        sum += arow[k] * brow[k];
      out(i, j) = sum;
    }
  }
  return out;
}

} // namespace fpgcn
