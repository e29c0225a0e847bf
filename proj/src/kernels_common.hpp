#pragma once

#include <string>

#include "nopeek/errors.hpp"
#include "nopeek/matrix.hpp"

namespace nopeek::kernels::detail {

inline void check_inner(std::size_t lhs, std::size_t rhs, const Matrix& a, const Matrix& b,
                        const char* op) {
  require(lhs == rhs, ErrorCode::kDimension,
          std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
}

// Per-element bodies shared by both variants so the summation order is
// identical by construction.

inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  double* out = c.row(i).data();
  for (std::size_t k = 0; k < inner; ++k) {
    const double aik = a(i, k);
    if (aik == 0.0) continue;
    const double* brow = b.row(k).data();
    for (std::size_t j = 0; j < m; ++j) out[j] += aik * brow[j];
  }
}

inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t inner = a.rows();
  const std::size_t m = b.cols();
  double* out = c.row(i).data();
  for (std::size_t k = 0; k < inner; ++k) {
    const double aki = a(k, i);
    if (aki == 0.0) continue;
    const double* brow = b.row(k).data();
    for (std::size_t j = 0; j < m; ++j) out[j] += aki * brow[j];
  }
}

inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t inner = a.cols();
  const double* arow = a.row(i).data();
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double* brow = b.row(j).data();
    double s = 0.0;
    for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
    c(i, j) = s;
  }
}

inline void sq_dist_row(const Matrix& x, Matrix& d, std::size_t i) {
  const std::size_t dim = x.cols();
  const double* xi = x.row(i).data();
  for (std::size_t j = 0; j < x.rows(); ++j) {
    if (j == i) {
      d(i, j) = 0.0;
      continue;
    }
    const double* xj = x.row(j).data();
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = xi[k] - xj[k];
      s += diff * diff;
    }
    d(i, j) = s;
  }
}

inline double row_mean(const Matrix& d, std::size_t i) {
  double s = 0.0;
  for (std::size_t j = 0; j < d.cols(); ++j) s += d(i, j);
  return s / static_cast<double>(d.cols());
}

inline double col_mean(const Matrix& d, std::size_t j) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.rows(); ++i) s += d(i, j);
  return s / static_cast<double>(d.rows());
}

inline double grand_mean(const Matrix& d) {
  double s = 0.0;
  for (double v : d.data()) s += v;
  return s / static_cast<double>(d.size());
}

}  // namespace nopeek::kernels::detail
