#include "kernels_common.hpp"
#include "nopeek/kernels.hpp"

namespace nopeek::kernels::serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::check_inner(a.cols(), b.rows(), a, b, "matmul");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) detail::matmul_row(a, b, c, i);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  detail::check_inner(a.rows(), b.rows(), a, b, "matmul_tn");
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) detail::matmul_tn_row(a, b, c, i);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  detail::check_inner(a.cols(), b.cols(), a, b, "matmul_nt");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) detail::matmul_nt_row(a, b, c, i);
  return c;
}

Matrix pairwise_sq_dist(const Matrix& x) {
  Matrix d(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) detail::sq_dist_row(x, d, i);
  return d;
}

Matrix double_center(const Matrix& d) {
  require(d.rows() == d.cols(), ErrorCode::kDimension, "double_center: non-square " + d.shape_string());
  const std::size_t n = d.rows();
  std::vector<double> rmean(n), cmean(n);
  for (std::size_t i = 0; i < n; ++i) rmean[i] = detail::row_mean(d, i);
  for (std::size_t j = 0; j < n; ++j) cmean[j] = detail::col_mean(d, j);
  const double g = detail::grand_mean(d);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = d(i, j) - rmean[i] - cmean[j] + g;
  return out;
}

}  // namespace nopeek::kernels::serial
