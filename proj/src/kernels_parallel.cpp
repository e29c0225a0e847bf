#include <omp.h>

#include <cstdint>

#include "kernels_common.hpp"
#include "nopeek/kernels.hpp"

namespace nopeek::kernels::parallel {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1u << 15;

bool worth_it(std::size_t work) { return work >= kParallelWork && omp_get_max_threads() > 1; }

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::check_inner(a.cols(), b.rows(), a, b, "matmul");
  Matrix c(a.rows(), b.cols());
  const auto n = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static) if (worth_it(a.rows() * a.cols() * b.cols()))
  for (std::int64_t i = 0; i < n; ++i) detail::matmul_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  detail::check_inner(a.rows(), b.rows(), a, b, "matmul_tn");
  Matrix c(a.cols(), b.cols());
  const auto n = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static) if (worth_it(a.rows() * a.cols() * b.cols()))
  for (std::int64_t i = 0; i < n; ++i) detail::matmul_tn_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  detail::check_inner(a.cols(), b.cols(), a, b, "matmul_nt");
  Matrix c(a.rows(), b.rows());
  const auto n = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static) if (worth_it(a.rows() * a.cols() * b.rows()))
  for (std::int64_t i = 0; i < n; ++i) detail::matmul_nt_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix pairwise_sq_dist(const Matrix& x) {
  Matrix d(x.rows(), x.rows());
  const auto n = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(static) if (worth_it(x.rows() * x.rows() * x.cols()))
  for (std::int64_t i = 0; i < n; ++i) detail::sq_dist_row(x, d, static_cast<std::size_t>(i));
  return d;
}

Matrix double_center(const Matrix& d) {
  require(d.rows() == d.cols(), ErrorCode::kDimension, "double_center: non-square " + d.shape_string());
  const std::size_t n = d.rows();
  const auto sn = static_cast<std::int64_t>(n);
  const bool par = worth_it(n * n);
  std::vector<double> rmean(n), cmean(n);
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < sn; ++i) rmean[static_cast<std::size_t>(i)] = detail::row_mean(d, static_cast<std::size_t>(i));
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t j = 0; j < sn; ++j) cmean[static_cast<std::size_t>(j)] = detail::col_mean(d, static_cast<std::size_t>(j));
  const double g = detail::grand_mean(d);
  Matrix out(n, n);
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t ii = 0; ii < sn; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = d(i, j) - rmean[i] - cmean[j] + g;
  }
  return out;
}

}  // namespace nopeek::kernels::parallel
