#include "nopeek/depmeasure.hpp"

#include <algorithm>
#include <cmath>

#include "nopeek/errors.hpp"
#include "nopeek/kernels.hpp"

namespace nopeek {

namespace {

void check_pair(const Matrix& x, const Matrix& z) {
  require(x.rows() == z.rows(), ErrorCode::kDimension,
          "dcor: row counts differ (" + x.shape_string() + " vs " + z.shape_string() + ")");
  require(x.rows() >= 2, ErrorCode::kSampleSize, "dcor needs at least 2 samples");
}

double frob_inner(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) s += ad[i] * bd[i];
  return s;
}

}  // namespace

Matrix pairwise_dist(const Matrix& x, double eps) {
  require(x.rows() >= 2, ErrorCode::kSampleSize, "pairwise_dist needs at least 2 rows");
  Matrix d = kernels::pairwise_sq_dist(x);
  for (double& v : d.data()) v = std::sqrt(std::max(v, eps));
  return d;
}

CenteredDistanceMatrix double_center(const Matrix& d) {
  return CenteredDistanceMatrix{d.rows(), kernels::double_center(d)};
}

DcorParts dcor_parts(const Matrix& x, const Matrix& z, double eps) {
  check_pair(x, z);
  // Same arithmetic, in the same order, as the tape version below.
  const double inv_n2 = 1.0 / (static_cast<double>(x.rows()) * static_cast<double>(x.rows()));
  const Matrix a = kernels::double_center(pairwise_dist(x, eps));
  const Matrix b = kernels::double_center(pairwise_dist(z, eps));
  DcorParts p;
  p.dcov = std::sqrt(std::max(frob_inner(a, b) * inv_n2, 0.0));
  p.dvar_x = std::sqrt(std::max(frob_inner(a, a) * inv_n2, 0.0));
  p.dvar_z = std::sqrt(std::max(frob_inner(b, b) * inv_n2, 0.0));
  const double prod = p.dvar_x * p.dvar_z;
  require(prod >= kDegenerateVariance, ErrorCode::kDegenerateVariance,
          "dVar(X) * dVar(Z) = " + std::to_string(prod) + " (constant sample?)");
  p.dcor = p.dcov / std::sqrt(prod);
  return p;
}

double dcor(const Matrix& x, const Matrix& z, double eps) { return dcor_parts(x, z, eps).dcor; }

ad::Var dcor(ad::Var x, ad::Var z, double eps) {
  check_pair(x.value(), z.value());
  const double inv_n2 = 1.0 / (static_cast<double>(x.rows()) * static_cast<double>(x.rows()));
  ad::Var a = ad::double_center(ad::pairwise_dist(x, eps));
  ad::Var b = ad::double_center(ad::pairwise_dist(z, eps));
  ad::Var dcov = ad::sqrt_clamped(ad::scale(ad::sum(ad::mul(a, b)), inv_n2), 0.0);
  ad::Var dvar_x = ad::sqrt_clamped(ad::scale(ad::sum(ad::mul(a, a)), inv_n2), 0.0);
  ad::Var dvar_z = ad::sqrt_clamped(ad::scale(ad::sum(ad::mul(b, b)), inv_n2), 0.0);
  ad::Var prod = ad::mul(dvar_x, dvar_z);
  require(prod.value()(0, 0) >= kDegenerateVariance, ErrorCode::kDegenerateVariance,
          "dVar(X) * dVar(Z) = " + std::to_string(prod.value()(0, 0)) + " (constant sample?)");
  return ad::div(dcov, ad::sqrt_clamped(prod, 0.0));
}

Matrix dcor_grad_analytic(const Matrix& x, const Matrix& z, double eps) {
  check_pair(x, z);
  const std::size_t n = x.rows();
  const Matrix a = kernels::double_center(pairwise_dist(x, eps));
  const Matrix bd = pairwise_dist(z, eps);
  const Matrix b = kernels::double_center(bd);
  const double sxz = frob_inner(a, b);
  const double sxx = frob_inner(a, a);
  const double szz = frob_inner(b, b);
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  require(std::sqrt(sxx / n2) * std::sqrt(szz / n2) >= kDegenerateVariance, ErrorCode::kDegenerateVariance,
          "degenerate sample in dcor_grad_analytic");
  const double norm = std::sqrt(sxx * szz);
  const double ratio = sxz / szz;
  const double clamp = std::sqrt(eps);

  Matrix w(n, n);
  Matrix deg(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || bd(i, j) <= clamp) continue;
      const double g = (a(i, j) - ratio * b(i, j)) / norm;
      w(i, j) = 2.0 * g / bd(i, j);
      deg(i, 0) += w(i, j);
    }
  Matrix grad = kernels::matmul(w, z);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < z.cols(); ++k) grad(i, k) = deg(i, 0) * z(i, k) - grad(i, k);
  return grad;
}

}  // namespace nopeek
