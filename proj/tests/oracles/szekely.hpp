#pragma once

// Straight-line sample distance correlation, written directly from the
// energy-statistics definition with plain loops and no shared code. The
// squared distances get the same eps floor as the library so the two agree
// to rounding; eps = 0 gives the textbook estimator.
#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline std::vector<double> centered_distances(const Rows& x, double eps) {
  const std::size_t n = x.size();
  std::vector<double> a(n * n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l) {
      double s = 0.0;
      for (std::size_t j = 0; j < x[k].size(); ++j) s += (x[k][j] - x[l][j]) * (x[k][j] - x[l][j]);
      a[k * n + l] = std::sqrt(s < eps ? eps : s);
    }
  std::vector<double> row(n, 0.0), col(n, 0.0);
  double grand = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l) {
      row[k] += a[k * n + l] / double(n);
      col[l] += a[k * n + l] / double(n);
      grand += a[k * n + l] / double(n * n);
    }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l) a[k * n + l] = a[k * n + l] - row[k] - col[l] + grand;
  return a;
}

inline double v2(const std::vector<double>& a, const std::vector<double>& b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n * n; ++i) s += a[i] * b[i];
  return s / double(n * n);
}

/// dCor_n(X, Y) = sqrt(V2(X,Y) / sqrt(V2(X,X) V2(Y,Y))).
inline double dcor(const Rows& x, const Rows& y, double eps) {
  const std::size_t n = x.size();
  const auto a = centered_distances(x, eps);
  const auto b = centered_distances(y, eps);
  const double vxy = v2(a, b, n), vxx = v2(a, a, n), vyy = v2(b, b, n);
  if (vxx * vyy <= 0.0) return 0.0;
  return std::sqrt(std::max(vxy, 0.0) / std::sqrt(vxx * vyy));
}

}  // namespace oracle
