#pragma once

#include <cstddef>

#include "nopeek/autodiff.hpp"
#include "nopeek/matrix.hpp"

namespace nopeek {

/// Floor applied to squared pairwise distances before the square root.
inline constexpr double kDistEps = 1e-7;
/// dVar(X) * dVar(Z) below this is treated as a constant sample.
inline constexpr double kDegenerateVariance = 1e-12;

/// Double-centered pairwise distance matrix: symmetric, rows and columns sum to ~0.
struct CenteredDistanceMatrix {
  std::size_t n = 0;
  Matrix a;
};

/// Euclidean distances between the rows of x; each squared distance is
/// clamped below at eps, so coincident rows (and the diagonal) read sqrt(eps).
Matrix pairwise_dist(const Matrix& x, double eps = kDistEps);

CenteredDistanceMatrix double_center(const Matrix& d);

/// Sample distance covariance, variances and correlation of one pair.
struct DcorParts {
  double dcov = 0.0;
  double dvar_x = 0.0;
  double dvar_z = 0.0;
  double dcor = 0.0;
};

DcorParts dcor_parts(const Matrix& x, const Matrix& z, double eps = kDistEps);

/// Sample distance correlation (not squared), in [0, 1].
/// Throws kDegenerateVariance when either sample is (numerically) constant.
double dcor(const Matrix& x, const Matrix& z, double eps = kDistEps);

/// Differentiable distance correlation, built from the tape's primitives.
ad::Var dcor(ad::Var x, ad::Var z, double eps = kDistEps);

/// Closed-form d(dCor^2)/dZ, n x dz.
///
/// With S_XZ = sum(A o B), S_XX = sum(A o A), S_ZZ = sum(B o B) and b the raw
/// Z distances, dCor^2 = S_XZ / sqrt(S_XX S_ZZ). Because centering is a
/// self-adjoint projection, dS_XZ/db = A and dS_ZZ/db = 2B, so
///   dCor^2/db = (A - (S_XZ/S_ZZ) B) / sqrt(S_XX S_ZZ) =: G,
/// and the chain through b_ij = |z_i - z_j| gives a graph-Laplacian form
///   grad = (diag(W 1) - W) Z,  W_ij = 2 G_ij / b_ij  (unclamped pairs only).
Matrix dcor_grad_analytic(const Matrix& x, const Matrix& z, double eps = kDistEps);

}  // namespace nopeek
