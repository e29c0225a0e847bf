#pragma once

#include "nopeek/matrix.hpp"

// Dense kernels behind the autodiff engine and the dependence estimator.
//
// Each kernel exists twice: `serial` is the reference loop nest and
// `parallel` distributes output rows (or columns) across OpenMP threads.
// Every output element is accumulated in the same order in both versions,
// so they agree bit-for-bit regardless of thread count; training runs stay
// reproducible when the thread count changes.
namespace nopeek::kernels {

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
/// n x n matrix of squared Euclidean distances between rows.
Matrix pairwise_sq_dist(const Matrix& x);
/// D - rowmean - colmean + grandmean.
Matrix double_center(const Matrix& d);

}  // namespace serial

namespace parallel {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix pairwise_sq_dist(const Matrix& x);
Matrix double_center(const Matrix& d);

}  // namespace parallel

using parallel::double_center;
using parallel::matmul;
using parallel::matmul_nt;
using parallel::matmul_tn;
using parallel::pairwise_sq_dist;

}  // namespace nopeek::kernels
