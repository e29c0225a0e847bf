#include "nopeek/burnin.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nopeek/depmeasure.hpp"
#include "nopeek/errors.hpp"
#include "nopeek/kernels.hpp"

namespace nopeek {

namespace {

constexpr double kDegenerateTrace = 1e-12;

Matrix center_columns(const Matrix& z) {
  Matrix out = z;
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) m += z(i, j);
    m /= static_cast<double>(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) out(i, j) -= m;
  }
  return out;
}

double z_trace(const Matrix& z) { return quad_trace(z, build_laplacian(z)); }

}  // namespace

std::uint64_t digest(const Matrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(m.rows());
  mix(m.cols());
  for (double v : m.data()) mix(std::bit_cast<std::uint64_t>(v));
  return h;
}

Matrix build_laplacian(const Matrix& a) {
  Matrix l = kernels::double_center(kernels::pairwise_sq_dist(a));
  for (double& v : l.data()) v = -v;
  return l;
}

double quad_trace(const Matrix& z, const Matrix& l) {
  require(l.rows() == z.rows() && l.cols() == z.rows(), ErrorCode::kDimension,
          "quad_trace: L is " + l.shape_string() + ", Z is " + z.shape_string());
  const Matrix lz = kernels::matmul(l, z);
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += z.data()[i] * lz.data()[i];
  return s;
}

LaplacianSurrogate build_laplacians(const Matrix& x, const Matrix& y) {
  require(x.rows() == y.rows(), ErrorCode::kDimension, "X and Y differ in sample count");
  require(x.rows() >= 3, ErrorCode::kSampleSize, "burn-in needs at least 3 samples");
  LaplacianSurrogate lap;
  lap.lx = build_laplacian(x);
  lap.ly = build_laplacian(y);
  lap.trace_x = quad_trace(x, lap.lx);
  lap.trace_y = quad_trace(y, lap.ly);
  require(lap.trace_x > kDegenerateTrace, ErrorCode::kDegenerateData, "Tr(X^T L_X X) <= 0: constant data");
  require(lap.trace_y > kDegenerateTrace, ErrorCode::kDegenerateData, "Tr(Y^T L_Y Y) <= 0: constant labels");
  lap.kx = 1.0 / std::sqrt(lap.trace_x);
  lap.ky = 1.0 / std::sqrt(lap.trace_y);
  lap.x_digest = digest(x);
  lap.y_digest = digest(y);
  return lap;
}

ObjectiveTerms f_terms(const Matrix& z, const LaplacianSurrogate& lap) {
  const double tz = z_trace(z);
  require(tz > kDegenerateTrace, ErrorCode::kDegenerateData, "Tr(Z^T L_Z Z) <= 1e-12: collapsed representation");
  const double root = std::sqrt(tz);
  ObjectiveTerms t;
  t.label_term = quad_trace(z, lap.ly) * lap.ky / root;
  t.data_term = quad_trace(z, lap.lx) * lap.kx / root;
  return t;
}

double f_objective(const Matrix& z, const LaplacianSurrogate& lap) { return f_terms(z, lap).value(); }

Matrix f_gradient(const Matrix& z, const LaplacianSurrogate& lap) {
  // f = N / sqrt(T) with N = kY Tr(Z'L_Y Z) - kX Tr(Z'L_X Z) and
  // T = Tr(Z'L_Z Z) = 2 |Zc'Zc|_F^2, so grad T = 8 Zc (Zc'Zc).
  const Matrix zc = center_columns(z);
  const Matrix gram = kernels::matmul_tn(zc, zc);
  double t = 0.0;
  for (double v : gram.data()) t += v * v;
  t *= 2.0;
  require(t > kDegenerateTrace, ErrorCode::kDegenerateData, "Tr(Z^T L_Z Z) <= 1e-12: collapsed representation");
  const Matrix ly_z = kernels::matmul(lap.ly, z);
  const Matrix lx_z = kernels::matmul(lap.lx, z);
  double ny = 0.0, nx = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    ny += z.data()[i] * ly_z.data()[i];
    nx += z.data()[i] * lx_z.data()[i];
  }
  const double num = lap.ky * ny - lap.kx * nx;
  const double root = std::sqrt(t);
  const Matrix grad_t = 8.0 * kernels::matmul(zc, gram);
  Matrix g(z.rows(), z.cols());
  for (std::size_t i = 0; i < g.size(); ++i)
    g.data()[i] = 2.0 * (lap.ky * ly_z.data()[i] - lap.kx * lx_z.data()[i]) / root -
                  0.5 * num / (t * root) * grad_t.data()[i];
  return g;
}

std::string_view to_string(BurninMode mode) {
  switch (mode) {
    case BurninMode::kOff: return "off";
    case BurninMode::kAscent: return "ascent";
    case BurninMode::kMm: return "mm";
  }
  return "?";
}

BurninMode parse_burnin_mode(std::string_view s) {
  if (s == "off") return BurninMode::kOff;
  if (s == "ascent") return BurninMode::kAscent;
  if (s == "mm") return BurninMode::kMm;
  fail(ErrorCode::kConfig, "burnin_mode must be off, ascent or mm (got '" + std::string(s) + "')");
}

BurninState init_burnin(Matrix z0, const LaplacianSurrogate& lap, const BurninOptions& opt) {
  require(z0.rows() == lap.lx.rows(), ErrorCode::kDimension, "Z has a different sample count than X");
  BurninState s;
  s.f_history.push_back(f_objective(z0, lap));
  s.z = std::move(z0);
  s.step = opt.step;
  s.step_max = opt.step;
  return s;
}

BurninState ascent_step(BurninState s, const LaplacianSurrogate& lap, std::size_t max_rejections) {
  const double f_old = s.f_history.back();
  ++s.iteration;
  const Matrix g = f_gradient(s.z, lap);
  const double gn = frobenius_norm(g);
  const double zn = frobenius_norm(center_columns(s.z));
  if (!(gn > 1e-14 * zn)) {
    s.stagnated = true;
    s.f_history.push_back(f_old);
    return s;
  }
  Matrix trial = s.z + (s.step * zn / gn) * g;
  double f_new = -std::numeric_limits<double>::infinity();
  try {
    f_new = f_objective(trial, lap);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateData) throw;
  }
  if (f_new > f_old) {
    s.z = std::move(trial);
    s.f_history.push_back(f_new);
    s.rejections = 0;
    s.step = std::min(2.0 * s.step, s.step_max);
  } else {
    s.f_history.push_back(f_old);
    s.step *= 0.5;
    if (++s.rejections >= max_rejections) s.stagnated = true;
  }
  return s;
}

MmOperator build_mm_operator(const LaplacianSurrogate& lap, const MmParams& p) {
  const std::size_t n = lap.lx.rows();
  Eigen::MatrixXd s(n, n), d = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      s(Eigen::Index(i), Eigen::Index(j)) = lap.ky * lap.ly(i, j) - p.beta * lap.kx * lap.lx(i, j);
  for (Eigen::Index i = 0; i < Eigen::Index(n); ++i) d(i, i) = std::max(s.row(i).cwiseAbs().sum(), 1e-12);
  const Eigen::MatrixXd lhs = p.gamma2 * d - p.alpha * s;
  const Eigen::MatrixXd rhs = p.lm_from_s ? Eigen::MatrixXd(p.gamma2 * d + s) : Eigen::MatrixXd(p.gamma2 * d);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (lhs + lhs.transpose()));
  require(eig.info() == Eigen::Success, ErrorCode::kLinearAlgebra, "eigendecomposition for the MM update failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double tol = lambda.cwiseAbs().maxCoeff() * static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  Eigen::VectorXd inv(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) inv(i) = std::abs(lambda(i)) > tol ? 1.0 / lambda(i) : 0.0;
  const Eigen::MatrixXd pinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::MatrixXd h = pinv * rhs;
  require(h.allFinite(), ErrorCode::kLinearAlgebra, "MM operator is not finite");

  MmOperator op;
  op.h = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) op.h(i, j) = h(Eigen::Index(i), Eigen::Index(j));
  return op;
}

BurninState mm_step(BurninState s, const LaplacianSurrogate& lap, const MmOperator& op, std::size_t max_rejections) {
  const double f_old = s.f_history.back();
  Matrix hz = kernels::matmul(op.h, s.z);
  // f and dcor ignore scale and translation; keep |JZ|_F and the column means
  // of the previous iterate so Z does not drift in magnitude.
  const Matrix zc_old = center_columns(s.z);
  Matrix hz_c = center_columns(hz);
  const double n_old = frobenius_norm(zc_old);
  const double n_new = frobenius_norm(hz_c);
  double f_new = -std::numeric_limits<double>::infinity();
  if (n_new > 0.0 && std::isfinite(n_new)) {
    hz_c = (n_old / n_new) * hz_c;
    const Matrix means = s.z - zc_old;
    hz = hz_c + means;
    try {
      f_new = f_objective(hz, lap);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateData) throw;
    }
  }
  if (f_new >= f_old) {
    ++s.iteration;
    s.z = std::move(hz);
    s.f_history.push_back(f_new);
    s.rejections = 0;
    return s;
  }
  ++s.mm_fallbacks;
  return ascent_step(std::move(s), lap, max_rejections);
}

BurninResult run_burnin(const Matrix& x, const Matrix& y, Matrix z0, const BurninOptions& opt) {
  BurninResult r;
  auto trace_row = [&](std::size_t it, double f, const Matrix& z) {
    r.trace.push_back(BurninTraceRow{it, f, dcor(x, z), dcor(y, z)});
  };
  if (opt.mode == BurninMode::kOff) {
    r.state.z = std::move(z0);
    return r;
  }
  const LaplacianSurrogate lap = build_laplacians(x, y);
  r.state = init_burnin(std::move(z0), lap, opt);
  trace_row(0, r.state.f_history.back(), r.state.z);
  MmOperator op;
  if (opt.mode == BurninMode::kMm) op = build_mm_operator(lap, MmParams{opt.step, opt.beta, opt.gamma2, true});
  for (std::size_t it = 0; it < opt.iterations && !r.state.stagnated; ++it) {
    r.state = opt.mode == BurninMode::kMm ? mm_step(std::move(r.state), lap, op, opt.max_rejections)
                                          : ascent_step(std::move(r.state), lap, opt.max_rejections);
    trace_row(it + 1, r.state.f_history.back(), r.state.z);
  }
  return r;
}

std::string burnin_trace_csv(const std::vector<BurninTraceRow>& trace) {
  std::string out = "iteration,f,dcor_xz,dcor_yz\n";
  char buf[128];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", row.iteration, row.f, row.dcor_xz, row.dcor_yz);
    out += buf;
  }
  return out;
}

Matrix shift_nonnegative(const Matrix& z) {
  Matrix out = z;
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double lo = z(0, j);
    for (std::size_t i = 1; i < z.rows(); ++i) lo = std::min(lo, z(i, j));
    for (std::size_t i = 0; i < z.rows(); ++i) out(i, j) -= lo;
  }
  return out;
}

double prefit_client(SplitModel& model, const Matrix& x, const Matrix& target, std::size_t steps, double lr) {
  require(target.rows() == x.rows() && target.cols() == model.z_dim(), ErrorCode::kDimension,
          "prefit target must be n x z_dim");
  auto params = model.client_parameters();
  std::vector<const Matrix*> cparams(params.begin(), params.end());
  AdamState adam = make_adam(cparams, lr, 1.0);
  const double inv = 1.0 / static_cast<double>(target.size());
  double last = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    ad::Tape tape;
    Binding bind;
    ad::Var z = forward_client(model, tape, tape.constant(x), &bind);
    ad::Var loss = ad::scale(ad::sum_squares(ad::sub(z, tape.constant(target))), inv);
    tape.backward(loss);
    last = loss.value()(0, 0);
    std::vector<const Matrix*> grads;
    for (ad::Var p : bind.params) grads.push_back(&p.grad());
    adam_step(adam, params, grads);
  }
  return last;
}

}  // namespace nopeek
