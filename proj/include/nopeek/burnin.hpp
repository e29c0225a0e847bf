#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nopeek/matrix.hpp"
#include "nopeek/model.hpp"

// Communication-free decorrelation run on the client before training starts.
// Nothing in this module (or the library it lives in) can reach the wire
// code; burn-in is local by construction.
namespace nopeek {

/// Quadratic-form surrogates of the dependence between a candidate
/// representation Z and the fixed data X / labels Y.
///
/// For a sample A, L_A = -J D2_A J where D2_A holds squared Euclidean
/// distances and J = I - 11^T/n, i.e. L_A = 2 (JA)(JA)^T. Then
///   Tr(Z^T L_A Z) = 1/2 sum_ij Lhat_ij |z_i - z_j|^2   (Lhat = -L_A),
/// and the normalised ratio Tr(Z^T L_A Z) / sqrt(Tr(A^T L_A A) Tr(Z^T L_Z Z))
/// is invariant to translation, rotation and positive scaling of Z.
struct LaplacianSurrogate {
  Matrix lx;
  Matrix ly;
  double trace_x = 0.0;  // Tr(X^T L_X X)
  double trace_y = 0.0;  // Tr(Y^T L_Y Y)
  double kx = 0.0;       // 1 / sqrt(trace_x)
  double ky = 0.0;       // 1 / sqrt(trace_y)
  std::uint64_t x_digest = 0;
  std::uint64_t y_digest = 0;
};

/// -J D2 J for the rows of a.
Matrix build_laplacian(const Matrix& a);
/// Tr(Z^T L Z).
double quad_trace(const Matrix& z, const Matrix& l);

/// Throws kSampleSize for n < 3 and kDegenerateData when X or Y is constant.
LaplacianSurrogate build_laplacians(const Matrix& x, const Matrix& y);

struct ObjectiveTerms {
  double label_term = 0.0;  // Tr(Z^T L_Y Z) / sqrt(Tr(Y^T L_Y Y) Tr(Z^T L_Z Z))
  double data_term = 0.0;   // Tr(Z^T L_X Z) / sqrt(Tr(X^T L_X X) Tr(Z^T L_Z Z))
  double value() const { return label_term - data_term; }
};

/// f(Z) = label_term - data_term, with L_Z rebuilt from Z.
/// Throws kDegenerateData when Tr(Z^T L_Z Z) <= 1e-12.
ObjectiveTerms f_terms(const Matrix& z, const LaplacianSurrogate& lap);
double f_objective(const Matrix& z, const LaplacianSurrogate& lap);
/// Exact gradient of f with respect to Z (L_Z differentiated, not frozen).
Matrix f_gradient(const Matrix& z, const LaplacianSurrogate& lap);

enum class BurninMode { kOff, kAscent, kMm };

std::string_view to_string(BurninMode mode);
BurninMode parse_burnin_mode(std::string_view s);

struct BurninOptions {
  BurninMode mode = BurninMode::kAscent;
  std::size_t iterations = 100;
  /// Initial relative step (alpha); halved on every rejected step.
  double step = 1.0;
  double beta = 1.0;
  double gamma2 = 1.0;
  std::size_t max_rejections = 30;
};

struct BurninState {
  Matrix z;
  std::size_t iteration = 0;
  std::vector<double> f_history;
  double step = 1.0;
  double step_max = 1.0;
  std::size_t rejections = 0;
  std::size_t mm_fallbacks = 0;
  bool stagnated = false;
};

BurninState init_burnin(Matrix z0, const LaplacianSurrogate& lap, const BurninOptions& opt);

/// One safeguarded gradient-ascent step. The step is relative to |JZ|_F and
/// accepted only if f strictly increases; otherwise Z is kept and the step
/// halves. max_rejections consecutive rejections (or a vanishing gradient)
/// mark the state stagnated.
BurninState ascent_step(BurninState state, const LaplacianSurrogate& lap, std::size_t max_rejections = 30);

/// Linear map H = (gamma2 D - alpha S)^+ (gamma2 D - L_M) of the
/// majorization-minimization update Z <- H Z, with
/// S = kY L_Y - beta kX L_X and D = diag(sum_j |S_ij|).
struct MmOperator {
  Matrix h;
};

struct MmParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma2 = 1.0;
  /// L_M = -S by default; false sets L_M = 0.
  bool lm_from_s = true;
};

/// Throws kLinearAlgebra if the eigendecomposition behind the pseudo-inverse fails.
MmOperator build_mm_operator(const LaplacianSurrogate& lap, const MmParams& p);

/// Z <- H Z (rescaled to keep |JZ|_F), falling back to ascent_step for this
/// iteration when f would decrease.
BurninState mm_step(BurninState state, const LaplacianSurrogate& lap, const MmOperator& op,
                    std::size_t max_rejections = 30);

struct BurninTraceRow {
  std::size_t iteration = 0;
  double f = 0.0;
  double dcor_xz = 0.0;
  double dcor_yz = 0.0;
};

struct BurninResult {
  BurninState state;
  std::vector<BurninTraceRow> trace;  // row 0 is the initial Z
};

/// Runs `opt.iterations` steps (or until stagnation) from z0.
BurninResult run_burnin(const Matrix& x, const Matrix& y, Matrix z0, const BurninOptions& opt);

/// CSV with header "iteration,f,dcor_xz,dcor_yz".
std::string burnin_trace_csv(const std::vector<BurninTraceRow>& trace);

/// Translate each column of z so its minimum is 0. Distances (hence f and
/// dcor) are unchanged and the result is reachable by a relu output.
Matrix shift_nonnegative(const Matrix& z);

/// Fit the client layers so forward_client(x) ~ target, by `steps` full-batch
/// Adam steps on the mean squared error. Returns the final mean squared error.
double prefit_client(SplitModel& model, const Matrix& x, const Matrix& target, std::size_t steps = 200,
                     double lr = 1e-3);

std::uint64_t digest(const Matrix& m);

}  // namespace nopeek
