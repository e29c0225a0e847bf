#include "nopeek/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "nopeek/errors.hpp"
#include "nopeek/kernels.hpp"

namespace nopeek::ad {

const Matrix& Var::value() const { return tape_->value(*this); }
const Matrix& Var::grad() const { return tape_->grad(*this); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix{}, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix{}, true, nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v) const {
  require(v.tape_ == this && v.id_ < nodes_.size(), ErrorCode::kContract, "Var from another tape");
}

const Matrix& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id_].value;
}

const Matrix& Tape::grad(Var v) const {
  check_owned(v);
  return nodes_[v.id_].grad;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id_].requires_grad;
}

Var Tape::record(Matrix value, std::span<const Var> parents, BackwardFn fn) {
  bool rg = false;
  for (const Var& p : parents) {
    check_owned(p);
    rg = rg || nodes_[p.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix{}, rg, rg ? std::move(fn) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_acc(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) { backward(loss, {}); }

void Tape::backward(Var loss, std::span<const Seed> seeds) {
  check_owned(loss);
  require(nodes_[loss.id_].value.rows() == 1 && nodes_[loss.id_].value.cols() == 1,
          ErrorCode::kContract, "backward needs a 1x1 loss, got " + nodes_[loss.id_].value.shape_string());
  for (Node& n : nodes_) n.grad = Matrix{};
  std::size_t last = loss.id_;
  if (nodes_[loss.id_].requires_grad) grad_acc(loss.id_)(0, 0) += 1.0;
  for (const Seed& s : seeds) {
    check_owned(s.at);
    require(s.grad->same_shape(nodes_[s.at.id_].value), ErrorCode::kDimension,
            "seed gradient " + s.grad->shape_string() + " for node " + nodes_[s.at.id_].value.shape_string());
    if (!nodes_[s.at.id_].requires_grad) continue;
    Matrix& g = grad_acc(s.at.id_);
    auto gd = g.data();
    auto sd = s.grad->data();
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += sd[i];
    last = std::max(last, s.at.id_);
  }
  run_backward(last);
}

void Tape::backward(std::span<const Seed> seeds) {
  for (Node& n : nodes_) n.grad = Matrix{};
  std::size_t last = 0;
  for (const Seed& s : seeds) {
    check_owned(s.at);
    require(s.grad->same_shape(nodes_[s.at.id_].value), ErrorCode::kDimension, "seed gradient shape");
    if (!nodes_[s.at.id_].requires_grad) continue;
    Matrix& g = grad_acc(s.at.id_);
    auto gd = g.data();
    auto sd = s.grad->data();
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += sd[i];
    last = std::max(last, s.at.id_);
  }
  if (!nodes_.empty()) run_backward(last);
}

void Tape::run_backward(std::size_t last) {
  for (std::size_t i = last + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
  // Reachable-but-untouched variables report zeros rather than an empty grad.
  for (Node& n : nodes_)
    if (n.requires_grad && n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
}

namespace {

Tape& tape_of(Var a, Var b) {
  require(a.tape() != nullptr && a.tape() == b.tape(), ErrorCode::kContract, "operands on different tapes");
  return *a.tape();
}

void require_same(const Matrix& a, const Matrix& b, const char* op) {
  require(a.same_shape(b), ErrorCode::kDimension,
          std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
}

void accumulate(Tape& t, std::size_t id, const Matrix& g) {
  if (!t.needs_grad(id)) return;
  Matrix& acc = t.grad_acc(id);
  auto a = acc.data();
  auto s = g.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s[i];
}

// Elementwise unary op: value f(x), local derivative df(x, y).
template <typename F, typename DF>
Var unary(Var a, F f, DF df) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t i = 0; i < xd.size(); ++i) yd[i] = f(xd[i]);
  const std::size_t ia = a.id();
  const Var parents[] = {a};
  return t.record(std::move(y), parents, [ia, df](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix& xv = tp.value_of(ia);
    const Matrix& yv = tp.value_of(self);
    Matrix& acc = tp.grad_acc(ia);
    auto gd = g.data();
    auto xs = xv.data();
    auto ys = yv.data();
    auto out = acc.data();
    for (std::size_t i = 0; i < gd.size(); ++i) out[i] += gd[i] * df(xs[i], ys[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Matrix c = kernels::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return t.record(std::move(c), parents, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.needs_grad(ia)) accumulate(tp, ia, kernels::matmul_nt(g, tp.value_of(ib)));
    if (tp.needs_grad(ib)) accumulate(tp, ib, kernels::matmul_tn(tp.value_of(ia), g));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same(a.value(), b.value(), "add");
  const std::size_t ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return t.record(a.value() + b.value(), parents, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    accumulate(tp, ia, g);
    accumulate(tp, ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same(a.value(), b.value(), "sub");
  const std::size_t ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return t.record(a.value() - b.value(), parents, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    accumulate(tp, ia, g);
    if (tp.needs_grad(ib)) accumulate(tp, ib, -1.0 * g);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  const Matrix& x = a.value();
  const Matrix& r = row.value();
  require(r.rows() == 1 && r.cols() == x.cols(), ErrorCode::kDimension,
          "add_row: " + x.shape_string() + " + " + r.shape_string());
  Matrix y = x;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += r(0, j);
  const std::size_t ia = a.id(), ir = row.id();
  const Var parents[] = {a, row};
  return t.record(std::move(y), parents, [ia, ir](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    accumulate(tp, ia, g);
    if (tp.needs_grad(ir)) {
      Matrix& acc = tp.grad_acc(ir);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) acc(0, j) += g(i, j);
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same(a.value(), b.value(), "mul");
  const std::size_t ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return t.record(hadamard(a.value(), b.value()), parents, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.needs_grad(ia)) accumulate(tp, ia, hadamard(g, tp.value_of(ib)));
    if (tp.needs_grad(ib)) accumulate(tp, ib, hadamard(g, tp.value_of(ia)));
  });
}

Var div(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same(a.value(), b.value(), "div");
  Matrix y = a.value();
  auto yd = y.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < yd.size(); ++i) {
    require(bd[i] != 0.0, ErrorCode::kContract, "div by zero");
    yd[i] /= bd[i];
  }
  const std::size_t ia = a.id(), ib = b.id();
  const Var parents[] = {a, b};
  return t.record(std::move(y), parents, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix& bv = tp.value_of(ib);
    const Matrix& yv = tp.value_of(self);
    if (tp.needs_grad(ia)) {
      Matrix& acc = tp.grad_acc(ia);
      for (std::size_t i = 0; i < g.size(); ++i) acc.data()[i] += g.data()[i] / bv.data()[i];
    }
    if (tp.needs_grad(ib)) {
      Matrix& acc = tp.grad_acc(ib);
      for (std::size_t i = 0; i < g.size(); ++i)
        acc.data()[i] -= g.data()[i] * yv.data()[i] / bv.data()[i];
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Var parents[] = {a};
  return t.record(s * a.value(), parents, [ia, s](Tape& tp, std::size_t self) {
    Matrix& acc = tp.grad_acc(ia);
    auto g = tp.grad_of(self).data();
    auto out = acc.data();
    for (std::size_t i = 0; i < g.size(); ++i) out[i] += s * g[i];
  });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().data()) require(v > 0.0, ErrorCode::kContract, "log of non-positive value");
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  const Var parents[] = {a};
  return t.record(Matrix(1, 1, nopeek::sum(a.value())), parents, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)(0, 0);
    for (double& v : tp.grad_acc(ia).data()) v += g;
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_axis(Var a, Axis axis) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix y = axis == Axis::kRows ? Matrix(1, x.cols()) : Matrix(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (axis == Axis::kRows)
        y(0, j) += x(i, j);
      else
        y(i, 0) += x(i, j);
    }
  const std::size_t ia = a.id();
  const Var parents[] = {a};
  return t.record(std::move(y), parents, [ia, axis](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    Matrix& acc = tp.grad_acc(ia);
    for (std::size_t i = 0; i < acc.rows(); ++i)
      for (std::size_t j = 0; j < acc.cols(); ++j) acc(i, j) += axis == Axis::kRows ? g(0, j) : g(i, 0);
  });
}

Var mean_axis(Var a, Axis axis) {
  const double n = static_cast<double>(axis == Axis::kRows ? a.rows() : a.cols());
  return scale(sum_axis(a, axis), 1.0 / n);
}

Var sqrt_clamped(Var a, double floor) {
  return unary(
      a, [floor](double x) { return std::sqrt(std::max(x, floor)); },
      [floor](double x, double y) { return x > floor && y > 0.0 ? 0.5 / y : 0.0; });
}

Var pairwise_dist(Var x, double eps) {
  Tape& t = *x.tape();
  const Matrix& xv = x.value();
  require(xv.rows() >= 2, ErrorCode::kSampleSize, "pairwise_dist needs at least 2 rows");
  Matrix d = kernels::pairwise_sq_dist(xv);
  for (double& v : d.data()) v = std::sqrt(std::max(v, eps));
  const std::size_t ix = x.id();
  const Var parents[] = {x};
  return t.record(std::move(d), parents, [ix, eps](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix& dv = tp.value_of(self);
    const Matrix& xs = tp.value_of(ix);
    const std::size_t n = dv.rows();
    // d_ij depends on x_i and x_j only when the clamp is inactive.
    const double clamp = std::sqrt(eps);
    Matrix w(n, n);
    Matrix deg(n, 1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || dv(i, j) <= clamp) continue;
        w(i, j) = (g(i, j) + g(j, i)) / dv(i, j);
        deg(i, 0) += w(i, j);
      }
    Matrix wx = kernels::matmul(w, xs);
    Matrix& acc = tp.grad_acc(ix);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < xs.cols(); ++k) acc(i, k) += deg(i, 0) * xs(i, k) - wx(i, k);
  });
}

Var double_center(Var d) {
  Tape& t = *d.tape();
  const std::size_t id = d.id();
  const Var parents[] = {d};
  return t.record(kernels::double_center(d.value()), parents, [id](Tape& tp, std::size_t self) {
    // Double centering is J D J with J symmetric, so its adjoint is itself.
    accumulate(tp, id, kernels::double_center(tp.grad_of(self)));
  });
}

Var softmax_cross_entropy(Var logits, const Matrix& onehot) {
  Tape& t = *logits.tape();
  const Matrix& z = logits.value();
  require(z.same_shape(onehot), ErrorCode::kDimension,
          "cce: logits " + z.shape_string() + " vs labels " + onehot.shape_string());
  const std::size_t n = z.rows();
  const std::size_t k = z.cols();
  require(n > 0, ErrorCode::kSampleSize, "cce on empty batch");
  for (std::size_t i = 0; i < n; ++i) {
    int ones = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double y = onehot(i, j);
      require(y == 0.0 || y == 1.0, ErrorCode::kLabel, "label row " + std::to_string(i) + " is not one-hot");
      ones += y == 1.0;
    }
    require(ones == 1, ErrorCode::kLabel, "label row " + std::to_string(i) + " is not one-hot");
  }
  Matrix prob(n, k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = z.row(i);
    const double m = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(r[j] - m);
    const double lse = m + std::log(s);
    for (std::size_t j = 0; j < k; ++j) {
      prob(i, j) = std::exp(r[j] - lse);
      if (onehot(i, j) == 1.0) total += lse - r[j];
    }
  }
  const std::size_t il = logits.id();
  const Var parents[] = {logits};
  return t.record(Matrix(1, 1, total / static_cast<double>(n)), parents,
                  [il, prob = std::move(prob), onehot](Tape& tp, std::size_t self) {
                    const double g = tp.grad_of(self)(0, 0) / static_cast<double>(prob.rows());
                    Matrix& acc = tp.grad_acc(il);
                    for (std::size_t i = 0; i < prob.size(); ++i)
                      acc.data()[i] += g * (prob.data()[i] - onehot.data()[i]);
                  });
}

Var sum_squares(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.value().data()) s += v * v;
  const std::size_t ia = a.id();
  const Var parents[] = {a};
  return t.record(Matrix(1, 1, s), parents, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)(0, 0);
    const Matrix& x = tp.value_of(ia);
    Matrix& acc = tp.grad_acc(ia);
    for (std::size_t i = 0; i < x.size(); ++i) acc.data()[i] += 2.0 * g * x.data()[i];
  });
}

Var l2_norm(Var a) { return sqrt_clamped(sum_squares(a), 0.0); }

}  // namespace nopeek::ad
