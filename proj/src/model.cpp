#include "nopeek/model.hpp"

#include <cmath>

#include "nopeek/errors.hpp"
#include "nopeek/rng.hpp"

namespace nopeek {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kPatchDense: return "patch-dense";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

void PatchGeometry::validate() const {
  require(height > 0 && width > 0 && channels > 0 && out_channels > 0, ErrorCode::kConfig,
          "patch geometry has a zero dimension");
  require(kernel > 0 && kernel <= height && kernel <= width, ErrorCode::kConfig, "patch kernel larger than image");
  require(stride > 0, ErrorCode::kConfig, "patch stride must be positive");
}

Matrix patch_mask(const PatchGeometry& g) {
  Matrix mask(g.in_dim(), g.out_dim());
  for (std::size_t oy = 0; oy < g.out_height(); ++oy)
    for (std::size_t ox = 0; ox < g.out_width(); ++ox)
      for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
        const std::size_t out = (oy * g.out_width() + ox) * g.out_channels + oc;
        for (std::size_t ky = 0; ky < g.kernel; ++ky)
          for (std::size_t kx = 0; kx < g.kernel; ++kx)
            for (std::size_t c = 0; c < g.channels; ++c) {
              const std::size_t y = oy * g.stride + ky;
              const std::size_t x = ox * g.stride + kx;
              mask((y * g.width + x) * g.channels + c, out) = 1.0;
            }
      }
  return mask;
}

void SplitModel::validate() const {
  require(!layers.empty(), ErrorCode::kConfig, "model has no layers");
  require(split_index >= 1 && split_index < layers.size(), ErrorCode::kConfig,
          "split_index " + std::to_string(split_index) + " outside [1, " + std::to_string(layers.size()) + ")");
  require(!heads.empty(), ErrorCode::kConfig, "model has no heads");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& s = layers[i].spec;
    if (i > 0)
      require(s.in_dim == layers[i - 1].spec.out_dim, ErrorCode::kConfig,
              "layer " + std::to_string(i) + " input does not chain");
    if (s.kind == LayerKind::kPatchDense) {
      require(s.patch.has_value(), ErrorCode::kConfig, "patch-dense layer without geometry");
      s.patch->validate();
      require(s.patch->in_dim() == s.in_dim && s.patch->out_dim() == s.out_dim, ErrorCode::kConfig,
              "patch-dense dims disagree with geometry");
    }
    if (s.kind == LayerKind::kRelu || s.kind == LayerKind::kFlatten)
      require(s.in_dim == s.out_dim, ErrorCode::kConfig, "shape-preserving layer changes dims");
  }
  for (const Head& h : heads)
    require(h.weight.rows() == shared_dim() && h.weight.cols() == h.classes, ErrorCode::kConfig,
            "head " + h.name + " does not match shared representation");
}

namespace {

template <typename M>
void collect(std::vector<M*>& out, auto& layers, std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) {
    if (!layers[i].has_params()) continue;
    out.push_back(&layers[i].weight);
    out.push_back(&layers[i].bias);
  }
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
void init_affine(Matrix& w, Matrix& b, std::size_t fan_in, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  for (double& v : b.data()) v = rng.uniform(-bound, bound);
}

Layer make_layer(LayerSpec spec) {
  Layer l;
  l.spec = std::move(spec);
  if (l.spec.kind == LayerKind::kDense) {
    l.weight = Matrix(l.spec.in_dim, l.spec.out_dim);
    l.bias = Matrix(1, l.spec.out_dim);
    init_affine(l.weight, l.bias, l.spec.in_dim, l.spec.init_seed);
  } else if (l.spec.kind == LayerKind::kPatchDense) {
    const PatchGeometry& g = *l.spec.patch;
    l.weight = Matrix(l.spec.in_dim, l.spec.out_dim);
    l.bias = Matrix(1, l.spec.out_dim);
    init_affine(l.weight, l.bias, g.kernel * g.kernel * g.channels, l.spec.init_seed);
    l.mask = patch_mask(g);
    l.weight = hadamard(l.weight, l.mask);
  }
  return l;
}

}  // namespace

std::vector<Matrix*> SplitModel::client_parameters() {
  std::vector<Matrix*> out;
  collect(out, layers, 0, split_index);
  return out;
}

std::vector<Matrix*> SplitModel::server_parameters() {
  std::vector<Matrix*> out;
  collect(out, layers, split_index, layers.size());
  for (Head& h : heads) {
    out.push_back(&h.weight);
    out.push_back(&h.bias);
  }
  return out;
}

std::vector<const Matrix*> SplitModel::client_parameters() const {
  std::vector<const Matrix*> out;
  collect(out, layers, 0, split_index);
  return out;
}

std::vector<const Matrix*> SplitModel::server_parameters() const {
  std::vector<const Matrix*> out;
  collect(out, layers, split_index, layers.size());
  for (const Head& h : heads) {
    out.push_back(&h.weight);
    out.push_back(&h.bias);
  }
  return out;
}

SplitModel build_model(std::size_t input_dim, const ModelConfig& cfg, std::span<const HeadSpec> heads,
                       std::uint64_t init_seed) {
  require(input_dim > 0, ErrorCode::kConfig, "input_dim must be positive");
  SplitModel m;
  auto seed_for = [&](std::size_t idx) { return Rng::derive_seed(init_seed, "layer" + std::to_string(idx)); };
  auto push = [&](LayerKind kind, std::size_t in, std::size_t out, std::optional<PatchGeometry> patch = {}) {
    const std::size_t idx = m.layers.size();
    m.layers.push_back(make_layer(LayerSpec{kind, in, out, seed_for(idx), patch}));
  };
  push(LayerKind::kFlatten, input_dim, input_dim);
  std::size_t dim = input_dim;
  if (cfg.patch) {
    cfg.patch->validate();
    require(cfg.patch->in_dim() == input_dim, ErrorCode::kConfig, "patch geometry does not match input dim");
    push(LayerKind::kPatchDense, dim, cfg.patch->out_dim(), cfg.patch);
    dim = cfg.patch->out_dim();
    push(LayerKind::kRelu, dim, dim);
  }
  for (std::size_t w : cfg.hidden) {
    require(w > 0, ErrorCode::kConfig, "hidden width must be positive");
    push(LayerKind::kDense, dim, w);
    push(LayerKind::kRelu, w, w);
    dim = w;
  }
  m.split_index = cfg.split_index;
  for (const HeadSpec& hs : heads) {
    require(hs.classes >= 2, ErrorCode::kConfig, "head " + hs.name + " needs at least 2 classes");
    Head h{hs.name, hs.classes, Matrix(dim, hs.classes), Matrix(1, hs.classes)};
    init_affine(h.weight, h.bias, dim, Rng::derive_seed(init_seed, "head:" + hs.name));
    m.heads.push_back(std::move(h));
  }
  m.validate();
  return m;
}

namespace {

ad::Var apply_layer(const Layer& l, ad::Tape& tape, ad::Var x, Binding* bind) {
  switch (l.spec.kind) {
    case LayerKind::kFlatten:
      require(x.cols() == l.spec.in_dim, ErrorCode::kDimension,
              "input has " + std::to_string(x.cols()) + " columns, model expects " + std::to_string(l.spec.in_dim));
      return x;
    case LayerKind::kRelu:
      return ad::relu(x);
    case LayerKind::kDense:
    case LayerKind::kPatchDense: {
      require(x.cols() == l.spec.in_dim, ErrorCode::kDimension,
              std::string(to_string(l.spec.kind)) + " expects " + std::to_string(l.spec.in_dim) + " inputs, got " +
                  std::to_string(x.cols()));
      ad::Var w = bind ? tape.variable(l.weight) : tape.constant(l.weight);
      ad::Var b = bind ? tape.variable(l.bias) : tape.constant(l.bias);
      if (bind) {
        bind->params.push_back(w);
        bind->params.push_back(b);
      }
      ad::Var weff = l.spec.kind == LayerKind::kPatchDense ? ad::mul(w, tape.constant(l.mask)) : w;
      return ad::add_row(ad::matmul(x, weff), b);
    }
  }
  fail(ErrorCode::kConfig, "unknown layer kind");
}

}  // namespace

ad::Var forward_client(const SplitModel& m, ad::Tape& tape, ad::Var x, Binding* bind) {
  ad::Var h = x;
  for (std::size_t i = 0; i < m.split_index; ++i) h = apply_layer(m.layers[i], tape, h, bind);
  return h;
}

std::vector<ad::Var> forward_server(const SplitModel& m, ad::Tape& tape, ad::Var z, Binding* bind) {
  require(z.cols() == m.z_dim(), ErrorCode::kDimension,
          "activations have " + std::to_string(z.cols()) + " columns, server expects " + std::to_string(m.z_dim()));
  ad::Var h = z;
  for (std::size_t i = m.split_index; i < m.layers.size(); ++i) h = apply_layer(m.layers[i], tape, h, bind);
  std::vector<ad::Var> logits;
  for (const Head& head : m.heads) {
    ad::Var w = bind ? tape.variable(head.weight) : tape.constant(head.weight);
    ad::Var b = bind ? tape.variable(head.bias) : tape.constant(head.bias);
    if (bind) {
      bind->params.push_back(w);
      bind->params.push_back(b);
    }
    logits.push_back(ad::add_row(ad::matmul(h, w), b));
  }
  return logits;
}

Matrix forward_client(const SplitModel& m, const Matrix& x) {
  ad::Tape tape;
  return forward_client(m, tape, tape.constant(x)).value();
}

std::vector<Matrix> forward_server(const SplitModel& m, const Matrix& z) {
  ad::Tape tape;
  std::vector<Matrix> out;
  for (ad::Var v : forward_server(m, tape, tape.constant(z))) out.push_back(v.value());
  return out;
}

Matrix forward_prefix(const SplitModel& m, const Matrix& x, std::size_t upto) {
  require(upto <= m.layers.size(), ErrorCode::kConfig, "forward_prefix past the last layer");
  ad::Tape tape;
  ad::Var h = tape.constant(x);
  for (std::size_t i = 0; i < upto; ++i) h = apply_layer(m.layers[i], tape, h, nullptr);
  return h.value();
}

ad::Var cce(ad::Var logits, const Matrix& y_true) { return ad::softmax_cross_entropy(logits, y_true); }

double cce(const Matrix& logits, const Matrix& y_true) {
  ad::Tape tape;
  return cce(tape.constant(logits), y_true).value()(0, 0);
}

double accuracy(const Matrix& logits, const Matrix& y_true) {
  require(logits.same_shape(y_true), ErrorCode::kDimension, "accuracy: shape mismatch");
  if (logits.rows() == 0) return 0.0;
  const auto pred = argmax_rows(logits);
  const auto truth = argmax_rows(y_true);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

AdamState make_adam(std::span<const Matrix* const> params, double lr, double decay) {
  AdamState s;
  s.lr = lr;
  s.decay = decay;
  for (const Matrix* p : params) {
    s.m.emplace_back(p->rows(), p->cols());
    s.v.emplace_back(p->rows(), p->cols());
  }
  return s;
}

void adam_step(AdamState& s, std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
  require(params.size() == grads.size() && params.size() == s.m.size(), ErrorCode::kDimension,
          "adam_step: parameter/gradient count mismatch");
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(params[k]->same_shape(*grads[k]) && params[k]->same_shape(s.m[k]), ErrorCode::kDimension,
            "adam_step: gradient shape mismatch");
    auto p = params[k]->data();
    auto g = grads[k]->data();
    auto m = s.m[k].data();
    auto v = s.v[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
}

void adam_end_epoch(AdamState& s) { s.lr *= s.decay; }

}  // namespace nopeek
