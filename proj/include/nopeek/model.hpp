#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nopeek/autodiff.hpp"
#include "nopeek/matrix.hpp"

namespace nopeek {

enum class LayerKind : std::uint8_t { kDense = 0, kRelu = 1, kPatchDense = 2, kFlatten = 3 };

std::string_view to_string(LayerKind kind);

/// Locally connected layer geometry over an interleaved (y, x, channel) image.
/// Each output position sees only its kernel x kernel window; weights are not
/// shared between positions.
struct PatchGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t out_channels = 1;

  std::size_t out_height() const { return (height - kernel) / stride + 1; }
  std::size_t out_width() const { return (width - kernel) / stride + 1; }
  std::size_t in_dim() const { return height * width * channels; }
  std::size_t out_dim() const { return out_height() * out_width() * out_channels; }
  void validate() const;

  friend bool operator==(const PatchGeometry&, const PatchGeometry&) = default;
};

/// 0/1 connectivity (in_dim x out_dim) of a patch-dense layer.
Matrix patch_mask(const PatchGeometry& g);

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::uint64_t init_seed = 0;
  std::optional<PatchGeometry> patch;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Layer {
  LayerSpec spec;
  Matrix weight;  // in_dim x out_dim (dense, patch-dense)
  Matrix bias;    // 1 x out_dim
  Matrix mask;    // patch-dense connectivity, same shape as weight

  bool has_params() const { return spec.kind == LayerKind::kDense || spec.kind == LayerKind::kPatchDense; }

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct Head {
  std::string name;
  std::size_t classes = 0;
  Matrix weight;
  Matrix bias;

  friend bool operator==(const Head&, const Head&) = default;
};

struct HeadSpec {
  std::string name;
  std::size_t classes = 0;
};

/// Layer stack cut after `split_index` layers: layers [0, split_index) run on
/// the client and produce Z; the rest, plus every head, run on the server.
struct SplitModel {
  std::vector<Layer> layers;
  std::vector<Head> heads;
  std::size_t split_index = 0;

  std::size_t input_dim() const { return layers.front().spec.in_dim; }
  std::size_t z_dim() const { return layers[split_index - 1].spec.out_dim; }
  std::size_t shared_dim() const { return layers.back().spec.out_dim; }

  /// Throws kConfig on broken chaining or an out-of-range split.
  void validate() const;

  std::vector<Matrix*> client_parameters();
  std::vector<Matrix*> server_parameters();
  std::vector<const Matrix*> client_parameters() const;
  std::vector<const Matrix*> server_parameters() const;

  friend bool operator==(const SplitModel&, const SplitModel&) = default;
};

struct ModelConfig {
  /// Widths of the dense+relu blocks after the input flatten.
  std::vector<std::size_t> hidden = {256, 64, 32};
  /// Default cuts after the second relu: flatten, dense, relu, dense, relu | ...
  std::size_t split_index = 5;
  /// When set, a patch-dense + relu block precedes the dense blocks.
  std::optional<PatchGeometry> patch;
};

SplitModel build_model(std::size_t input_dim, const ModelConfig& cfg, std::span<const HeadSpec> heads,
                       std::uint64_t init_seed);

/// Tape leaves for one side's parameters, in client_/server_parameters() order.
struct Binding {
  std::vector<ad::Var> params;
};

ad::Var forward_client(const SplitModel& m, ad::Tape& tape, ad::Var x, Binding* bind = nullptr);
std::vector<ad::Var> forward_server(const SplitModel& m, ad::Tape& tape, ad::Var z, Binding* bind = nullptr);

Matrix forward_client(const SplitModel& m, const Matrix& x);
std::vector<Matrix> forward_server(const SplitModel& m, const Matrix& z);
/// Output of layers [0, upto), for inspecting intermediate activations.
Matrix forward_prefix(const SplitModel& m, const Matrix& x, std::size_t upto);

/// Mean softmax cross-entropy against one-hot labels.
ad::Var cce(ad::Var logits, const Matrix& y_true);
double cce(const Matrix& logits, const Matrix& y_true);

double accuracy(const Matrix& logits, const Matrix& y_true);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Multiplies lr at every epoch boundary.
  double decay = 0.95;
  std::uint64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

AdamState make_adam(std::span<const Matrix* const> params, double lr = 1e-3, double decay = 0.95);
void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads);
void adam_end_epoch(AdamState& state);

}  // namespace nopeek
