#pragma once

#include <span>
#include <string>
#include <string_view>

#include "nopeek/autodiff.hpp"
#include "nopeek/matrix.hpp"

namespace nopeek {

/// Weights of the combined objective alpha1 * DCOR(X, Z) + alpha2 * CCE.
/// alpha1 = 0 is plain (baseline) training.
struct NoPeekWeights {
  double alpha1 = 0.5;
  double alpha2 = 1.0;

  /// Throws kConfig unless both are finite and >= 0 with at least one > 0.
  /// (Training sessions additionally require alpha2 > 0.)
  void validate() const;
};

struct HeadTarget {
  std::string name;
  ad::Var logits;
  const Matrix* labels = nullptr;
};

/// alpha1 * dcor(X, Z) + alpha2 * sum of per-head CCE. The dcor term is not
/// recorded at all when alpha1 == 0, so the result is then exactly alpha2 * CCE.
ad::Var nopeek_loss(ad::Var x, ad::Var z, std::span<const HeadTarget> heads, const NoPeekWeights& w);
ad::Var nopeek_loss(ad::Var x, ad::Var z, ad::Var logits, const Matrix& y_true, const NoPeekWeights& w);

/// alpha1 * dcor(S, Z) + alpha2 * sum of CCE over the kept heads, where S is
/// the one-hot protected attribute. A kept head named `protected_name` is a
/// configuration error, as is a two-class S when `exclude_binary` is set.
ad::Var attribute_loss(const Matrix& protected_onehot, std::string_view protected_name, ad::Var z,
                       std::span<const HeadTarget> kept, const NoPeekWeights& w, bool exclude_binary = false);

/// Sum of alpha2-weighted CCE over heads (the server-side part of the loss).
ad::Var weighted_cce(std::span<const HeadTarget> heads, double alpha2);

}  // namespace nopeek
