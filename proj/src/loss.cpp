#include "nopeek/loss.hpp"

#include <cmath>

#include "nopeek/depmeasure.hpp"
#include "nopeek/errors.hpp"
#include "nopeek/model.hpp"

namespace nopeek {

void NoPeekWeights::validate() const {
  require(std::isfinite(alpha1) && alpha1 >= 0.0, ErrorCode::kConfig, "alpha1 must be finite and >= 0");
  require(std::isfinite(alpha2) && alpha2 >= 0.0, ErrorCode::kConfig, "alpha2 must be finite and >= 0");
  require(alpha1 > 0.0 || alpha2 > 0.0, ErrorCode::kConfig, "alpha1 and alpha2 cannot both be 0");
}

ad::Var weighted_cce(std::span<const HeadTarget> heads, double alpha2) {
  require(!heads.empty(), ErrorCode::kConfig, "loss needs at least one head");
  ad::Var total = cce(heads[0].logits, *heads[0].labels);
  for (std::size_t i = 1; i < heads.size(); ++i) total = ad::add(total, cce(heads[i].logits, *heads[i].labels));
  return ad::scale(total, alpha2);
}

namespace {

ad::Var combine(ad::Var dep_source, ad::Var z, std::span<const HeadTarget> heads, const NoPeekWeights& w) {
  w.validate();
  require(dep_source.rows() == z.rows(), ErrorCode::kDimension, "dependence source and Z differ in batch size");
  for (const HeadTarget& h : heads)
    require(h.labels && h.labels->rows() == z.rows(), ErrorCode::kDimension, "labels for head " + h.name +
                                                                                 " differ in batch size");
  ad::Var task = weighted_cce(heads, w.alpha2);
  if (w.alpha1 == 0.0) return task;
  return ad::add(ad::scale(dcor(dep_source, z), w.alpha1), task);
}

}  // namespace

ad::Var nopeek_loss(ad::Var x, ad::Var z, std::span<const HeadTarget> heads, const NoPeekWeights& w) {
  return combine(x, z, heads, w);
}

ad::Var nopeek_loss(ad::Var x, ad::Var z, ad::Var logits, const Matrix& y_true, const NoPeekWeights& w) {
  const HeadTarget head{"y", logits, &y_true};
  return combine(x, z, std::span<const HeadTarget>(&head, 1), w);
}

ad::Var attribute_loss(const Matrix& protected_onehot, std::string_view protected_name, ad::Var z,
                       std::span<const HeadTarget> kept, const NoPeekWeights& w, bool exclude_binary) {
  require(!(exclude_binary && protected_onehot.cols() == 2), ErrorCode::kConfig,
          "binary protected attribute '" + std::string(protected_name) + "' is excluded by configuration");
  for (const HeadTarget& h : kept)
    require(h.name != protected_name, ErrorCode::kConfig,
            "protected attribute '" + std::string(protected_name) + "' is also trained as a head");
  ad::Var s = z.tape()->constant(protected_onehot);
  return combine(s, z, kept, w);
}

}  // namespace nopeek
