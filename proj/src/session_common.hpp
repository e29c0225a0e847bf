#pragma once

#include <vector>

#include "nopeek/splitnet.hpp"

namespace nopeek::detail {

struct HeadData {
  std::vector<HeadSpec> specs;
  std::vector<const Attribute*> attributes;
};

HeadData head_data(const SessionConfig& cfg, const Dataset& train);

/// The sample Z is decorrelated from: X, or the protected attribute.
const Matrix& dependence_source(const SessionConfig& cfg, const Dataset& train);

inline Rng shuffle_rng(const SessionConfig& cfg) { return Rng::substream(cfg.seed, "shuffle"); }
inline Rng noise_rng(const SessionConfig& cfg) { return Rng::substream(cfg.seed, "noise"); }

}  // namespace nopeek::detail
