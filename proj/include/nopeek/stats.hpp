#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nopeek/errors.hpp"

namespace nopeek {

/// Linearly interpolated quantile (the "type 7" rule), q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), ErrorCode::kSampleSize, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

inline double mean(const std::vector<double>& v) {
  require(!v.empty(), ErrorCode::kSampleSize, "mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace nopeek
