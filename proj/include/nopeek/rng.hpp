#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nopeek/matrix.hpp"

namespace nopeek {

/// xoshiro256** seeded through splitmix64. Every draw is produced by this
/// file's own transforms (no std:: distributions), so a seed reproduces the
/// same stream on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream for a named purpose ("data", "init", "noise", ...).
  static Rng substream(std::uint64_t master_seed, std::string_view name);
  static std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view name);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

Matrix rng_normal(Rng& rng, std::size_t rows, std::size_t cols, double mean, double stddev);
Matrix rng_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);

}  // namespace nopeek
