#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nopeek/burnin.hpp"
#include "nopeek/loss.hpp"
#include "nopeek/wire.hpp"

namespace nopeek {

/// Everything a client/server session (and the experiment harness built on
/// it) is parameterised by. Both peers read the same file.
struct SessionConfig {
  NoPeekWeights weights;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  std::size_t split_index = 5;
  std::vector<std::size_t> hidden = {256, 64, 32};
  double lr = 1e-3;
  double lr_decay = 0.95;

  BurninMode burnin_mode = BurninMode::kOff;
  std::size_t burnin_iters = 100;
  /// Burn-in runs on the first min(n, burnin_samples) training rows.
  std::size_t burnin_samples = 256;
  std::size_t prefit_steps = 200;

  /// Half-width of the uniform noise added to Z before sending, relative to
  /// max|Z| of the batch. 0 disables the noise baseline.
  double noise_scale = 0.0;
  std::uint64_t seed = 0;

  /// Dataset attributes trained as server heads.
  std::vector<std::string> heads = {"class"};
  /// When set, the client decorrelates Z from this attribute instead of X.
  std::string protect;
  /// Reject a two-class protected attribute instead of decorrelating it.
  bool exclude_binary_protected = false;
  wire::DType wire_dtype = wire::DType::kF32;

  std::string addr = "127.0.0.1";
  std::uint16_t port = 5555;
  std::string checkpoint = "nopeek_client.ckpt";

  // Experiment harness.
  std::size_t n_train = 1000;
  std::size_t n_holdout = 500;
  std::string dataset = "stripes";
  std::size_t dcor_eval_samples = 256;
  std::size_t attack_epochs = 200;
  double attack_lr = 1e-3;
  std::size_t attack_batch = 32;
  double leak_fraction = 1.0;

  /// Throws kConfig on any out-of-range value.
  void validate() const;
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys and
/// malformed values are kConfig errors naming the line.
SessionConfig parse_config(std::string_view text);
SessionConfig load_config(const std::string& path);
/// Applies one key/value on top of cfg (used by the parser and CLI overrides).
void set_config_value(SessionConfig& cfg, std::string_view key, std::string_view value);
/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const SessionConfig& cfg);

}  // namespace nopeek
