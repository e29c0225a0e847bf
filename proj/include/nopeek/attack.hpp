#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nopeek/matrix.hpp"
#include "nopeek/model.hpp"

// Reconstruction-attack testbed. The attacker only ever sees (Z, x) pairs;
// harvest_pairs is the single place that touches a defended model.
namespace nopeek {

struct LeakedPairSet {
  Matrix z_train;
  Matrix x_train;
  Matrix z_test;
  Matrix x_test;
  std::vector<std::size_t> train_ids;  // row indices into the source data
  std::vector<std::size_t> test_ids;
  double leak_fraction = 1.0;
};

/// Seeded split of (z, x) rows: 10% (rounded) attacker-test, and
/// leak_fraction of the remaining 90% as attacker-train.
LeakedPairSet make_pair_set(const Matrix& z, const Matrix& x, std::uint64_t seed, double leak_fraction = 1.0);

/// Pairs (forward_client(model, x), x) from held-out data.
LeakedPairSet harvest_pairs(const SplitModel& model, const Matrix& x_holdout, std::uint64_t seed,
                            double leak_fraction = 1.0);

/// Dense upsampling decoder dz -> input dim. Widths double from 2*dz while
/// below the input dim (relu after each), then a final linear layer. Inputs
/// are standardized with the attacker-train statistics.
struct Decoder {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
  std::vector<double> z_mean;
  std::vector<double> z_scale;

  std::size_t in_dim() const { return weights.front().rows(); }
  std::size_t out_dim() const { return weights.back().cols(); }
};

std::vector<std::size_t> decoder_widths(std::size_t dz, std::size_t input_dim);
Decoder make_decoder(std::size_t dz, std::size_t input_dim, std::uint64_t seed);
Matrix decode(const Decoder& d, const Matrix& z);

struct AttackOptions {
  std::size_t epochs = 200;
  double lr = 1e-3;
  double lr_decay = 0.95;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct AttackTraining {
  Decoder decoder;
  std::vector<double> epoch_losses;  // mean squared error per element
};

/// Adam on mean |x - x_hat|^2. A non-finite loss raises kTraining.
AttackTraining train_attacker(const LeakedPairSet& pairs, const AttackOptions& opt);

struct AttackReport {
  std::vector<std::size_t> sample_ids;
  std::vector<double> l2_error;  // |x - x_hat|_2 per test sample
  double mse = 0.0;              // mean over samples and features of (x - x_hat)^2
  double mean_l2 = 0.0;
  double median_l2 = 0.0;
  double q1_l2 = 0.0;
  double q3_l2 = 0.0;
  /// MSE of predicting the attacker-train mean of x: the no-information bound.
  double mean_predictor_mse = 0.0;
  std::size_t n_train = 0;
};

AttackReport evaluate_attack(const Decoder& d, const LeakedPairSet& pairs);
/// Scores arbitrary reconstructions against x (rows aligned).
AttackReport score_reconstruction(const Matrix& x, const Matrix& x_hat, const Matrix& x_train);

/// "sample_id,l2_error" rows.
std::string attack_csv(const AttackReport& r);
/// JSON summary: mean, median, q1, q3, mse, mean_predictor_mse, counts.
std::string attack_json(const AttackReport& r);

/// Pair dump: "NPKP", u32 count, then per pair z and x as wire tensors.
std::vector<std::uint8_t> encode_pairs(const Matrix& z, const Matrix& x);
std::pair<Matrix, Matrix> decode_pairs(std::span<const std::uint8_t> bytes);

}  // namespace nopeek
