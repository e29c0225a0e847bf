#pragma once

#include <string>
#include <vector>

#include "nopeek/attack.hpp"
#include "nopeek/burnin.hpp"
#include "nopeek/config.hpp"
#include "nopeek/dataset.hpp"
#include "nopeek/splitnet.hpp"

namespace nopeek {

struct EpochRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::vector<double> head_accuracy;
  double dcor_xz = 0.0;  // on the held-out evaluation rows
  double dcor_yz = 0.0;  // Y = one-hot of the first head
};

struct ExperimentOptions {
  bool run_attack = true;
  /// true: client and server threads over a loopback transport;
  /// false: the single-process reference trainer.
  bool split = true;
  /// Attribute scored by a post-hoc linear probe on held-out Z, fit on a
  /// seeded half of the held-out rows and scored on the other ("" = none).
  std::string probe_attribute;
};

struct ExperimentReport {
  SessionConfig config;
  std::vector<std::string> head_names;
  std::vector<EpochRow> rows;
  double initial_dcor_xz = 0.0;
  double initial_dcor_yz = 0.0;
  std::vector<double> test_accuracy;  // per head, on the held-out rows
  std::vector<BurninTraceRow> burnin_trace;
  bool attacked = false;
  AttackReport attack;
  bool probed = false;
  double probe_accuracy = 0.0;
  SplitModel model;  // client layers from the client, the rest from the server

  double final_dcor_xz() const { return rows.empty() ? initial_dcor_xz : rows.back().dcor_xz; }
};

/// Client layers of `client` joined with the server layers and heads of `server`.
SplitModel merge_models(const SplitModel& client, const SplitModel& server);

/// split (seeded) -> standardize on train -> optional burn-in -> split
/// training -> held-out accuracy -> pair harvest -> attack. Deterministic in
/// (cfg, dataset).
ExperimentReport run_experiment(const SessionConfig& cfg, const Dataset& data, const ExperimentOptions& opt = {});

/// The attack step of run_experiment, on a finished report: re-derives the
/// held-out rows from (r.config, data) and attacks r.model's released Z.
/// Equals what run_experiment would have stored in r.attack.
AttackReport attack_experiment(const ExperimentReport& r, const Dataset& data);

/// Z sent for a batch under the configured noise baseline (identity when
/// noise_scale is 0); used for both held-out scoring and pair harvest.
Matrix released_activations(const SessionConfig& cfg, const SplitModel& model, const Matrix& x);

/// Softmax regression (zero init, full-batch Adam) trained on (z_train,
/// y_train); returns accuracy on (z_test, y_test).
double linear_probe_accuracy(const Matrix& z_train, const Matrix& y_train, const Matrix& z_test, const Matrix& y_test,
                             std::size_t steps = 500);

struct SweepReport {
  std::vector<double> alphas;
  std::vector<ExperimentReport> reports;
};

/// One experiment per alpha1 value, run in parallel (one worker each).
SweepReport sweep_alpha(const SessionConfig& cfg, const Dataset& data, const std::vector<double>& alphas,
                        const ExperimentOptions& opt = {});

/// "epoch,train_loss,acc_<head>...,dcor_xz,dcor_yz"
std::string epochs_csv(const ExperimentReport& r);
std::string summary_json(const ExperimentReport& r);
/// "alpha,accuracy,dcor_xz,attacker_mse"
std::string sweep_csv(const SweepReport& s);

/// Writes epochs.csv, summary.json, burnin.csv (when burn-in ran) and
/// attack.csv (when attacked) into dir.
void write_report(const ExperimentReport& r, const std::string& dir);

}  // namespace nopeek
