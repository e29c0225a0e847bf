#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "nopeek/burnin.hpp"
#include "nopeek/config.hpp"
#include "nopeek/dataset.hpp"
#include "nopeek/model.hpp"
#include "nopeek/rng.hpp"
#include "nopeek/transport.hpp"

// Split-learning session over a Transport.
//
//   client                                   server
//   [burn-in + prefit, no traffic]
//   HELLO [input_dim, z_dim, heads, classes..] ->
//                                     <- HELLO (echo)
//   ACTIVATION id=k [Z, Y_head...]          ->
//                                     <- GRADIENT id=k [dLoss/dZ, loss]
//   ... one batch in flight ...
//   EPOCH_END id=epoch                      ->
//                                     <- METRICS id=epoch [epoch, loss, acc...]
//   SHUTDOWN                                ->
//
// batch_id of ACTIVATION frames counts up from 1 across the whole session.
namespace nopeek {

struct EpochMetrics {
  std::size_t epoch = 0;
  /// Mean over batches of alpha1 * dcor + alpha2 * CCE.
  double train_loss = 0.0;
  /// Mean over batches of the server-side part alpha2 * CCE.
  double server_loss = 0.0;
  /// Training accuracy per head, measured by the server on what it received.
  std::vector<double> head_accuracy;
};

struct ClientHooks {
  std::function<void(const BurninResult&)> on_burnin_done;
  /// Fires once, after burn-in and before the first batch.
  std::function<void(const SplitModel&)> on_training_start;
  std::function<void(const SplitModel&, const EpochMetrics&)> on_epoch_end;
};

struct ClientLog {
  std::vector<double> step_losses;
  std::vector<EpochMetrics> epochs;
  std::optional<BurninResult> burnin;
  double prefit_mse = 0.0;
  SplitModel model;
  std::size_t activations_sent = 0;
};

struct ServerLog {
  std::vector<double> step_losses;
  std::vector<EpochMetrics> epochs;
  SplitModel model;
  std::size_t activations_received = 0;
};

/// Model both peers build from the shared config; layer and head weights
/// derive from (seed, "init") so each side can build its half independently.
SplitModel make_session_model(const SessionConfig& cfg, std::size_t input_dim, std::span<const HeadSpec> heads);

/// Shuffled batches of one epoch; the incomplete tail batch is dropped.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng);

/// Z + U(-scale, scale) elementwise.
Matrix add_noise_baseline(const Matrix& z, double scale, Rng& rng);

/// Burn-in on the first rows of `train` followed by the client prefit.
/// Touches nothing but the model; returns nullopt when burn-in is off.
std::optional<BurninResult> client_burnin(const SessionConfig& cfg, const Dataset& train, SplitModel& model,
                                          double* prefit_mse = nullptr);

/// Client side of a session. On connection loss the client model is written
/// to cfg.checkpoint (when non-empty) before the kIo error propagates.
ClientLog run_client(const SessionConfig& cfg, const Dataset& train, Transport& t, const ClientHooks& hooks = {});

/// Server side; returns after SHUTDOWN. Out-of-order batches and malformed
/// payloads raise kProtocol after an ERROR frame is sent.
ServerLog run_server(const SessionConfig& cfg, Transport& t);

/// Single-process reference: the same model, batches, noise and loss as a
/// split session, differentiated jointly.
ClientLog train_unsplit(const SessionConfig& cfg, const Dataset& train, const ClientHooks& hooks = {});

}  // namespace nopeek
