#include "nopeek/depmeasure.hpp"
#include "nopeek/errors.hpp"
#include "nopeek/splitnet.hpp"
#include "session_common.hpp"
#include "log.hpp"

namespace nopeek {

ClientLog train_unsplit(const SessionConfig& cfg, const Dataset& train, const ClientHooks& hooks) {
  cfg.validate();
  const detail::HeadData heads = detail::head_data(cfg, train);
  ClientLog log;
  log.model = make_session_model(cfg, train.dim(), heads.specs);
  SplitModel& model = log.model;
  log.burnin = client_burnin(cfg, train, model, &log.prefit_mse);
  if (log.burnin && hooks.on_burnin_done) hooks.on_burnin_done(*log.burnin);
  if (hooks.on_training_start) hooks.on_training_start(model);

  const Matrix& dep = detail::dependence_source(cfg, train);
  AdamState client_adam = make_adam(std::as_const(model).client_parameters(), cfg.lr, cfg.lr_decay);
  AdamState server_adam = make_adam(std::as_const(model).server_parameters(), cfg.lr, cfg.lr_decay);
  Rng shuffle = detail::shuffle_rng(cfg);
  Rng noise = detail::noise_rng(cfg);

  auto step = [](AdamState& adam, std::vector<Matrix*> params, const Binding& bind) {
    std::vector<const Matrix*> grads;
    for (ad::Var p : bind.params) grads.push_back(&p.grad());
    adam_step(adam, params, grads);
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0, server_sum = 0.0, seen = 0.0;
    std::vector<double> correct(heads.specs.size(), 0.0);
    const auto batches = epoch_batches(train.size(), cfg.batch_size, shuffle);
    for (const auto& rows : batches) {
      ad::Tape tape;
      Binding cbind, sbind;
      ad::Var x = tape.constant(gather_rows(train.x, rows));
      ad::Var z = forward_client(model, tape, x, &cbind);
      ad::Var zs = z;
      if (cfg.noise_scale > 0.0) {
        const Matrix& zv = z.value();
        const Matrix noisy = add_noise_baseline(zv, cfg.noise_scale * max_abs(zv), noise);
        zs = ad::add(z, tape.constant(noisy - zv));
      }
      std::vector<ad::Var> logits = forward_server(model, tape, zs, &sbind);
      std::vector<Matrix> labels;
      labels.reserve(heads.attributes.size());
      for (const Attribute* a : heads.attributes) labels.push_back(gather_rows(a->onehot, rows));
      std::vector<HeadTarget> targets;
      for (std::size_t h = 0; h < labels.size(); ++h) targets.push_back(HeadTarget{heads.specs[h].name, logits[h], &labels[h]});

      ad::Var task = weighted_cce(targets, cfg.weights.alpha2);
      ad::Var total = task;
      ad::Var local;
      if (cfg.weights.alpha1 > 0.0) {
        local = ad::scale(dcor(tape.constant(gather_rows(dep, rows)), z), cfg.weights.alpha1);
        total = ad::add(local, task);
      }
      tape.backward(total);
      step(client_adam, model.client_parameters(), cbind);
      step(server_adam, model.server_parameters(), sbind);

      // Logged the way a split session reports it: local dcor term + server loss.
      const double server_loss = task.value()(0, 0);
      const double loss = local.valid() ? local.value()(0, 0) + server_loss : server_loss;
      log.step_losses.push_back(loss);
      loss_sum += loss;
      server_sum += server_loss;
      for (std::size_t h = 0; h < labels.size(); ++h)
        correct[h] += accuracy(logits[h].value(), labels[h]) * double(rows.size());
      seen += double(rows.size());
    }
    adam_end_epoch(client_adam);
    adam_end_epoch(server_adam);
    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / double(batches.size());
    em.server_loss = server_sum / double(batches.size());
    for (double c : correct) em.head_accuracy.push_back(c / seen);
    detail::logger().debug("unsplit epoch {}: loss {:.6f}", epoch, em.train_loss);
    log.epochs.push_back(em);
    if (hooks.on_epoch_end) hooks.on_epoch_end(model, em);
  }
  return log;
}

}  // namespace nopeek
