#include "nopeek/splitnet.hpp"

#include <algorithm>
#include <cmath>

#include "nopeek/checkpoint.hpp"
#include "nopeek/depmeasure.hpp"
#include "nopeek/errors.hpp"
#include "session_common.hpp"
#include "log.hpp"

namespace nopeek {

using wire::MsgType;
using wire::Tensor;
using wire::WireMessage;

namespace detail {

HeadData head_data(const SessionConfig& cfg, const Dataset& train) {
  HeadData h;
  for (const std::string& name : cfg.heads) {
    const Attribute& a = train.attribute(name);
    h.specs.push_back(HeadSpec{a.name, a.classes});
    h.attributes.push_back(&a);
  }
  return h;
}

const Matrix& dependence_source(const SessionConfig& cfg, const Dataset& train) {
  if (cfg.protect.empty()) return train.x;
  const Attribute& a = train.attribute(cfg.protect);
  require(!(cfg.exclude_binary_protected && a.classes == 2), ErrorCode::kConfig,
          "binary protected attribute '" + a.name + "' is excluded by configuration");
  return a.onehot;
}

}  // namespace detail

SplitModel make_session_model(const SessionConfig& cfg, std::size_t input_dim, std::span<const HeadSpec> heads) {
  ModelConfig mc;
  mc.hidden = cfg.hidden;
  mc.split_index = cfg.split_index;
  return build_model(input_dim, mc, heads, Rng::derive_seed(cfg.seed, "init"));
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  require(n >= batch_size, ErrorCode::kConfig,
          "batch_size " + std::to_string(batch_size) + " exceeds training set size " + std::to_string(n));
  const std::vector<std::size_t> perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b + batch_size <= n; b += batch_size)
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(b), perm.begin() + static_cast<std::ptrdiff_t>(b + batch_size));
  return out;
}

Matrix add_noise_baseline(const Matrix& z, double scale, Rng& rng) {
  require(scale >= 0.0 && std::isfinite(scale), ErrorCode::kConfig, "noise scale must be finite and >= 0");
  if (scale == 0.0) return z;
  return z + rng_uniform(rng, z.rows(), z.cols(), -scale, scale);
}

std::optional<BurninResult> client_burnin(const SessionConfig& cfg, const Dataset& train, SplitModel& model,
                                          double* prefit_mse) {
  if (cfg.burnin_mode == BurninMode::kOff) return std::nullopt;
  const std::size_t m = std::min(train.size(), cfg.burnin_samples);
  std::vector<std::size_t> rows(m);
  for (std::size_t i = 0; i < m; ++i) rows[i] = i;
  const Matrix xb = gather_rows(train.x, rows);
  const Matrix yb = gather_rows(train.attribute(cfg.heads.front()).onehot, rows);
  BurninOptions opt;
  opt.mode = cfg.burnin_mode;
  opt.iterations = cfg.burnin_iters;
  BurninResult r = run_burnin(xb, yb, forward_client(model, xb), opt);
  const double mse = prefit_client(model, xb, shift_nonnegative(r.state.z), cfg.prefit_steps, cfg.lr);
  if (prefit_mse) *prefit_mse = mse;
  detail::logger().info("burn-in: {} iterations, f {:.6f} -> {:.6f}, prefit mse {:.3g}", r.state.iteration,
               r.state.f_history.front(), r.state.f_history.back(), mse);
  return r;
}

namespace {

std::vector<double> hello_fields(const SplitModel& m) {
  std::vector<double> f = {double(m.input_dim()), double(m.z_dim()), double(m.heads.size())};
  for (const Head& h : m.heads) f.push_back(double(h.classes));
  return f;
}

Tensor vector_tensor(const std::vector<double>& v) {
  Tensor t;
  t.dtype = wire::DType::kF64;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.values = v;
  return t;
}

[[noreturn]] void protocol_error(Transport& t, std::uint64_t batch, const std::string& what) {
  try {
    t.send_message(WireMessage{MsgType::kError, static_cast<std::uint64_t>(ErrorCode::kProtocol), {}});
  } catch (const Error&) {
  }
  fail(ErrorCode::kProtocol, "batch " + std::to_string(batch) + ": " + what);
}

WireMessage expect(Transport& t, MsgType type, std::uint64_t batch_id) {
  WireMessage m = t.recv_message();
  if (m.type == MsgType::kError)
    fail(ErrorCode::kProtocol, "peer reported error code " + std::to_string(m.batch_id));
  if (m.type != type || m.batch_id != batch_id)
    protocol_error(t, batch_id, "expected " + std::string(wire::to_string(type)) + " id " + std::to_string(batch_id) +
                                    ", got " + std::string(wire::to_string(m.type)) + " id " + std::to_string(m.batch_id));
  return m;
}

void step_params(AdamState& adam, std::vector<Matrix*> params, const Binding& bind) {
  std::vector<const Matrix*> grads;
  grads.reserve(bind.params.size());
  for (ad::Var p : bind.params) grads.push_back(&p.grad());
  adam_step(adam, params, grads);
}

AdamState adam_for(std::vector<const Matrix*> params, const SessionConfig& cfg) {
  return make_adam(params, cfg.lr, cfg.lr_decay);
}

}  // namespace

ClientLog run_client(const SessionConfig& cfg, const Dataset& train, Transport& t, const ClientHooks& hooks) {
  cfg.validate();
  const detail::HeadData heads = detail::head_data(cfg, train);
  ClientLog log;
  log.model = make_session_model(cfg, train.dim(), heads.specs);
  SplitModel& model = log.model;

  // Everything up to here, and burn-in itself, is local: no frame is sent
  // before the burn-in hook fires.
  log.burnin = client_burnin(cfg, train, model, &log.prefit_mse);
  if (log.burnin && hooks.on_burnin_done) hooks.on_burnin_done(*log.burnin);
  if (hooks.on_training_start) hooks.on_training_start(model);

  const Matrix& dep = detail::dependence_source(cfg, train);
  AdamState adam = adam_for(std::as_const(model).client_parameters(), cfg);
  Rng shuffle = detail::shuffle_rng(cfg);
  Rng noise = detail::noise_rng(cfg);

  try {
    t.send_message(WireMessage{MsgType::kHello, 0, {vector_tensor(hello_fields(model))}});
    const WireMessage hello = expect(t, MsgType::kHello, 0);
    if (hello.tensors.size() != 1 || hello.tensors[0].values != hello_fields(model))
      protocol_error(t, 0, "server HELLO does not match the client model");

    std::uint64_t batch_id = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      double loss_sum = 0.0, server_sum = 0.0;
      const auto batches = epoch_batches(train.size(), cfg.batch_size, shuffle);
      for (const auto& rows : batches) {
        ++batch_id;
        ad::Tape tape;
        Binding bind;
        ad::Var x = tape.constant(gather_rows(train.x, rows));
        ad::Var z = forward_client(model, tape, x, &bind);
        const Matrix& zv = z.value();
        const Matrix sent =
            cfg.noise_scale > 0.0 ? add_noise_baseline(zv, cfg.noise_scale * max_abs(zv), noise) : zv;

        WireMessage act{MsgType::kActivation, batch_id, {Tensor::from_matrix(sent, cfg.wire_dtype)}};
        for (const Attribute* a : heads.attributes)
          act.tensors.push_back(Tensor::from_matrix(gather_rows(a->onehot, rows), cfg.wire_dtype));
        t.send_message(act);
        ++log.activations_sent;

        const WireMessage grad = expect(t, MsgType::kGradient, batch_id);
        if (grad.tensors.size() != 2) protocol_error(t, batch_id, "GRADIENT must carry [dZ, loss]");
        const Matrix dz = grad.tensors[0].to_matrix();
        if (dz.rows() != zv.rows() || dz.cols() != zv.cols())
          protocol_error(t, batch_id, "gradient shape " + dz.shape_string() + " != Z shape " + zv.shape_string());
        const double server_loss = grad.tensors[1].to_matrix()(0, 0);

        double loss = server_loss;
        const ad::Seed seed{z, &dz};
        if (cfg.weights.alpha1 > 0.0) {
          ad::Var local = ad::scale(dcor(tape.constant(gather_rows(dep, rows)), z), cfg.weights.alpha1);
          loss = local.value()(0, 0) + server_loss;
          tape.backward(local, std::span<const ad::Seed>(&seed, 1));
        } else {
          tape.backward(std::span<const ad::Seed>(&seed, 1));
        }
        step_params(adam, model.client_parameters(), bind);
        log.step_losses.push_back(loss);
        loss_sum += loss;
        server_sum += server_loss;
      }
      adam_end_epoch(adam);

      t.send_message(WireMessage{MsgType::kEpochEnd, epoch, {}});
      const WireMessage met = expect(t, MsgType::kMetrics, epoch);
      if (met.tensors.size() != 1 || met.tensors[0].values.size() != 2 + heads.specs.size())
        protocol_error(t, epoch, "malformed METRICS payload");
      EpochMetrics em;
      em.epoch = epoch;
      em.train_loss = loss_sum / double(batches.size());
      em.server_loss = server_sum / double(batches.size());
      em.head_accuracy.assign(met.tensors[0].values.begin() + 2, met.tensors[0].values.end());
      detail::logger().info("client epoch {}: loss {:.6f}, acc[0] {:.4f}", epoch, em.train_loss, em.head_accuracy.front());
      log.epochs.push_back(em);
      if (hooks.on_epoch_end) hooks.on_epoch_end(model, em);
    }
    t.send_message(WireMessage{MsgType::kShutdown, batch_id + 1, {}});
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo && !cfg.checkpoint.empty()) {
      detail::logger().error("connection lost ({}); writing checkpoint {}", e.what(), cfg.checkpoint);
      save_checkpoint(model, cfg.checkpoint);
    }
    throw;
  }
  return log;
}

ServerLog run_server(const SessionConfig& cfg, Transport& t) {
  cfg.validate();
  ServerLog log;
  const WireMessage hello = expect(t, MsgType::kHello, 0);
  if (hello.tensors.size() != 1) protocol_error(t, 0, "HELLO must carry one tensor");
  const std::vector<double>& f = hello.tensors[0].values;
  if (f.size() < 3 || f[2] != double(cfg.heads.size()) || f.size() != 3 + cfg.heads.size())
    protocol_error(t, 0, "HELLO head count does not match the server config");
  std::vector<HeadSpec> specs;
  for (std::size_t h = 0; h < cfg.heads.size(); ++h) {
    if (!(f[3 + h] >= 2.0)) protocol_error(t, 0, "head with fewer than 2 classes");
    specs.push_back(HeadSpec{cfg.heads[h], static_cast<std::size_t>(f[3 + h])});
  }
  if (!(f[0] >= 1.0)) protocol_error(t, 0, "bad input_dim");
  log.model = make_session_model(cfg, static_cast<std::size_t>(f[0]), specs);
  SplitModel& model = log.model;
  if (double(model.z_dim()) != f[1]) protocol_error(t, 0, "client z_dim disagrees with the server split");
  t.send_message(WireMessage{MsgType::kHello, 0, {vector_tensor(hello_fields(model))}});

  AdamState adam = adam_for(std::as_const(model).server_parameters(), cfg);
  std::uint64_t last_batch = 0;
  std::size_t epoch_batches_seen = 0;
  double loss_sum = 0.0;
  std::vector<double> correct(specs.size(), 0.0);
  double seen = 0.0;

  while (true) {
    WireMessage m = t.recv_message();
    if (m.type == MsgType::kShutdown) break;
    if (m.type == MsgType::kError) fail(ErrorCode::kProtocol, "client reported error code " + std::to_string(m.batch_id));
    if (m.type == MsgType::kActivation) {
      if (m.batch_id != last_batch + 1)
        protocol_error(t, m.batch_id, "out-of-order batch_id (expected " + std::to_string(last_batch + 1) + ")");
      last_batch = m.batch_id;
      if (m.tensors.size() != 1 + specs.size()) protocol_error(t, m.batch_id, "ACTIVATION tensor count");
      const Matrix zin = m.tensors[0].to_matrix();
      if (zin.cols() != model.z_dim() || zin.rows() < 1) protocol_error(t, m.batch_id, "Z shape " + zin.shape_string());
      std::vector<Matrix> labels;
      for (std::size_t h = 0; h < specs.size(); ++h) {
        labels.push_back(m.tensors[1 + h].to_matrix());
        if (labels.back().rows() != zin.rows() || labels.back().cols() != specs[h].classes)
          protocol_error(t, m.batch_id, "label shape for head " + specs[h].name);
      }

      ad::Tape tape;
      Binding bind;
      ad::Var z = tape.variable(zin);
      std::vector<ad::Var> logits;
      std::vector<HeadTarget> targets;
      try {
        logits = forward_server(model, tape, z, &bind);
        for (std::size_t h = 0; h < specs.size(); ++h) targets.push_back(HeadTarget{specs[h].name, logits[h], &labels[h]});
        ad::Var loss = weighted_cce(targets, cfg.weights.alpha2);
        tape.backward(loss);
        const double lv = loss.value()(0, 0);

        Tensor loss_t = Tensor::from_matrix(loss.value(), wire::DType::kF64);
        t.send_message(WireMessage{MsgType::kGradient, m.batch_id,
                                   {Tensor::from_matrix(z.grad(), m.tensors[0].dtype), std::move(loss_t)}});
        step_params(adam, model.server_parameters(), bind);
        log.step_losses.push_back(lv);
        loss_sum += lv;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kLabel) protocol_error(t, m.batch_id, e.what());
        throw;
      }
      for (std::size_t h = 0; h < specs.size(); ++h)
        correct[h] += accuracy(logits[h].value(), labels[h]) * double(zin.rows());
      seen += double(zin.rows());
      ++epoch_batches_seen;
      ++log.activations_received;
    } else if (m.type == MsgType::kEpochEnd) {
      if (m.batch_id != log.epochs.size() + 1) protocol_error(t, m.batch_id, "out-of-order EPOCH_END");
      EpochMetrics em;
      em.epoch = m.batch_id;
      em.server_loss = epoch_batches_seen ? loss_sum / double(epoch_batches_seen) : 0.0;
      em.train_loss = em.server_loss;
      std::vector<double> payload = {double(em.epoch), em.server_loss};
      for (double c : correct) {
        em.head_accuracy.push_back(seen > 0 ? c / seen : 0.0);
        payload.push_back(em.head_accuracy.back());
      }
      t.send_message(WireMessage{MsgType::kMetrics, em.epoch, {vector_tensor(payload)}});
      adam_end_epoch(adam);
      detail::logger().info("server epoch {}: loss {:.6f}", em.epoch, em.server_loss);
      log.epochs.push_back(em);
      loss_sum = 0.0;
      seen = 0.0;
      epoch_batches_seen = 0;
      std::fill(correct.begin(), correct.end(), 0.0);
    } else {
      protocol_error(t, m.batch_id, "unexpected " + std::string(wire::to_string(m.type)));
    }
  }
  return log;
}

}  // namespace nopeek
