#include "nopeek/experiment.hpp"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <thread>

#include "json.hpp"
#include "nopeek/byteio.hpp"
#include "nopeek/depmeasure.hpp"
#include "nopeek/kernels.hpp"
#include "nopeek/errors.hpp"
#include "log.hpp"

namespace nopeek {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// dcor that reads a collapsed (constant) representation as "no dependence".
double dcor_or_zero(const Matrix& a, const Matrix& z) {
  try {
    return dcor(a, z);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDegenerateVariance) return 0.0;
    throw;
  }
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  byteio::write_file(p.string(), std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

}  // namespace

SplitModel merge_models(const SplitModel& client, const SplitModel& server) {
  require(client.layers.size() == server.layers.size() && client.split_index == server.split_index,
          ErrorCode::kContract, "client and server models have different shapes");
  SplitModel m = server;
  for (std::size_t i = 0; i < m.split_index; ++i) m.layers[i] = client.layers[i];
  return m;
}

Matrix released_activations(const SessionConfig& cfg, const SplitModel& model, const Matrix& x) {
  Matrix z = forward_client(model, x);
  if (cfg.noise_scale == 0.0) return z;
  Rng rng = Rng::substream(cfg.seed, "noise-eval");
  return add_noise_baseline(z, cfg.noise_scale * max_abs(z), rng);
}

double linear_probe_accuracy(const Matrix& z_train, const Matrix& y_train, const Matrix& z_test, const Matrix& y_test,
                             std::size_t steps) {
  require(z_train.rows() == y_train.rows() && z_test.rows() == y_test.rows(), ErrorCode::kDimension, "probe rows");
  const Normalization nm = fit_normalization(z_train);
  const Matrix zs = apply_normalization(z_train, nm);
  Matrix w(z_train.cols(), y_train.cols());
  Matrix b(1, y_train.cols());
  std::vector<Matrix*> params = {&w, &b};
  std::vector<const Matrix*> cparams = {&w, &b};
  AdamState adam = make_adam(cparams, 1e-2, 1.0);
  for (std::size_t s = 0; s < steps; ++s) {
    ad::Tape tape;
    ad::Var wv = tape.variable(w), bv = tape.variable(b);
    ad::Var logits = ad::add_row(ad::matmul(tape.constant(zs), wv), bv);
    tape.backward(cce(logits, y_train));
    std::vector<const Matrix*> grads = {&wv.grad(), &bv.grad()};
    adam_step(adam, params, grads);
  }
  Matrix logits = kernels::matmul(apply_normalization(z_test, nm), w);
  for (std::size_t i = 0; i < logits.rows(); ++i)
    for (std::size_t j = 0; j < logits.cols(); ++j) logits(i, j) += b(0, j);
  return accuracy(logits, y_test);
}

namespace {

AttackReport attack_holdout(const SessionConfig& cfg, const Matrix& z_hold, const Matrix& x_hold) {
  const LeakedPairSet pairs = make_pair_set(z_hold, x_hold, cfg.seed, cfg.leak_fraction);
  AttackOptions ao;
  ao.epochs = cfg.attack_epochs;
  ao.lr = cfg.attack_lr;
  ao.batch_size = cfg.attack_batch;
  ao.seed = cfg.seed;
  return evaluate_attack(train_attacker(pairs, ao).decoder, pairs);
}

}  // namespace

ExperimentReport run_experiment(const SessionConfig& cfg_in, const Dataset& data, const ExperimentOptions& opt) {
  SessionConfig cfg = cfg_in;
  cfg.checkpoint.clear();  // in-process sessions have nothing to resume
  cfg.validate();
  ExperimentReport rep;
  rep.config = cfg;
  rep.head_names = cfg.heads;

  auto [train, hold] = split_dataset(data, cfg.n_train, cfg.n_holdout, cfg.seed);
  Dataset* both[] = {&train, &hold};
  standardize(train, both);

  const std::size_t m_eval = std::min(cfg.dcor_eval_samples, hold.size());
  const Matrix x_eval = slice_rows(hold.x, 0, m_eval);
  const Matrix y_eval = slice_rows(hold.attribute(cfg.heads.front()).onehot, 0, m_eval);
  auto dependence = [&](const SplitModel& model) {
    const Matrix z = forward_client(model, x_eval);
    return std::pair{dcor_or_zero(x_eval, z), dcor_or_zero(y_eval, z)};
  };

  ClientHooks hooks;
  hooks.on_burnin_done = [&](const BurninResult& b) { rep.burnin_trace = b.trace; };
  hooks.on_training_start = [&](const SplitModel& model) {
    std::tie(rep.initial_dcor_xz, rep.initial_dcor_yz) = dependence(model);
  };
  hooks.on_epoch_end = [&](const SplitModel& model, const EpochMetrics& em) {
    EpochRow row{em.epoch, em.train_loss, em.head_accuracy, 0.0, 0.0};
    std::tie(row.dcor_xz, row.dcor_yz) = dependence(model);
    rep.rows.push_back(std::move(row));
  };

  if (opt.split) {
    auto [client_end, server_end] = make_loopback_pair();
    ServerLog slog;
    std::exception_ptr server_error;
    std::thread server([&, &st = *server_end] {
      try {
        slog = run_server(cfg, st);
      } catch (...) {
        server_error = std::current_exception();
        st.close();
      }
    });
    ClientLog clog;
    try {
      clog = run_client(cfg, train, *client_end, hooks);
    } catch (...) {
      client_end->close();
      server.join();
      if (server_error) std::rethrow_exception(server_error);
      throw;
    }
    server.join();
    if (server_error) std::rethrow_exception(server_error);
    rep.model = merge_models(clog.model, slog.model);
  } else {
    rep.model = train_unsplit(cfg, train, hooks).model;
  }

  const Matrix z_hold = released_activations(cfg, rep.model, hold.x);
  const std::vector<Matrix> logits = forward_server(rep.model, z_hold);
  for (std::size_t h = 0; h < cfg.heads.size(); ++h)
    rep.test_accuracy.push_back(accuracy(logits[h], hold.attribute(cfg.heads[h]).onehot));

  if (opt.run_attack) {
    rep.attack = attack_holdout(cfg, z_hold, hold.x);
    rep.attacked = true;
  }
  if (!opt.probe_attribute.empty()) {
    // Seeded half/half split of the held-out rows.
    Rng rng = Rng::substream(cfg.seed, "probe");
    const std::vector<std::size_t> perm = rng.permutation(hold.size());
    const std::span<const std::size_t> all(perm), fit = all.first(perm.size() / 2), score = all.subspan(perm.size() / 2);
    const Matrix& y = hold.attribute(opt.probe_attribute).onehot;
    rep.probe_accuracy = linear_probe_accuracy(gather_rows(z_hold, fit), gather_rows(y, fit), gather_rows(z_hold, score),
                                               gather_rows(y, score));
    rep.probed = true;
  }
  detail::logger().info("experiment seed {} alpha1 {}: acc {:.4f}, dcor {:.4f} -> {:.4f}{}", cfg.seed, cfg.weights.alpha1,
               rep.test_accuracy.front(), rep.initial_dcor_xz, rep.final_dcor_xz(),
               rep.attacked ? ", attacker mse " + g17(rep.attack.mse) : "");
  return rep;
}

AttackReport attack_experiment(const ExperimentReport& r, const Dataset& data) {
  const SessionConfig& cfg = r.config;
  auto [train, hold] = split_dataset(data, cfg.n_train, cfg.n_holdout, cfg.seed);
  Dataset* both[] = {&train, &hold};
  standardize(train, both);
  return attack_holdout(cfg, released_activations(cfg, r.model, hold.x), hold.x);
}

SweepReport sweep_alpha(const SessionConfig& cfg, const Dataset& data, const std::vector<double>& alphas,
                        const ExperimentOptions& opt) {
  require(!alphas.empty(), ErrorCode::kConfig, "sweep needs at least one alpha");
  SweepReport s;
  s.alphas = alphas;
  s.reports.resize(alphas.size());
  std::vector<std::exception_ptr> errors(alphas.size());
  const auto n = static_cast<std::ptrdiff_t>(alphas.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      SessionConfig c = cfg;
      c.weights.alpha1 = alphas[static_cast<std::size_t>(i)];
      s.reports[static_cast<std::size_t>(i)] = run_experiment(c, data, opt);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return s;
}

std::string epochs_csv(const ExperimentReport& r) {
  std::string out = "epoch,train_loss";
  for (const auto& h : r.head_names) out += ",acc_" + h;
  out += ",dcor_xz,dcor_yz\n";
  for (const EpochRow& row : r.rows) {
    out += std::to_string(row.epoch) + "," + g17(row.train_loss);
    for (double a : row.head_accuracy) out += "," + g17(a);
    out += "," + g17(row.dcor_xz) + "," + g17(row.dcor_yz) + "\n";
  }
  return out;
}

std::string summary_json(const ExperimentReport& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.config.seed;
  j["alpha1"] = r.config.weights.alpha1;
  j["alpha2"] = r.config.weights.alpha2;
  j["epochs"] = r.rows.size();
  nlohmann::ordered_json acc;
  for (std::size_t h = 0; h < r.head_names.size(); ++h) acc[r.head_names[h]] = r.test_accuracy[h];
  j["test_accuracy"] = acc;
  j["initial_dcor_xz"] = r.initial_dcor_xz;
  j["initial_dcor_yz"] = r.initial_dcor_yz;
  j["final_dcor_xz"] = r.final_dcor_xz();
  j["final_dcor_yz"] = r.rows.empty() ? r.initial_dcor_yz : r.rows.back().dcor_yz;
  if (r.attacked) j["attack"] = nlohmann::ordered_json::parse(attack_json(r.attack));
  if (r.probed) j["probe_accuracy"] = r.probe_accuracy;
  if (!r.burnin_trace.empty()) j["burnin_iterations"] = r.burnin_trace.size() - 1;
  j["config"] = to_text(r.config);
  return j.dump(2) + "\n";
}

std::string sweep_csv(const SweepReport& s) {
  std::string out = "alpha,accuracy,dcor_xz,attacker_mse\n";
  for (std::size_t i = 0; i < s.alphas.size(); ++i) {
    const ExperimentReport& r = s.reports[i];
    out += g17(s.alphas[i]) + "," + g17(r.test_accuracy.front()) + "," + g17(r.final_dcor_xz()) + "," +
           (r.attacked ? g17(r.attack.mse) : std::string("nan")) + "\n";
  }
  return out;
}

void write_report(const ExperimentReport& r, const std::string& dir) {
  const std::filesystem::path d(dir);
  std::filesystem::create_directories(d);
  write_text(d / "epochs.csv", epochs_csv(r));
  write_text(d / "summary.json", summary_json(r));
  if (!r.burnin_trace.empty()) write_text(d / "burnin.csv", burnin_trace_csv(r.burnin_trace));
  if (r.attacked) write_text(d / "attack.csv", attack_csv(r.attack));
}

}  // namespace nopeek
