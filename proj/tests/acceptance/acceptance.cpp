// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only N[,N...]]
//
// Exit status is 0 only when every selected criterion passes.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "finite_diff.hpp"
#include "nopeek/attack.hpp"
#include "nopeek/burnin.hpp"
#include "nopeek/dataset.hpp"
#include "nopeek/depmeasure.hpp"
#include "nopeek/errors.hpp"
#include "nopeek/experiment.hpp"
#include "nopeek/loss.hpp"
#include "nopeek/rng.hpp"
#include "nopeek/splitnet.hpp"
#include "nopeek/stats.hpp"
#include "nopeek/transport.hpp"
#include "nopeek/wire.hpp"
#include "szekely.hpp"

using namespace nopeek;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix randn(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  return rng_normal(rng, r, c, 0.0, 1.0);
}

oracle::Rows rows_of(const Matrix& m) {
  oracle::Rows r(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) r[i].assign(m.row(i).begin(), m.row(i).end());
  return r;
}

Dataset standardized(Dataset d) {
  const Dataset fit = d;
  Dataset* parts[] = {&d};
  standardize(fit, parts);
  return d;
}

// ---------------------------------------------------------------------------

Outcome estimator_oracle() {
  Rng rng(2024);
  double worst = 0.0, self_worst = 0.0, lo = 1.0, hi = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(63), dx = 1 + rng.below(8), dz = 1 + rng.below(8);
    const Matrix x = rng_normal(rng, n, dx, 0.0, 1.0);
    Matrix z = rng_normal(rng, n, dz, 0.0, 1.0);
    if (t % 2 == 0)  // half the instances share signal
      for (std::size_t i = 0; i < n; ++i) z(i, 0) += 2.0 * x(i, 0);
    const double d = dcor(x, z);
    worst = std::max(worst, std::abs(d - oracle::dcor(rows_of(x), rows_of(z), kDistEps)));
    self_worst = std::max(self_worst, std::abs(dcor(x, x) - 1.0));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {worst < 1e-10 && self_worst <= 1e-9 && lo >= 0.0 && hi <= 1.0 + 1e-9,
          fmt("max |dcor - oracle| %.2e, max |dcor(X,X) - 1| %.2e, range [%.4f, %.4f]", worst, self_worst, lo, hi)};
}

Outcome gradient_checks() {
  double ad_dcor = 0.0, ad_loss = 0.0, analytic = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const std::size_t n = 6 + s;  // 6..15
    const Matrix x = randn(n, 4, 100 + s), z0 = randn(n, 3, 200 + s);

    ad::Tape t;
    ad::Var z = t.variable(z0);
    t.backward(dcor(t.constant(x), z));
    ad_dcor = std::max(ad_dcor, oracle::rel_error(
                                    z.grad(), oracle::central_diff([&](const Matrix& m) { return dcor(x, m); }, z0)));

    const Matrix dz = dcor_grad_analytic(x, z0);
    analytic = std::max(analytic, oracle::rel_error(dz, oracle::central_diff(
                                                            [&](const Matrix& m) { return std::pow(dcor(x, m), 2); },
                                                            z0)));

    // Full objective through a small split model, w.r.t. every client and server parameter.
    ModelConfig mc;
    mc.hidden = {6, 5, 4};
    const HeadSpec heads[] = {{"c", 3}};
    SplitModel m = build_model(4, mc, heads, 300 + s);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = int(i % 3);
    const Matrix y = one_hot(labels, 3);
    const NoPeekWeights w{0.5, 1.0};
    auto loss_of = [&](const SplitModel& mm) {
      ad::Tape tt;
      ad::Var xv = tt.constant(x);
      ad::Var zz = forward_client(mm, tt, xv);
      return nopeek_loss(xv, zz, forward_server(mm, tt, zz)[0], y, w).value()(0, 0);
    };
    ad::Tape tt;
    Binding cb, sb;
    ad::Var xv = tt.constant(x);
    ad::Var zz = forward_client(m, tt, xv, &cb);
    tt.backward(nopeek_loss(xv, zz, forward_server(m, tt, zz, &sb)[0], y, w));
    std::vector<ad::Var> bound = cb.params;
    bound.insert(bound.end(), sb.params.begin(), sb.params.end());
    auto params = m.client_parameters();
    for (Matrix* p : m.server_parameters()) params.push_back(p);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const Matrix fd = oracle::central_diff(
          [&](const Matrix& v) {
            const Matrix saved = *params[k];
            *params[k] = v;
            const double l = loss_of(m);
            *params[k] = saved;
            return l;
          },
          *params[k]);
      ad_loss = std::max(ad_loss, oracle::rel_error(bound[k].grad(), fd));
    }
  }
  return {ad_dcor < 1e-5 && ad_loss < 1e-5 && analytic < 1e-4,
          fmt("max rel. error: taped dcor %.2e, taped loss %.2e, analytic dCor^2 %.2e", ad_dcor, ad_loss, analytic)};
}

struct SessionRun {
  ClientLog client;
  ServerLog server;
  std::vector<CapturingTransport::Record> frames;
  std::size_t bytes_before_training = 0;
};

SessionRun loopback_session(const SessionConfig& cfg, const Dataset& train) {
  auto [c, s] = make_loopback_pair();
  CapturingTransport cap(*c);
  SessionRun out;
  std::exception_ptr err;
  std::thread server([&, &st = *s] {
    try {
      out.server = run_server(cfg, st);
    } catch (...) {
      err = std::current_exception();
      st.close();
    }
  });
  ClientHooks hooks;
  hooks.on_training_start = [&](const SplitModel&) { out.bytes_before_training = cap.bytes_total(); };
  try {
    out.client = run_client(cfg, train, cap, hooks);
  } catch (...) {
    c->close();
    server.join();
    throw;
  }
  server.join();
  if (err) std::rethrow_exception(err);
  out.frames = cap.records();
  return out;
}

Outcome split_equivalence() {
  const Dataset d = standardized(gen_synthetic("blobs", 512, 7));
  SessionConfig cfg;
  cfg.weights.alpha1 = 0.0;
  cfg.epochs = 3;
  cfg.seed = 11;
  cfg.checkpoint.clear();

  cfg.wire_dtype = wire::DType::kF64;
  const SessionRun exact = loopback_session(cfg, d);
  const ClientLog ref = train_unsplit(cfg, d);
  const bool bit_exact = exact.client.step_losses == ref.step_losses && !ref.step_losses.empty();

  cfg.wire_dtype = wire::DType::kF32;
  const SessionRun quant = loopback_session(cfg, d);
  double worst = 0.0;
  bool same_len = quant.client.step_losses.size() == ref.step_losses.size();
  for (std::size_t i = 0; same_len && i < ref.step_losses.size(); ++i)
    worst = std::max(worst, std::abs(quant.client.step_losses[i] - ref.step_losses[i]));
  return {bit_exact && same_len && worst < 1e-6,
          fmt("%zu steps; 64-bit wire bit-exact: %s; 32-bit wire max |dloss| %.2e", ref.step_losses.size(),
              bit_exact ? "yes" : "no", worst)};
}

Outcome protocol() {
  using namespace wire;
  Rng rng(99);
  std::size_t roundtrip_fail = 0;
  for (int i = 0; i < 10000; ++i) {
    WireMessage m;
    m.type = static_cast<MsgType>(rng.below(7));
    m.batch_id = rng.next_u64();
    const std::size_t count = rng.below(4);
    for (std::size_t t = 0; t < count; ++t) {
      Tensor x;
      x.dtype = rng.below(4) == 0 ? DType::kF64 : DType::kF32;
      const std::size_t ndim = rng.below(4);
      std::size_t n = 1;
      for (std::size_t k = 0; k < ndim; ++k) {
        x.dims.push_back(std::uint32_t(rng.below(6)));
        n *= x.dims.back();
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double v = rng.normal() * std::pow(10.0, double(rng.below(9)) - 4.0);
        x.values.push_back(x.dtype == DType::kF32 ? double(float(v)) : v);
      }
      m.tensors.push_back(std::move(x));
    }
    try {
      if (!(decode(encode(m)) == m)) ++roundtrip_fail;
    } catch (const Error&) {
      ++roundtrip_fail;
    }
  }

  // Each malformed case must raise exactly its declared code.
  const auto good = encode(WireMessage{MsgType::kActivation, 1, {Tensor::from_matrix(Matrix(2, 3, 0.5), DType::kF32)}});
  auto with = [&](auto edit) {
    auto b = good;
    edit(b);
    return b;
  };
  struct Case {
    std::vector<std::uint8_t> bytes;
    ErrorCode want;
  };
  const std::vector<Case> cases = {
      {with([](auto& b) { b[0] = 'M'; }), ErrorCode::kMalformedFrame},
      {std::vector<std::uint8_t>(good.begin(), good.begin() + 16), ErrorCode::kMalformedFrame},
      {with([](auto& b) { b[4] = 7; }), ErrorCode::kUnknownType},
      {with([](auto& b) { b[4] = 255; }), ErrorCode::kUnknownType},
      {with([](auto& b) { b.pop_back(); }), ErrorCode::kLengthMismatch},
      {with([](auto& b) { b.push_back(1); }), ErrorCode::kLengthMismatch},
      {with([](auto& b) { b[17] = 2; }), ErrorCode::kMalformedFrame},
      {with([](auto& b) { b[19] = 200; }), ErrorCode::kMalformedFrame},
  };
  std::size_t wrong_code = 0;
  for (const Case& c : cases) {
    try {
      decode(c.bytes);
      ++wrong_code;
    } catch (const Error& e) {
      wrong_code += e.code() != c.want;
    }
  }
  // Random corruption of valid frames: decodes or fails with a wire code, never anything else.
  std::size_t stray = 0;
  for (int i = 0; i < 2000; ++i) {
    auto b = good;
    for (int k = 0; k < 3; ++k) b[rng.below(b.size())] = std::uint8_t(rng.below(256));
    try {
      decode(b);
    } catch (const Error& e) {
      const ErrorCode c = e.code();
      stray += !(c == ErrorCode::kMalformedFrame || c == ErrorCode::kUnknownType || c == ErrorCode::kLengthMismatch);
    }
  }

  // Traffic inventory of a real session: the client sends only HELLO, ACTIVATION,
  // EPOCH_END and SHUTDOWN, and no tensor it sends has X's width or X's rows.
  const Dataset d = standardized(gen_synthetic("blobs", 256, 3));
  SessionConfig cfg;
  cfg.epochs = 2;
  cfg.checkpoint.clear();
  const SessionRun s = loopback_session(cfg, d);
  std::set<std::vector<double>> x_rows;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<double> r;
    for (double v : d.x.row(i)) r.push_back(double(float(v)));
    x_rows.insert(r);
  }
  std::size_t leaks = 0, frames = 0;
  for (const auto& r : s.frames) {
    if (r.direction != CapturingTransport::Direction::kSent) continue;
    ++frames;
    const WireMessage m = decode(r.frame);
    if (!(m.type == MsgType::kHello || m.type == MsgType::kActivation || m.type == MsgType::kEpochEnd ||
          m.type == MsgType::kShutdown))
      ++leaks;
    for (const Tensor& t : m.tensors) {
      if (m.type == MsgType::kHello) continue;
      if (t.dims.size() == 2 && t.dims[1] == d.dim()) ++leaks;
      const Matrix v = t.to_matrix();
      for (std::size_t i = 0; i < v.rows(); ++i)
        if (x_rows.count(std::vector<double>(v.row(i).begin(), v.row(i).end()))) ++leaks;
    }
  }
  return {roundtrip_fail == 0 && wrong_code == 0 && stray == 0 && leaks == 0,
          fmt("10000 fuzz frames, %zu round-trip failures; %zu/%zu malformed cases misclassified; %zu stray codes; "
              "%zu client frames, %zu carrying X",
              roundtrip_fail, wrong_code, cases.size(), stray, frames, leaks)};
}

Outcome burnin_criterion() {
  std::size_t passed = 0, monotone_fail = 0;
  BlobOptions bo;
  bo.classes = 2;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Dataset d = standardized(gen_blobs(128, s, bo));
    const HeadSpec heads[] = {{"class", 2}};
    const SplitModel m = build_model(d.dim(), ModelConfig{}, heads, Rng::derive_seed(s, "init"));
    BurninOptions opt;
    const BurninResult r = run_burnin(d.x, d.attribute("class").onehot, forward_client(m, d.x), opt);
    const auto& h = r.state.f_history;
    bool monotone = true;
    for (std::size_t i = 1; i < h.size(); ++i) monotone = monotone && h[i] >= h[i - 1] - 1e-12;
    monotone_fail += !monotone;
    const auto& first = r.trace.front();
    const auto& last = r.trace.back();
    passed += monotone && last.dcor_xz < first.dcor_xz && last.dcor_yz >= 0.5 * first.dcor_yz;
  }
  SessionConfig cfg;
  cfg.burnin_mode = BurninMode::kAscent;
  cfg.epochs = 1;
  cfg.checkpoint.clear();
  const SessionRun s = loopback_session(cfg, standardized(gen_synthetic("blobs", 256, 4)));
  const bool quiet = s.bytes_before_training == 0 && s.client.burnin.has_value();
  return {passed >= 95 && monotone_fail == 0 && quiet,
          fmt("%zu/100 seeds pass, %zu non-monotone f histories, %zu bytes on the wire before training", passed,
              monotone_fail, s.bytes_before_training)};
}

// Stripes runs shared by criteria 6, 7 and 8, computed in stages so each
// criterion is charged for the work it adds: training (6), attacks on those
// models (7), and the noise-baseline runs (8).
struct StripeRuns {
  std::vector<Dataset> data;
  std::vector<ExperimentReport> base, nopeek;
  std::vector<double> mse_base, mse_nopeek;
  std::vector<double> acc_noise, mse_noise;
};

SessionConfig stripes_config(std::uint64_t seed, double alpha1) {
  SessionConfig cfg;
  cfg.dataset = "stripes";
  cfg.epochs = 30;
  cfg.seed = seed;
  cfg.weights.alpha1 = alpha1;
  cfg.checkpoint.clear();
  return cfg;
}

StripeRuns& trained() {
  static StripeRuns r;
  if (!r.base.empty()) return r;
  ExperimentOptions opt;
  opt.run_attack = false;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const SessionConfig cfg = stripes_config(s, 0.0);
    r.data.push_back(gen_synthetic("stripes", cfg.n_train + cfg.n_holdout, s));
    r.base.push_back(run_experiment(cfg, r.data.back(), opt));
    r.nopeek.push_back(run_experiment(stripes_config(s, 0.5), r.data.back(), opt));
  }
  return r;
}

StripeRuns& attacked() {
  StripeRuns& r = trained();
  if (!r.mse_base.empty()) return r;
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    r.mse_base.push_back(attack_experiment(r.base[i], r.data[i]).mse);
    r.mse_nopeek.push_back(attack_experiment(r.nopeek[i], r.data[i]).mse);
  }
  return r;
}

StripeRuns& with_noise() {
  StripeRuns& r = attacked();
  if (!r.mse_noise.empty()) return r;
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    SessionConfig cfg = stripes_config(i, 0.0);
    cfg.noise_scale = 10.0;
    const ExperimentReport z = run_experiment(cfg, r.data[i]);
    r.acc_noise.push_back(z.test_accuracy[0]);
    r.mse_noise.push_back(z.attack.mse);
  }
  return r;
}

double median_of(const std::vector<ExperimentReport>& rs, auto field) {
  std::vector<double> v;
  for (const ExperimentReport& r : rs) v.push_back(field(r));
  return median(v);
}

double median_dcor(const std::vector<ExperimentReport>& rs) {
  return median_of(rs, [](const ExperimentReport& r) { return r.final_dcor_xz(); });
}

double median_acc(const std::vector<ExperimentReport>& rs) {
  return median_of(rs, [](const ExperimentReport& r) { return r.test_accuracy[0]; });
}

Outcome leakage_reduction() {
  const StripeRuns& r = trained();
  const double ratio = median_dcor(r.nopeek) / median_dcor(r.base);
  const double drop = median_acc(r.base) - median_acc(r.nopeek);
  return {ratio <= 0.6 && drop < 0.10,
          fmt("median final dcor %.4f (alpha1 0) vs %.4f (alpha1 0.5), ratio %.3f; median accuracy %.4f vs %.4f",
              median_dcor(r.base), median_dcor(r.nopeek), ratio, median_acc(r.base), median_acc(r.nopeek))};
}

Outcome attack_resistance() {
  const StripeRuns& r = attacked();
  const double lift = median(r.mse_nopeek) / median(r.mse_base);

  // Anchors with the same attacker (default architecture rule and budget).
  const Dataset blobs = standardized(gen_synthetic("blobs", 5000, 1));
  AttackOptions opt;
  const LeakedPairSet ident = make_pair_set(blobs.x, blobs.x, 3);
  const double ident_mse = evaluate_attack(train_attacker(ident, opt).decoder, ident).mse;
  const LeakedPairSet noise = make_pair_set(randn(blobs.size(), 16, 5), blobs.x, 3);
  const AttackReport nr = evaluate_attack(train_attacker(noise, opt).decoder, noise);
  const double noise_gap = std::abs(nr.mse - nr.mean_predictor_mse) / nr.mean_predictor_mse;
  return {lift >= 1.25 && ident_mse < 1e-3 && noise_gap <= 0.10,
          fmt("median attacker MSE %.4f (baseline) vs %.4f (NoPeek), ratio %.3f; identity leak MSE %.2e; noise leak "
              "MSE %.4f vs mean-predictor %.4f (%.1f%%)",
              median(r.mse_base), median(r.mse_nopeek), lift, ident_mse, nr.mse, nr.mean_predictor_mse,
              100.0 * noise_gap)};
}

Outcome noise_baseline() {
  const StripeRuns& r = with_noise();
  const double chance = 0.25;
  const double noise_acc = median(r.acc_noise);
  const double gap = median_acc(r.base) - median_acc(r.nopeek);
  const double mse_ratio = median(r.mse_nopeek) / median(r.mse_noise);
  return {std::abs(noise_acc - chance) <= 0.05 && gap < 0.10 && mse_ratio <= 2.0 && mse_ratio >= 0.5,
          fmt("median accuracy under 10x noise %.4f (chance %.2f); NoPeek accuracy gap %.4f; attacker MSE NoPeek "
              "%.4f vs noise %.4f (ratio %.3f)",
              noise_acc, chance, gap, median(r.mse_nopeek), median(r.mse_noise), mse_ratio)};
}

Outcome attribute_privacy() {
  std::vector<double> probe_open, probe_prot, class_open, class_prot, parity_open, parity_prot;
  ExperimentOptions opt;
  opt.run_attack = false;
  opt.probe_attribute = "quadrant";
  for (std::uint64_t s = 0; s < 20; ++s) {
    SessionConfig cfg;
    cfg.dataset = "blobs";
    cfg.heads = {"class", "parity"};
    cfg.epochs = 15;
    cfg.seed = s;
    cfg.checkpoint.clear();
    const Dataset data = gen_synthetic("blobs", cfg.n_train + cfg.n_holdout, s);
    cfg.weights.alpha1 = 0.0;
    const ExperimentReport open = run_experiment(cfg, data, opt);
    cfg.weights.alpha1 = 0.5;
    cfg.protect = "quadrant";
    const ExperimentReport prot = run_experiment(cfg, data, opt);
    probe_open.push_back(open.probe_accuracy);
    probe_prot.push_back(prot.probe_accuracy);
    class_open.push_back(open.test_accuracy[0]);
    class_prot.push_back(prot.test_accuracy[0]);
    parity_open.push_back(open.test_accuracy[1]);
    parity_prot.push_back(prot.test_accuracy[1]);
  }
  const double probe_drop = median(probe_open) - median(probe_prot);
  const double class_drop = median(class_open) - median(class_prot);
  const double parity_drop = median(parity_open) - median(parity_prot);
  return {probe_drop >= 0.20 && class_drop < 0.10 && parity_drop < 0.10,
          fmt("median quadrant probe %.4f -> %.4f (drop %.4f); kept heads: class %.4f -> %.4f, parity %.4f -> %.4f",
              median(probe_open), median(probe_prot), probe_drop, median(class_open), median(class_prot),
              median(parity_open), median(parity_prot))};
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  SessionConfig cfg;
  cfg.dataset = "blobs";
  cfg.epochs = 5;
  cfg.burnin_mode = BurninMode::kAscent;
  cfg.burnin_iters = 20;
  cfg.noise_scale = 0.1;
  cfg.attack_epochs = 20;
  cfg.seed = 31;
  cfg.checkpoint.clear();
  const Dataset data = gen_synthetic("blobs", cfg.n_train + cfg.n_holdout, cfg.seed);
  const fs::path root = fs::temp_directory_path() / "nopeek_acceptance_determinism";
  fs::remove_all(root);
  for (const char* run : {"a", "b"}) write_report(run_experiment(cfg, data), (root / run).string());
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    if (e.path().extension() != ".csv") continue;
    ++files;
    differ += slurp(e.path()) != slurp(root / "b" / e.path().filename());
  }
  const std::vector<double> alphas = {0.0, 0.5};
  SessionConfig sc = cfg;
  sc.burnin_mode = BurninMode::kOff;
  const bool sweep_same = sweep_csv(sweep_alpha(sc, data, alphas)) == sweep_csv(sweep_alpha(sc, data, alphas));
  fs::remove_all(root);
  return {files >= 3 && differ == 0 && sweep_same,
          fmt("%zu report CSVs compared, %zu differ; sweep CSV identical: %s", files, differ,
              sweep_same ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0) {
      std::stringstream ss(argv[i + 1]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    }

  const std::vector<Criterion> criteria = {
      {1, "estimator oracle", 10, estimator_oracle},
      {2, "gradient checks", 30, gradient_checks},
      {3, "split equivalence", 60, split_equivalence},
      {4, "protocol", 30, protocol},
      {5, "burn-in", 120, burnin_criterion},
      {6, "leakage reduction", 600, leakage_reduction},
      {7, "attack resistance", 600, attack_resistance},
      {8, "noise baseline", 300, noise_baseline},
      {9, "attribute privacy", 300, attribute_privacy},
      {10, "determinism", 300, determinism},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %d (%s): %s; %.1f s of %.0f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : " (over budget)");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
