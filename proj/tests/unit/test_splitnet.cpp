#include <doctest.h>

#include <filesystem>
#include <thread>

#include "nopeek/checkpoint.hpp"
#include "nopeek/dataset.hpp"
#include "nopeek/errors.hpp"
#include "nopeek/splitnet.hpp"
#include "nopeek/transport.hpp"
#include "nopeek/wire.hpp"

using namespace nopeek;
using wire::MsgType;
using wire::WireMessage;

namespace {

Dataset blobs(std::size_t n, std::uint64_t seed) {
  Dataset d = gen_blobs(n, seed);
  const Dataset fit = d;
  Dataset* parts[] = {&d};
  standardize(fit, parts);
  return d;
}

SessionConfig small_config() {
  SessionConfig cfg;
  cfg.hidden = {16, 12, 8};
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.seed = 5;
  cfg.checkpoint.clear();
  return cfg;
}

struct Session {
  ClientLog client;
  ServerLog server;
  std::vector<CapturingTransport::Record> client_frames;
  std::size_t bytes_before_training = 0;
};

Session run_session(const SessionConfig& cfg, const Dataset& train, ClientHooks hooks = {}) {
  auto [c, s] = make_loopback_pair();
  CapturingTransport cap(*c);
  Session out;
  std::exception_ptr err;
  std::thread server([&, &st = *s] {
    try {
      out.server = run_server(cfg, st);
    } catch (...) {
      err = std::current_exception();
      st.close();
    }
  });
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
  out.client_frames = cap.records();
  return out;
}

std::vector<MsgType> types(const std::vector<CapturingTransport::Record>& recs, CapturingTransport::Direction d) {
  std::vector<MsgType> out;
  for (const auto& r : recs)
    if (r.direction == d) out.push_back(wire::decode(r.frame).type);
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kContract;
}

// Runs `fake` as the server end of a loopback pair while the real client runs.
ErrorCode client_against(const SessionConfig& cfg, const Dataset& train, auto fake) {
  auto [c, s] = make_loopback_pair();
  std::thread server([&, &st = *s] {
    try {
      fake(st);
    } catch (const Error&) {
    }
    st.close();
  });
  const ErrorCode code = code_of([&] { run_client(cfg, train, *c); });
  c->close();
  server.join();
  return code;
}

}  // namespace

TEST_CASE("one batch, one epoch protocol trace") {
  SessionConfig cfg = small_config();
  cfg.epochs = 1;
  const Dataset d = blobs(32, 1);
  const Session s = run_session(cfg, d);
  using D = CapturingTransport::Direction;
  CHECK(types(s.client_frames, D::kSent) ==
        std::vector<MsgType>{MsgType::kHello, MsgType::kActivation, MsgType::kEpochEnd, MsgType::kShutdown});
  CHECK(types(s.client_frames, D::kReceived) ==
        std::vector<MsgType>{MsgType::kHello, MsgType::kGradient, MsgType::kMetrics});
  CHECK(s.client.activations_sent == 1);
  CHECK(s.server.activations_received == 1);
  REQUIRE(s.client.epochs.size() == 1);
  CHECK(s.client.epochs[0].epoch == 1);
  CHECK(s.client.epochs[0].server_loss == s.server.epochs[0].server_loss);
}

TEST_CASE("activation ids increase and every activation gets one gradient") {
  const Dataset d = blobs(100, 2);  // 3 full batches, tail of 4 dropped
  const Session s = run_session(small_config(), d);
  std::uint64_t expect = 1;
  std::vector<std::uint64_t> acts, grads;
  for (const auto& r : s.client_frames) {
    const WireMessage m = wire::decode(r.frame);
    if (m.type == MsgType::kActivation) acts.push_back(m.batch_id);
    if (m.type == MsgType::kGradient) grads.push_back(m.batch_id);
  }
  for (std::uint64_t id : acts) CHECK(id == expect++);
  CHECK(acts.size() == 6);
  CHECK(grads == acts);
}

TEST_CASE("alpha1 = 0 split training equals unsplit training") {
  SessionConfig cfg = small_config();
  cfg.weights.alpha1 = 0.0;
  cfg.epochs = 3;
  const Dataset d = blobs(128, 3);

  cfg.wire_dtype = wire::DType::kF64;
  const Session exact = run_session(cfg, d);
  const ClientLog ref = train_unsplit(cfg, d);
  CHECK(exact.client.step_losses == ref.step_losses);
  CHECK(exact.client.model.client_parameters().size() == ref.model.client_parameters().size());
  for (std::size_t k = 0; k < ref.model.client_parameters().size(); ++k)
    CHECK(*exact.client.model.client_parameters()[k] == *std::as_const(ref.model).client_parameters()[k]);
  for (std::size_t k = 0; k < ref.model.server_parameters().size(); ++k)
    CHECK(*exact.server.model.server_parameters()[k] == *std::as_const(ref.model).server_parameters()[k]);

  // One step through the 32-bit wire.
  cfg.wire_dtype = wire::DType::kF32;
  cfg.epochs = 1;
  const Dataset one = blobs(32, 3);
  const Session q = run_session(cfg, one);
  const ClientLog qref = train_unsplit(cfg, one);
  REQUIRE(q.client.step_losses.size() == 1);
  CHECK(std::abs(q.client.step_losses[0] - qref.step_losses[0]) < 1e-6);
  double worst = 0.0;
  for (std::size_t k = 0; k < qref.model.client_parameters().size(); ++k)
    worst = std::max(worst, max_abs(*q.client.model.client_parameters()[k] -
                                    *std::as_const(qref.model).client_parameters()[k]));
  MESSAGE("max client parameter difference after one f32 step: " << worst);
  CHECK(worst < 1e-6);
}

TEST_CASE("nopeek split training matches unsplit") {
  SessionConfig cfg = small_config();
  cfg.wire_dtype = wire::DType::kF64;
  const Dataset d = blobs(96, 4);
  const Session s = run_session(cfg, d);
  const ClientLog ref = train_unsplit(cfg, d);
  REQUIRE(s.client.step_losses.size() == ref.step_losses.size());
  for (std::size_t i = 0; i < ref.step_losses.size(); ++i)
    CHECK(std::abs(s.client.step_losses[i] - ref.step_losses[i]) < 1e-12);
}

TEST_CASE("burn-in sends nothing") {
  SessionConfig cfg = small_config();
  cfg.burnin_mode = BurninMode::kAscent;
  cfg.burnin_iters = 10;
  cfg.prefit_steps = 20;
  cfg.epochs = 1;
  const Dataset d = blobs(64, 5);
  std::size_t iterations = 0;
  ClientHooks hooks;
  hooks.on_burnin_done = [&](const BurninResult& r) { iterations = r.trace.size(); };
  const Session s = run_session(cfg, d, hooks);
  CHECK(iterations == 11);
  CHECK(s.bytes_before_training == 0);
  REQUIRE(s.client.burnin.has_value());
  CHECK(s.client.burnin->trace.size() == 11);
}

TEST_CASE("noise baseline") {
  Rng r0(1);
  const Matrix z = Matrix::from_rows({{1, -2}, {0.5, 3}});
  CHECK(add_noise_baseline(z, 0.0, r0) == z);
  Rng a(9), b(9), c(10);
  const Matrix na = add_noise_baseline(z, 0.5, a);
  CHECK(na == add_noise_baseline(z, 0.5, b));
  CHECK_FALSE(na == add_noise_baseline(z, 0.5, c));
  CHECK(max_abs(na - z) <= 0.5);
  CHECK(max_abs(na - z) > 0.0);

  SessionConfig cfg = small_config();
  cfg.noise_scale = 0.3;
  cfg.epochs = 1;
  const Dataset d = blobs(64, 6);
  const Session s1 = run_session(cfg, d);
  const Session s2 = run_session(cfg, d);
  CHECK(s1.client.step_losses == s2.client.step_losses);
}

TEST_CASE("sessions are deterministic") {
  const Dataset d = blobs(96, 7);
  auto metrics = [&] {
    std::vector<std::vector<std::uint8_t>> out;
    for (const auto& r : run_session(small_config(), d).client_frames)
      if (wire::decode(r.frame).type == MsgType::kMetrics) out.push_back(r.frame);
    return out;
  };
  const auto first = metrics();
  CHECK(first.size() == 2);
  CHECK(metrics() == first);
}

TEST_CASE("the server never sees X") {
  const Dataset d = blobs(64, 8);
  const SessionConfig cfg = small_config();
  const Session s = run_session(cfg, d);
  for (const auto& r : s.client_frames) {
    if (r.direction != CapturingTransport::Direction::kSent) continue;
    const WireMessage m = wire::decode(r.frame);
    CHECK((m.type == MsgType::kHello || m.type == MsgType::kActivation || m.type == MsgType::kEpochEnd ||
           m.type == MsgType::kShutdown));
    if (m.type != MsgType::kActivation) continue;
    REQUIRE(m.tensors.size() == 2);
    CHECK(m.tensors[0].dims == std::vector<std::uint32_t>{32, 12});
    CHECK(m.tensors[1].dims == std::vector<std::uint32_t>{32, 4});
    for (double v : m.tensors[1].values) CHECK((v == 0.0 || v == 1.0));
    for (const auto& t : m.tensors) CHECK(t.dims[1] != d.dim());
  }
}

TEST_CASE("server rejects out-of-order batches") {
  SessionConfig cfg = small_config();
  auto [c, s] = make_loopback_pair();
  ErrorCode code = ErrorCode::kContract;
  std::thread server([&, &st = *s] { code = code_of([&] { run_server(cfg, st); }); });
  const std::vector<double> hello = {8, 12, 1, 4};
  wire::Tensor ht{wire::DType::kF64, {1, 4}, hello};
  c->send_message(WireMessage{MsgType::kHello, 0, {ht}});
  CHECK(c->recv_message().type == MsgType::kHello);
  const int labels[] = {0, 1};
  c->send_message(WireMessage{MsgType::kActivation, 2,
                              {wire::Tensor::from_matrix(Matrix(2, 12, 0.1), wire::DType::kF32),
                               wire::Tensor::from_matrix(one_hot(labels, 4), wire::DType::kF32)}});
  const WireMessage err = c->recv_message();
  server.join();
  CHECK(err.type == MsgType::kError);
  CHECK(err.batch_id == static_cast<std::uint64_t>(ErrorCode::kProtocol));
  CHECK(code == ErrorCode::kProtocol);
  CHECK(exit_status(code) == 3);
}

TEST_CASE("client rejects a gradient of the wrong shape") {
  const SessionConfig cfg = small_config();
  const Dataset d = blobs(64, 9);
  const ErrorCode code = client_against(cfg, d, [](Transport& t) {
    t.send_message(t.recv_message());  // echo HELLO
    const WireMessage act = t.recv_message();
    t.send_message(WireMessage{MsgType::kGradient, act.batch_id,
                               {wire::Tensor::from_matrix(Matrix(3, 3), wire::DType::kF32),
                                wire::Tensor::from_matrix(Matrix(1, 1), wire::DType::kF64)}});
    t.recv_message();
  });
  CHECK(code == ErrorCode::kProtocol);
}

TEST_CASE("connection loss writes a resumable checkpoint") {
  SessionConfig cfg = small_config();
  const auto path = std::filesystem::temp_directory_path() / "nopeek_test_client.ckpt";
  std::filesystem::remove(path);
  cfg.checkpoint = path.string();
  const Dataset d = blobs(64, 10);
  const ErrorCode code = client_against(cfg, d, [](Transport& t) {
    t.send_message(t.recv_message());
    t.recv_message();  // first activation, then hang up
  });
  CHECK(code == ErrorCode::kIo);
  REQUIRE(std::filesystem::exists(path));
  const SplitModel m = load_checkpoint(path.string());
  CHECK(m.z_dim() == 12);
  CHECK(m.input_dim() == d.dim());
  std::filesystem::remove(path);
}

TEST_CASE("config must validate before HELLO") {
  SessionConfig cfg = small_config();
  cfg.weights.alpha2 = 0.0;
  auto [c, s] = make_loopback_pair();
  CHECK(code_of([&] { run_client(cfg, blobs(32, 11), *c); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { run_server(cfg, *s); }) == ErrorCode::kConfig);
}

TEST_CASE("epoch batches drop the tail") {
  Rng rng(3);
  const auto batches = epoch_batches(70, 32, rng);
  CHECK(batches.size() == 2);
  std::vector<bool> seen(70, false);
  for (const auto& b : batches) {
    CHECK(b.size() == 32);
    for (std::size_t i : b) {
      CHECK_FALSE(seen[i]);
      seen[i] = true;
    }
  }
}
