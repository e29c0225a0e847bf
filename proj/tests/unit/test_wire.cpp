#include <doctest.h>

#include <cstring>
#include <thread>

#include "nopeek/config.hpp"
#include "nopeek/errors.hpp"
#include "nopeek/rng.hpp"
#include "nopeek/transport.hpp"
#include "nopeek/wire.hpp"

using namespace nopeek;
using namespace nopeek::wire;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kContract;
}

WireMessage random_message(Rng& rng) {
  WireMessage m;
  m.type = static_cast<MsgType>(rng.below(7));
  m.batch_id = rng.next_u64();
  const std::size_t count = rng.below(4);
  for (std::size_t t = 0; t < count; ++t) {
    Tensor x;
    x.dtype = rng.below(2) ? DType::kF64 : DType::kF32;
    const std::size_t ndim = rng.below(4);
    std::size_t n = 1;
    for (std::size_t d = 0; d < ndim; ++d) {
      x.dims.push_back(static_cast<std::uint32_t>(rng.below(5)));
      n *= x.dims.back();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double v = rng.normal() * 100.0;
      x.values.push_back(x.dtype == DType::kF32 ? double(float(v)) : v);
    }
    m.tensors.push_back(std::move(x));
  }
  return m;
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return std::uint32_t(b[at]) | std::uint32_t(b[at + 1]) << 8 | std::uint32_t(b[at + 2]) << 16 |
         std::uint32_t(b[at + 3]) << 24;
}

}  // namespace

TEST_CASE("frame layout") {
  const auto shutdown = encode(WireMessage{MsgType::kShutdown, 0, {}});
  CHECK(shutdown.size() == 17);
  CHECK(std::memcmp(shutdown.data(), "NPK1", 4) == 0);
  CHECK(shutdown[4] == 5);

  const Matrix z = Matrix::from_rows({{1, 2, 3}, {4, 5, 6.5}});
  const WireMessage act{MsgType::kActivation, 0x0102030405060708ull, {Tensor::from_matrix(z, DType::kF32)}};
  const auto bytes = encode(act);
  CHECK(read_u32(bytes, 13) == 34);
  CHECK(bytes.size() == 17 + 34);
  CHECK(act.payload_size() == 34);
  CHECK(bytes[5] == 0x08);  // batch_id little-endian
  CHECK(bytes[12] == 0x01);
  CHECK(bytes[17] == 0);  // dtype f32
  CHECK(bytes[18] == 2);  // ndim
  CHECK(read_u32(bytes, 19) == 2);
  CHECK(read_u32(bytes, 23) == 3);
  float last;
  std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
  CHECK(last == 6.5f);
  CHECK(decode(bytes) == act);
  CHECK(decode(bytes).tensors[0].to_matrix() == z);

  const auto f64 = encode(WireMessage{MsgType::kGradient, 1, {Tensor::from_matrix(z, DType::kF64)}});
  CHECK(read_u32(f64, 13) == 1 + 1 + 8 + 6 * 8);
}

TEST_CASE("f32 tensors quantize") {
  const Matrix m = Matrix::from_rows({{0.1, 1.0 / 3.0}});
  const Tensor t = Tensor::from_matrix(m, DType::kF32);
  CHECK(t.values[0] == double(0.1f));
  CHECK(t.to_matrix()(0, 1) == double(float(1.0 / 3.0)));
  CHECK(Tensor::from_matrix(m, DType::kF64).to_matrix() == m);
}

TEST_CASE("fuzz round trip") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const WireMessage m = random_message(rng);
    const auto bytes = encode(m);
    CHECK(bytes.size() == kHeaderSize + m.payload_size());
    CHECK(decode(bytes) == m);
  }
}

TEST_CASE("decode errors") {
  const auto good = encode(WireMessage{MsgType::kActivation, 3, {Tensor::from_matrix(Matrix(2, 2, 1.0), DType::kF32)}});
  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { decode(bad_magic); }) == ErrorCode::kMalformedFrame);
  CHECK(code_of([&] { decode(std::span(good).first(10)); }) == ErrorCode::kMalformedFrame);
  auto bad_type = good;
  bad_type[4] = 7;
  CHECK(code_of([&] { decode(bad_type); }) == ErrorCode::kUnknownType);
  auto truncated = good;
  truncated.pop_back();
  CHECK(code_of([&] { decode(truncated); }) == ErrorCode::kLengthMismatch);
  auto trailing = good;
  trailing.push_back(0);
  CHECK(code_of([&] { decode(trailing); }) == ErrorCode::kLengthMismatch);
  auto bad_dtype = good;
  bad_dtype[17] = 9;
  CHECK(code_of([&] { decode(bad_dtype); }) == ErrorCode::kMalformedFrame);
  // Tensor claims more elements than the payload holds, with payload_len consistent.
  auto overrun = good;
  overrun[19] = 50;
  CHECK(code_of([&] { decode(overrun); }) == ErrorCode::kMalformedFrame);
  CHECK(exit_status(ErrorCode::kMalformedFrame) == 3);
  CHECK(exit_status(ErrorCode::kUnknownType) == 3);
  CHECK(exit_status(ErrorCode::kLengthMismatch) == 3);
  CHECK(exit_status(ErrorCode::kConfig) == 2);
}

TEST_CASE("random bytes never crash the decoder") {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint8_t> b(rng.below(64));
    for (auto& v : b) v = static_cast<std::uint8_t>(rng.below(256));
    if (b.size() >= 4 && rng.below(2)) std::memcpy(b.data(), "NPK1", 4);
    try {
      decode(b);
    } catch (const Error& e) {
      const ErrorCode c = e.code();
      CHECK((c == ErrorCode::kMalformedFrame || c == ErrorCode::kUnknownType || c == ErrorCode::kLengthMismatch));
    }
  }
}

TEST_CASE("loopback transport") {
  auto [a, b] = make_loopback_pair();
  const WireMessage m{MsgType::kHello, 0, {Tensor::from_matrix(Matrix(1, 4, 2.0), DType::kF64)}};
  a->send_message(m);
  CHECK(b->recv_message() == m);
  CapturingTransport cap(*b);
  cap.send_message(WireMessage{MsgType::kShutdown, 9, {}});
  CHECK(a->recv_message().batch_id == 9);
  REQUIRE(cap.records().size() == 1);
  CHECK(cap.records()[0].direction == CapturingTransport::Direction::kSent);
  CHECK(cap.bytes_sent() == 17);
  const std::vector<std::uint8_t> junk = {1, 2, 3};
  CHECK(code_of([&] { a->send(junk); }) == ErrorCode::kMalformedFrame);
  a->close();
  CHECK(code_of([&] { b->recv(); }) == ErrorCode::kIo);
}

TEST_CASE("tcp transport") {
  const std::uint16_t port = 47000 + static_cast<std::uint16_t>(::getpid() % 1000);
  const WireMessage m{MsgType::kActivation, 42, {Tensor::from_matrix(Matrix(64, 64, 0.25), DType::kF32)}};
  WireMessage got;
  std::thread server([&] {
    auto t = TcpTransport::accept_one(port);
    got = t->recv_message();
    t->send_message(WireMessage{MsgType::kShutdown, 0, {}});
    t->close();
  });
  auto c = TcpTransport::connect("127.0.0.1:" + std::to_string(port), 1);
  c->send_message(m);
  CHECK(c->recv_message().type == MsgType::kShutdown);
  server.join();
  CHECK(got == m);
  CHECK(code_of([&] { c->recv(); }) == ErrorCode::kIo);
}

TEST_CASE("config parsing") {
  const SessionConfig c = parse_config(
      "# comment\n"
      "alpha1 = 0.25\n"
      "alpha2=2\n"
      "epochs = 3   # trailing\n"
      "burnin_mode = mm\n"
      "heads = class,quadrant\n"
      "wire_dtype = f64\n"
      "\n");
  CHECK(c.weights.alpha1 == 0.25);
  CHECK(c.weights.alpha2 == 2.0);
  CHECK(c.epochs == 3);
  CHECK(c.burnin_mode == BurninMode::kMm);
  CHECK(c.heads == std::vector<std::string>{"class", "quadrant"});
  CHECK(c.wire_dtype == DType::kF64);
  const SessionConfig back = parse_config(to_text(c));
  CHECK(to_text(back) == to_text(c));
  CHECK(back.weights.alpha1 == c.weights.alpha1);

  for (const char* bad : {"alpha1 = -1\n", "nonsense = 3\n", "epochs = three\n", "epochs\n", "alpha2 = 0\n",
                          "batch_size = 0\n", "burnin_mode = fast\n", "wire_dtype = f16\n", "split_index = 0\n"}) {
    CAPTURE(bad);
    CHECK(code_of([&] { parse_config(bad); }) == ErrorCode::kConfig);
  }
  try {
    parse_config("epochs = 2\nbogus = 1\n");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(code_of([] { load_config("/nonexistent/nopeek.cfg"); }) == ErrorCode::kConfig);
}
