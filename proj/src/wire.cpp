#include "nopeek/wire.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>

#include "nopeek/errors.hpp"

namespace nopeek::wire {

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::kHello: return "HELLO";
    case MsgType::kActivation: return "ACTIVATION";
    case MsgType::kGradient: return "GRADIENT";
    case MsgType::kMetrics: return "METRICS";
    case MsgType::kEpochEnd: return "EPOCH_END";
    case MsgType::kShutdown: return "SHUTDOWN";
    case MsgType::kError: return "ERROR";
  }
  return "?";
}

std::size_t element_size(DType d) { return d == DType::kF64 ? 8 : 4; }

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

std::size_t Tensor::encoded_size() const { return 2 + 4 * dims.size() + element_size(dtype) * values.size(); }

Tensor Tensor::from_matrix(const Matrix& m, DType dtype) {
  require(m.rows() <= std::numeric_limits<std::uint32_t>::max() && m.cols() <= std::numeric_limits<std::uint32_t>::max(),
          ErrorCode::kDimension, "matrix too large for the wire");
  Tensor t;
  t.dtype = dtype;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.values.assign(m.data().begin(), m.data().end());
  if (dtype == DType::kF32)
    for (double& v : t.values) v = static_cast<double>(static_cast<float>(v));
  return t;
}

Matrix Tensor::to_matrix() const {
  require(dims.size() <= 2, ErrorCode::kProtocol, "expected a tensor of rank <= 2, got rank " + std::to_string(dims.size()));
  const std::size_t rows = dims.size() == 2 ? dims[0] : 1;
  const std::size_t cols = dims.size() == 2 ? dims[1] : dims.size() == 1 ? dims[0] : 1;
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data().begin());
  return m;
}

bool operator==(const Tensor& a, const Tensor& b) {
  if (a.dtype != b.dtype || a.dims != b.dims || a.values.size() != b.values.size()) return false;
  // Bitwise, so NaN payloads and signed zeros round-trip as equal to themselves.
  for (std::size_t i = 0; i < a.values.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a.values[i]) != std::bit_cast<std::uint64_t>(b.values[i])) return false;
  return true;
}

std::size_t WireMessage::payload_size() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors) n += t.encoded_size();
  return n;
}

void encode_tensor(byteio::Writer& w, const Tensor& t) {
  require(t.dims.size() <= 255, ErrorCode::kMalformedFrame, "tensor rank exceeds 255");
  require(t.element_count() == t.values.size(), ErrorCode::kMalformedFrame, "tensor dims disagree with element count");
  w.u8(static_cast<std::uint8_t>(t.dtype));
  w.u8(static_cast<std::uint8_t>(t.dims.size()));
  for (std::uint32_t d : t.dims) w.u32(d);
  if (t.dtype == DType::kF64) {
    for (double v : t.values) w.f64(v);
  } else {
    for (double v : t.values) w.f32(static_cast<float>(v));
  }
}

Tensor decode_tensor(byteio::Reader& r) {
  Tensor t;
  const std::uint8_t dtype = r.u8();
  require(dtype <= 1, ErrorCode::kMalformedFrame, "unknown tensor dtype " + std::to_string(dtype));
  t.dtype = static_cast<DType>(dtype);
  const std::uint8_t ndim = r.u8();
  for (std::uint8_t i = 0; i < ndim; ++i) t.dims.push_back(r.u32());
  // Reject before allocating: the elements must fit in what is left.
  const std::size_t limit = r.remaining() / element_size(t.dtype);
  std::size_t count = 1;
  if (std::find(t.dims.begin(), t.dims.end(), 0u) != t.dims.end()) {
    count = 0;
  } else {
    for (std::uint32_t d : t.dims) {
      require(count <= limit / d, ErrorCode::kMalformedFrame, "tensor larger than its frame");
      count *= d;
    }
  }
  require(count <= limit, ErrorCode::kMalformedFrame, "tensor larger than its frame");
  t.values.resize(count);
  if (t.dtype == DType::kF64) {
    for (double& v : t.values) v = r.f64();
  } else {
    for (double& v : t.values) v = static_cast<double>(r.f32());
  }
  return t;
}

std::vector<std::uint8_t> encode(const WireMessage& m) {
  const std::size_t payload = m.payload_size();
  require(payload <= kMaxPayload, ErrorCode::kMalformedFrame, "payload too large");
  byteio::Writer w;
  w.buffer().reserve(kHeaderSize + payload);
  w.bytes(kMagic);
  w.u8(static_cast<std::uint8_t>(m.type));
  w.u64(m.batch_id);
  w.u32(static_cast<std::uint32_t>(payload));
  for (const Tensor& t : m.tensors) encode_tensor(w, t);
  return w.take();
}

FrameHeader decode_header(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= kHeaderSize, ErrorCode::kMalformedFrame,
          "frame shorter than the 17-byte header (" + std::to_string(bytes.size()) + " bytes)");
  require(std::equal(kMagic.begin(), kMagic.end(), bytes.begin()), ErrorCode::kMalformedFrame, "bad magic");
  byteio::Reader r(bytes.subspan(4, kHeaderSize - 4), ErrorCode::kMalformedFrame);
  const std::uint8_t type = r.u8();
  require(type <= static_cast<std::uint8_t>(MsgType::kError), ErrorCode::kUnknownType,
          "unknown msg_type " + std::to_string(type));
  FrameHeader h{static_cast<MsgType>(type), r.u64(), r.u32()};
  return h;
}

WireMessage decode(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = decode_header(bytes);
  require(bytes.size() - kHeaderSize == h.payload_len, ErrorCode::kLengthMismatch,
          "payload_len " + std::to_string(h.payload_len) + " but frame carries " +
              std::to_string(bytes.size() - kHeaderSize) + " payload bytes");
  WireMessage m{h.type, h.batch_id, {}};
  byteio::Reader r(bytes.subspan(kHeaderSize), ErrorCode::kMalformedFrame);
  while (!r.at_end()) m.tensors.push_back(decode_tensor(r));
  return m;
}

}  // namespace nopeek::wire
