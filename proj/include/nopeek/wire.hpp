#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nopeek/byteio.hpp"
#include "nopeek/matrix.hpp"

// Frame layout (all integers little-endian):
//   magic "NPK1" | msg_type u8 | batch_id u64 | payload_len u32 | payload
// The payload is a concatenation of tensors:
//   dtype u8 | ndim u8 | dims u32 x ndim | row-major elements
namespace nopeek::wire {

inline constexpr std::array<std::uint8_t, 4> kMagic = {'N', 'P', 'K', '1'};
inline constexpr std::size_t kHeaderSize = 17;
/// Largest payload a stream reader will accept before allocating.
inline constexpr std::uint32_t kMaxPayload = 1u << 30;

enum class MsgType : std::uint8_t {
  kHello = 0,
  kActivation = 1,
  kGradient = 2,
  kMetrics = 3,
  kEpochEnd = 4,
  kShutdown = 5,
  kError = 6,
};

std::string_view to_string(MsgType t);

/// 0 = 32-bit float (the protocol default); 1 = 64-bit float, used for
/// quantization-free sessions.
enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

std::size_t element_size(DType d);

struct Tensor {
  DType dtype = DType::kF32;
  std::vector<std::uint32_t> dims;
  /// Element values. For kF32 every entry is exactly representable as float.
  std::vector<double> values;

  std::size_t element_count() const;
  std::size_t encoded_size() const;

  /// 2-D tensor from a matrix, rounding to float for kF32.
  static Tensor from_matrix(const Matrix& m, DType dtype);
  /// Rank-2 tensors map directly; rank 1 becomes 1 x n, rank 0 becomes 1 x 1.
  Matrix to_matrix() const;

  friend bool operator==(const Tensor& a, const Tensor& b);
};

struct WireMessage {
  MsgType type = MsgType::kHello;
  std::uint64_t batch_id = 0;
  std::vector<Tensor> tensors;

  std::size_t payload_size() const;

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

struct FrameHeader {
  MsgType type;
  std::uint64_t batch_id;
  std::uint32_t payload_len;
};

void encode_tensor(byteio::Writer& w, const Tensor& t);
/// Truncation and unknown dtypes raise MALFORMED_FRAME.
Tensor decode_tensor(byteio::Reader& r);

std::vector<std::uint8_t> encode(const WireMessage& m);

/// Bad magic or fewer than 17 bytes -> MALFORMED_FRAME; msg_type > 6 ->
/// UNKNOWN_TYPE; payload_len disagreeing with the buffer -> LENGTH_MISMATCH.
FrameHeader decode_header(std::span<const std::uint8_t> bytes);
WireMessage decode(std::span<const std::uint8_t> bytes);

}  // namespace nopeek::wire
