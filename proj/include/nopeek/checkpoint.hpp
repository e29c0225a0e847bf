#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nopeek/model.hpp"

namespace nopeek {

/// Model checkpoint ("NPKM"):
///   magic "NPKM" | u16 version | u32 split_index | u32 layer count
///   per layer: u8 kind | u32 in | u32 out | u64 init seed
///              | patch-dense only: u32 height, width, channels, kernel, stride, out_channels
///              | dense/patch-dense only: weight, bias
///   u32 head count, per head: u32 name length | name bytes | u32 classes | weight | bias
/// Each matrix is u32 rows | u32 cols | rows*cols f64, row-major. All integers
/// and floats are little-endian.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const SplitModel& m);
SplitModel decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const SplitModel& m, const std::string& path);
SplitModel load_checkpoint(const std::string& path);

}  // namespace nopeek
