#include "nopeek/checkpoint.hpp"

#include "nopeek/byteio.hpp"
#include "nopeek/errors.hpp"

namespace nopeek {

namespace {

constexpr char kMagic[4] = {'N', 'P', 'K', 'M'};

void put_matrix(byteio::Writer& w, const Matrix& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) w.f64(v);
}

Matrix get_matrix(byteio::Reader& r) {
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  require(rows * cols * 8 <= r.remaining(), ErrorCode::kFormat, "checkpoint matrix larger than file");
  std::vector<double> data(rows * cols);
  for (double& v : data) v = r.f64();
  return Matrix(rows, cols, std::move(data));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const SplitModel& m) {
  m.validate();
  byteio::Writer w;
  w.str(std::string_view(kMagic, 4));
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(m.split_index));
  w.u32(static_cast<std::uint32_t>(m.layers.size()));
  for (const Layer& l : m.layers) {
    w.u8(static_cast<std::uint8_t>(l.spec.kind));
    w.u32(static_cast<std::uint32_t>(l.spec.in_dim));
    w.u32(static_cast<std::uint32_t>(l.spec.out_dim));
    w.u64(l.spec.init_seed);
    if (l.spec.kind == LayerKind::kPatchDense) {
      const PatchGeometry& g = *l.spec.patch;
      for (std::size_t v : {g.height, g.width, g.channels, g.kernel, g.stride, g.out_channels})
        w.u32(static_cast<std::uint32_t>(v));
    }
    if (l.has_params()) {
      put_matrix(w, l.weight);
      put_matrix(w, l.bias);
    }
  }
  w.u32(static_cast<std::uint32_t>(m.heads.size()));
  for (const Head& h : m.heads) {
    w.u32(static_cast<std::uint32_t>(h.name.size()));
    w.str(h.name);
    w.u32(static_cast<std::uint32_t>(h.classes));
    put_matrix(w, h.weight);
    put_matrix(w, h.bias);
  }
  return w.take();
}

SplitModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  byteio::Reader r(bytes, ErrorCode::kFormat);
  require(r.str(4) == std::string_view(kMagic, 4), ErrorCode::kFormat, "not a model checkpoint (bad magic)");
  const auto version = r.u16();
  require(version == kCheckpointVersion, ErrorCode::kFormat, "unsupported checkpoint version " + std::to_string(version));
  SplitModel m;
  m.split_index = r.u32();
  const std::uint32_t nlayers = r.u32();
  for (std::uint32_t i = 0; i < nlayers; ++i) {
    Layer l;
    const auto kind = r.u8();
    require(kind <= 3, ErrorCode::kFormat, "unknown layer kind " + std::to_string(kind));
    l.spec.kind = static_cast<LayerKind>(kind);
    l.spec.in_dim = r.u32();
    l.spec.out_dim = r.u32();
    l.spec.init_seed = r.u64();
    if (l.spec.kind == LayerKind::kPatchDense) {
      PatchGeometry g;
      g.height = r.u32();
      g.width = r.u32();
      g.channels = r.u32();
      g.kernel = r.u32();
      g.stride = r.u32();
      g.out_channels = r.u32();
      g.validate();
      l.spec.patch = g;
      l.mask = patch_mask(g);
    }
    if (l.has_params()) {
      l.weight = get_matrix(r);
      l.bias = get_matrix(r);
      require(l.weight.rows() == l.spec.in_dim && l.weight.cols() == l.spec.out_dim && l.bias.rows() == 1 &&
                  l.bias.cols() == l.spec.out_dim,
              ErrorCode::kFormat, "layer parameter shape disagrees with its spec");
    }
    m.layers.push_back(std::move(l));
  }
  const std::uint32_t nheads = r.u32();
  for (std::uint32_t i = 0; i < nheads; ++i) {
    Head h;
    h.name = r.str(r.u32());
    h.classes = r.u32();
    h.weight = get_matrix(r);
    h.bias = get_matrix(r);
    m.heads.push_back(std::move(h));
  }
  require(r.at_end(), ErrorCode::kFormat, "trailing bytes after checkpoint");
  try {
    m.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kFormat, std::string("invalid checkpoint: ") + e.what());
  }
  return m;
}

void save_checkpoint(const SplitModel& m, const std::string& path) { byteio::write_file(path, encode_checkpoint(m)); }

SplitModel load_checkpoint(const std::string& path) { return decode_checkpoint(byteio::read_file(path)); }

}  // namespace nopeek
