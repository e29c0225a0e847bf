#include "nopeek/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nopeek/byteio.hpp"
#include "nopeek/rng.hpp"

namespace nopeek {

Attribute make_attribute(std::string name, std::size_t classes, std::vector<std::uint32_t> labels) {
  Attribute a;
  a.name = std::move(name);
  a.classes = classes;
  a.onehot = Matrix(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < classes, ErrorCode::kLabel,
            "label " + std::to_string(labels[i]) + " out of range for " + std::to_string(classes) + " classes");
    a.onehot(i, labels[i]) = 1.0;
  }
  a.labels = std::move(labels);
  return a;
}

Dataset gen_blobs(std::size_t n, std::uint64_t seed, const BlobOptions& opt) {
  require(n >= 4, ErrorCode::kSampleSize, "gen_blobs needs n >= 4");
  require(opt.classes >= 2, ErrorCode::kConfig, "blobs need at least 2 classes");
  Rng rng = Rng::substream(seed, "data");
  const std::size_t dim = 2 + opt.classes + opt.extra_dims;
  // Centres on scaled axis directions are pairwise `separation` apart.
  const double c = opt.separation / std::numbers::sqrt2;
  Dataset d;
  d.name = "blobs";
  d.x = Matrix(n, dim);
  std::vector<std::uint32_t> cls(n), par(n), quad(n);
  for (std::size_t i = 0; i < n; ++i) {
    cls[i] = static_cast<std::uint32_t>(rng.below(opt.classes));
    quad[i] = static_cast<std::uint32_t>(rng.below(4));
    par[i] = cls[i] % 2;
    d.x(i, 0) = (quad[i] & 1 ? opt.quadrant_margin : -opt.quadrant_margin) + rng.normal();
    d.x(i, 1) = (quad[i] & 2 ? opt.quadrant_margin : -opt.quadrant_margin) + rng.normal();
    for (std::size_t k = 0; k < opt.classes; ++k) d.x(i, 2 + k) = (k == cls[i] ? c : 0.0) + rng.normal();
    for (std::size_t k = 0; k < opt.extra_dims; ++k) d.x(i, 2 + opt.classes + k) = rng.normal();
  }
  d.attributes.push_back(make_attribute("class", opt.classes, std::move(cls)));
  d.attributes.push_back(make_attribute("parity", 2, std::move(par)));
  d.attributes.push_back(make_attribute("quadrant", 4, std::move(quad)));
  d.norm = Normalization{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  return d;
}

Dataset gen_stripes(std::size_t n, std::uint64_t seed, const StripeOptions& opt) {
  require(n >= 4, ErrorCode::kSampleSize, "gen_stripes needs n >= 4");
  require(opt.size >= 4 && opt.classes >= 2, ErrorCode::kConfig, "stripes need size >= 4 and >= 2 classes");
  Rng rng = Rng::substream(seed, "data");
  const std::size_t s = opt.size;
  Dataset d;
  d.name = "stripes";
  d.x = Matrix(n, s * s);
  d.image = ImageShape{s, s, 1, false};
  std::vector<std::uint32_t> cls(n);
  for (std::size_t i = 0; i < n; ++i) {
    cls[i] = static_cast<std::uint32_t>(rng.below(opt.classes));
    const double theta = std::numbers::pi * double(cls[i]) / double(opt.classes);
    const double freq = 0.12 + 0.2 * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double cx = std::cos(theta), sy = std::sin(theta);
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) {
        const double t = 2.0 * std::numbers::pi * freq * (double(x) * cx + double(y) * sy) + phase;
        const double v = 0.5 + 0.4 * std::sin(t) + opt.pixel_noise * rng.normal();
        d.x(i, y * s + x) = std::clamp(v, 0.0, 1.0);
      }
  }
  d.attributes.push_back(make_attribute("class", opt.classes, std::move(cls)));
  d.norm = Normalization{std::vector<double>(s * s, 0.0), std::vector<double>(s * s, 1.0)};
  return d;
}

Dataset gen_synthetic(std::string_view kind, std::size_t n, std::uint64_t seed) {
  if (kind == "blobs") return gen_blobs(n, seed);
  if (kind == "stripes") return gen_stripes(n, seed);
  fail(ErrorCode::kConfig, "unknown synthetic dataset '" + std::string(kind) + "' (blobs, stripes)");
}

Dataset decode_cifar10(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kRecord = 3073;
  require(!bytes.empty() && bytes.size() % kRecord == 0, ErrorCode::kFormat,
          "CIFAR-10 file size " + std::to_string(bytes.size()) + " is not a multiple of 3073");
  const std::size_t n = bytes.size() / kRecord;
  Dataset d;
  d.name = "cifar10";
  d.x = Matrix(n, kRecord - 1);
  d.image = ImageShape{32, 32, 3, true};
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + i * kRecord;
    labels[i] = rec[0];
    for (std::size_t j = 0; j < kRecord - 1; ++j) d.x(i, j) = double(rec[1 + j]) / 255.0;
  }
  try {
    d.attributes.push_back(make_attribute("class", 10, std::move(labels)));
  } catch (const Error& e) {
    fail(ErrorCode::kFormat, std::string("CIFAR-10 label byte: ") + e.what());
  }
  d.norm = Normalization{std::vector<double>(kRecord - 1, 0.0), std::vector<double>(kRecord - 1, 1.0)};
  return d;
}

Dataset load_cifar10_bin(const std::string& path) { return decode_cifar10(byteio::read_file(path)); }

Normalization fit_normalization(const Matrix& x) {
  require(x.rows() > 0, ErrorCode::kSampleSize, "cannot normalize an empty matrix");
  Normalization nm{std::vector<double>(x.cols(), 0.0), std::vector<double>(x.cols(), 0.0)};
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) nm.mean[j] += x(i, j);
  for (double& m : nm.mean) m /= double(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) nm.stddev[j] += (x(i, j) - nm.mean[j]) * (x(i, j) - nm.mean[j]);
  for (double& s : nm.stddev) {
    s = std::sqrt(s / double(x.rows()));
    if (s < 1e-12) s = 1.0;
  }
  return nm;
}

Matrix apply_normalization(const Matrix& x, const Normalization& nm) {
  require(nm.mean.size() == x.cols() && nm.stddev.size() == x.cols(), ErrorCode::kDimension, "normalization width");
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - nm.mean[j]) / nm.stddev[j];
  return out;
}

Matrix invert_normalization(const Matrix& x, const Normalization& nm) {
  require(nm.mean.size() == x.cols() && nm.stddev.size() == x.cols(), ErrorCode::kDimension, "normalization width");
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) * nm.stddev[j] + nm.mean[j];
  return out;
}

void standardize(const Dataset& fit, std::span<Dataset* const> targets) {
  // Compose with any normalization already applied so invert_normalization
  // still maps back to raw values.
  const Normalization step = fit_normalization(fit.x);
  for (Dataset* d : targets) {
    d->x = apply_normalization(d->x, step);
    Normalization total = d->norm;
    if (total.mean.empty()) total = Normalization{std::vector<double>(d->dim(), 0.0), std::vector<double>(d->dim(), 1.0)};
    for (std::size_t j = 0; j < d->dim(); ++j) {
      total.mean[j] += total.stddev[j] * step.mean[j];
      total.stddev[j] *= step.stddev[j];
    }
    d->norm = std::move(total);
  }
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, std::size_t n_first, std::size_t n_second,
                                          std::uint64_t seed) {
  require(n_first + n_second <= d.size(), ErrorCode::kConfig,
          "dataset has " + std::to_string(d.size()) + " rows, split needs " + std::to_string(n_first + n_second));
  Rng rng = Rng::substream(seed, "split");
  const std::vector<std::size_t> perm = rng.permutation(d.size());
  const std::span<const std::size_t> p(perm);
  return {d.subset(p.subspan(0, n_first)), d.subset(p.subspan(n_first, n_second))};
}

namespace {

constexpr std::uint16_t kDatasetVersion = 1;

void put_string(byteio::Writer& w, const std::string& s) {
  w.u32(static_cast<std::uint32_t>(s.size()));
  w.str(s);
}

std::string get_string(byteio::Reader& r) { return r.str(r.u32()); }

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& d) {
  byteio::Writer w;
  w.str("NPKD");
  w.u16(kDatasetVersion);
  put_string(w, d.name);
  w.u32(static_cast<std::uint32_t>(d.x.rows()));
  w.u32(static_cast<std::uint32_t>(d.x.cols()));
  for (double v : d.x.data()) w.f64(v);
  w.u8(d.image ? 1 : 0);
  if (d.image) {
    w.u32(static_cast<std::uint32_t>(d.image->height));
    w.u32(static_cast<std::uint32_t>(d.image->width));
    w.u32(static_cast<std::uint32_t>(d.image->channels));
    w.u8(d.image->planar ? 1 : 0);
  }
  w.u32(static_cast<std::uint32_t>(d.norm.mean.size()));
  for (double v : d.norm.mean) w.f64(v);
  for (double v : d.norm.stddev) w.f64(v);
  w.u32(static_cast<std::uint32_t>(d.attributes.size()));
  for (const Attribute& a : d.attributes) {
    put_string(w, a.name);
    w.u32(static_cast<std::uint32_t>(a.classes));
    for (std::uint32_t l : a.labels) w.u32(l);
  }
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  byteio::Reader r(bytes, ErrorCode::kFormat);
  require(r.str(4) == "NPKD", ErrorCode::kFormat, "not a dataset file (bad magic)");
  const std::uint16_t version = r.u16();
  require(version == kDatasetVersion, ErrorCode::kFormat, "unsupported dataset version " + std::to_string(version));
  Dataset d;
  d.name = get_string(r);
  const std::size_t rows = r.u32(), cols = r.u32();
  require(cols == 0 || rows <= r.remaining() / 8 / cols, ErrorCode::kFormat, "dataset matrix exceeds file size");
  d.x = Matrix(rows, cols);
  for (double& v : d.x.data()) v = r.f64();
  if (r.u8()) {
    ImageShape s;
    s.height = r.u32();
    s.width = r.u32();
    s.channels = r.u32();
    s.planar = r.u8() != 0;
    require(s.size() == cols, ErrorCode::kFormat, "image shape does not match the feature count");
    d.image = s;
  }
  const std::size_t nn = r.u32();
  require(nn == cols, ErrorCode::kFormat, "normalization record width mismatch");
  d.norm.mean.resize(nn);
  d.norm.stddev.resize(nn);
  for (double& v : d.norm.mean) v = r.f64();
  for (double& v : d.norm.stddev) v = r.f64();
  const std::size_t n_attr = r.u32();
  for (std::size_t a = 0; a < n_attr; ++a) {
    std::string name = get_string(r);
    const std::size_t classes = r.u32();
    require(rows <= r.remaining() / 4, ErrorCode::kFormat, "attribute labels exceed file size");
    std::vector<std::uint32_t> labels(rows);
    for (auto& l : labels) l = r.u32();
    try {
      d.attributes.push_back(make_attribute(std::move(name), classes, std::move(labels)));
    } catch (const Error& e) {
      fail(ErrorCode::kFormat, e.what());
    }
  }
  require(r.at_end(), ErrorCode::kFormat, "trailing bytes in dataset file");
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) { byteio::write_file(path, encode_dataset(d)); }

Dataset load_dataset(const std::string& path) { return decode_dataset(byteio::read_file(path)); }

}  // namespace nopeek
