#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nopeek/errors.hpp"
#include "nopeek/matrix.hpp"

namespace nopeek {

/// One categorical labeling of the rows (e.g. class, parity, quadrant).
struct Attribute {
  std::string name;
  std::size_t classes = 0;
  std::vector<std::uint32_t> labels;
  Matrix onehot;  // n x classes
};

struct ImageShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  /// true: channel-planar (CIFAR-10 files); false: interleaved (y, x, c).
  bool planar = false;

  std::size_t size() const { return height * width * channels; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// Per-feature affine map applied to X: x_std = (x_raw - mean) / stddev.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Dataset {
  std::string name;
  Matrix x;
  std::vector<Attribute> attributes;
  std::optional<ImageShape> image;
  Normalization norm;

  std::size_t size() const { return x.rows(); }
  std::size_t dim() const { return x.cols(); }

  const Attribute& attribute(std::string_view attr) const {
    for (const Attribute& a : attributes)
      if (a.name == attr) return a;
    fail(ErrorCode::kConfig, "dataset '" + name + "' has no attribute '" + std::string(attr) + "'");
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.name = name;
    out.x = gather_rows(x, rows);
    out.image = image;
    out.norm = norm;
    for (const Attribute& a : attributes) {
      Attribute b{a.name, a.classes, {}, gather_rows(a.onehot, rows)};
      for (std::size_t r : rows) b.labels.push_back(a.labels[r]);
      out.attributes.push_back(std::move(b));
    }
    return out;
  }
};

/// Builds an Attribute from integer labels (throws kLabel when out of range).
Attribute make_attribute(std::string name, std::size_t classes, std::vector<std::uint32_t> labels);

struct BlobOptions {
  std::size_t classes = 4;
  /// Distance between any two class centres, in units of the noise sigma.
  double separation = 4.0;
  /// Quadrant centres sit at (+-margin, +-margin) in features 0 and 1.
  double quadrant_margin = 2.0;
  /// Pure-noise features appended after the informative ones.
  std::size_t extra_dims = 2;
};

/// Gaussian class clusters with three labelings: "class", "parity"
/// (class % 2) and "quadrant" (drawn independently of class).
/// Features: [quadrant x, quadrant y, class one-hot directions..., noise...].
Dataset gen_blobs(std::size_t n, std::uint64_t seed, const BlobOptions& opt = {});

struct StripeOptions {
  std::size_t size = 16;
  std::size_t classes = 4;
  double pixel_noise = 0.05;
};

/// size x size x 1 sinusoidal gratings; "class" k is the orientation k*pi/classes.
/// Random frequency and phase per image; pixels clipped to [0, 1].
Dataset gen_stripes(std::size_t n, std::uint64_t seed, const StripeOptions& opt = {});

/// kind is "blobs" or "stripes"; n >= 4.
Dataset gen_synthetic(std::string_view kind, std::size_t n, std::uint64_t seed);

/// CIFAR-10 binary batch: 3073-byte records (label, 1024 R, 1024 G, 1024 B).
/// Pixels scaled to [0, 1]; the channel-planar layout is kept and recorded.
Dataset load_cifar10_bin(const std::string& path);
Dataset decode_cifar10(std::span<const std::uint8_t> bytes);

/// Per-feature mean / population std (std floored to 1 for constant features).
Normalization fit_normalization(const Matrix& x);
Matrix apply_normalization(const Matrix& x, const Normalization& norm);
Matrix invert_normalization(const Matrix& x, const Normalization& norm);
/// Fits on `fit`, then standardizes the X of every dataset given.
void standardize(const Dataset& fit, std::span<Dataset* const> targets);

/// Seeded disjoint split into the first n_first shuffled rows and the next n_second.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, std::size_t n_first, std::size_t n_second,
                                          std::uint64_t seed);

/// "NPKD" container: X, attributes, image shape and normalization record.
std::vector<std::uint8_t> encode_dataset(const Dataset& d);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace nopeek
