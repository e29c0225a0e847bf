#include "nopeek/images.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "nopeek/byteio.hpp"
#include "nopeek/errors.hpp"

namespace nopeek {

std::vector<std::uint8_t> encode_ppm(std::size_t width, std::size_t height, std::span<const std::uint8_t> rgb) {
  require(rgb.size() == width * height * 3, ErrorCode::kDimension, "PPM pixel buffer size");
  const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), rgb.begin(), rgb.end());
  return out;
}

std::vector<std::uint8_t> activation_rgb(std::span<const double> values, const ImageShape& s) {
  require(s.channels >= 1 && s.channels <= 3, ErrorCode::kConfig, "activation images need 1 to 3 channels");
  require(values.size() == s.size(), ErrorCode::kConfig, "activation width does not match the image shape");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  auto level = [&](double v) -> std::uint8_t {
    if (!(range > 0.0)) return 128;
    return static_cast<std::uint8_t>(std::lround(255.0 * (v - lo) / range));
  };
  const std::size_t hw = s.height * s.width;
  std::vector<std::uint8_t> rgb(hw * 3, 0);
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      if (c >= s.channels && s.channels != 1) continue;
      const std::size_t ch = s.channels == 1 ? 0 : c;
      const std::size_t idx = s.planar ? ch * hw + p : p * s.channels + ch;
      rgb[p * 3 + c] = level(values[idx]);
    }
  return rgb;
}

ImageShape activation_shape(const SplitModel& m, const Dataset& d, std::size_t upto) {
  require(upto <= m.layers.size(), ErrorCode::kConfig, "layer index beyond the model");
  if (upto == 0) {
    require(d.image.has_value(), ErrorCode::kConfig, "dataset '" + d.name + "' has no image shape");
    return *d.image;
  }
  const LayerSpec& spec = m.layers[upto - 1].spec;
  // A relu keeps the shape of the patch-dense layer feeding it.
  for (std::size_t i = upto; i-- > 0;) {
    const LayerSpec& s = m.layers[i].spec;
    if (s.kind == LayerKind::kPatchDense) {
      const PatchGeometry& g = *s.patch;
      require(g.out_channels <= 3, ErrorCode::kConfig, "patch layer has more than 3 output channels");
      return ImageShape{g.out_height(), g.out_width(), g.out_channels, false};
    }
    if (s.kind != LayerKind::kRelu) break;
  }
  if (d.image && d.image->size() == spec.out_dim) return *d.image;
  fail(ErrorCode::kConfig, "output of layer " + std::to_string(upto) + " (width " + std::to_string(spec.out_dim) +
                               ") is not reshapeable to an image");
}

std::vector<std::string> dump_activation_images(const SplitModel& m, const Dataset& d, std::size_t upto,
                                                const std::string& dir, std::size_t count) {
  const ImageShape shape = activation_shape(m, d, upto);
  const std::size_t n = std::min(count, d.size());
  const Matrix act = forward_prefix(m, slice_rows(d.x, 0, n), upto);
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = act.row(i);
    const auto rgb = activation_rgb(std::span<const double>(row.data(), row.size()), shape);
    const std::string path = (std::filesystem::path(dir) / ("act_" + std::to_string(i) + ".ppm")).string();
    byteio::write_file(path, encode_ppm(shape.width, shape.height, rgb));
    paths.push_back(path);
  }
  return paths;
}

std::vector<std::uint8_t> side_by_side_ppm(std::span<const double> x, std::span<const double> x_hat,
                                           const ImageShape& shape) {
  const auto a = activation_rgb(x, shape);
  const auto b = activation_rgb(x_hat, shape);
  const std::size_t w = shape.width, h = shape.height;
  std::vector<std::uint8_t> rgb(2 * w * h * 3);
  for (std::size_t y = 0; y < h; ++y) {
    std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(y * w * 3), w * 3, rgb.begin() + static_cast<std::ptrdiff_t>(y * 2 * w * 3));
    std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(y * w * 3), w * 3,
                rgb.begin() + static_cast<std::ptrdiff_t>((y * 2 + 1) * w * 3));
  }
  return encode_ppm(2 * w, h, rgb);
}

}  // namespace nopeek
