#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nopeek/dataset.hpp"
#include "nopeek/model.hpp"

namespace nopeek {

/// Binary PPM: "P6\n<w> <h>\n255\n" then w*h RGB triples.
std::vector<std::uint8_t> encode_ppm(std::size_t width, std::size_t height, std::span<const std::uint8_t> rgb);

/// One activation vector as RGB, min-max normalised over the image. One
/// channel is replicated to gray; two channels leave blue at 0. A constant
/// vector maps to uniform mid-gray.
std::vector<std::uint8_t> activation_rgb(std::span<const double> values, const ImageShape& shape);

/// Output shape of layers [0, upto): the input image for upto = 0, a
/// patch-dense geometry, or the input image shape when the width matches.
/// Anything not reshapeable to (h, w, <= 3) is a kConfig error.
ImageShape activation_shape(const SplitModel& m, const Dataset& d, std::size_t upto);

/// Writes <dir>/act_<i>.ppm for the first `count` samples; returns the paths.
std::vector<std::string> dump_activation_images(const SplitModel& m, const Dataset& d, std::size_t upto,
                                                const std::string& dir, std::size_t count);

/// Original and reconstruction side by side (each normalised separately).
std::vector<std::uint8_t> side_by_side_ppm(std::span<const double> x, std::span<const double> x_hat,
                                           const ImageShape& shape);

}  // namespace nopeek
