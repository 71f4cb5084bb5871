#pragma once

#include "hsu/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace hsu::cli {

/// round(255 * clamp(a, 0, 1)).
std::uint8_t grey_level(double a);

/// Blue (0,0,255) at 0, through (128,0,128) at 0.5, to red (255,0,0) at 1; linear between.
std::array<std::uint8_t, 3> ramp_color(double a);

/// Binary PGM (P5, maxval 255) of one abundance map stored row-major.
std::vector<std::uint8_t> encode_pgm(const Eigen::Ref<const Vector>& map, std::size_t height, std::size_t width);

/// Binary PPM (P6) of one abundance map through ramp_color.
std::vector<std::uint8_t> encode_ppm(const Eigen::Ref<const Vector>& map, std::size_t height, std::size_t width);

} // namespace hsu::cli
