#include "render.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hsu::cli {

namespace {

std::vector<std::uint8_t> header(const char* magic, std::size_t height, std::size_t width, std::size_t map_size)
{
    if (map_size != height * width) {
        throw InvariantError("abundance map has " + std::to_string(map_size) + " pixels, expected " +
                             std::to_string(height) + "x" + std::to_string(width));
    }
    const std::string h = std::string(magic) + "\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    return {h.begin(), h.end()};
}

std::uint8_t lerp_byte(double from, double to, double t)
{
    return static_cast<std::uint8_t>(std::lround(from + (to - from) * t));
}

} // namespace

std::uint8_t grey_level(double a)
{
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(a, 0.0, 1.0)));
}

std::array<std::uint8_t, 3> ramp_color(double a)
{
    const double t = std::clamp(a, 0.0, 1.0);
    if (t <= 0.5) {
        const double u = t / 0.5;
        return {lerp_byte(0, 128, u), 0, lerp_byte(255, 128, u)};
    }
    const double u = (t - 0.5) / 0.5;
    return {lerp_byte(128, 255, u), 0, lerp_byte(128, 0, u)};
}

std::vector<std::uint8_t> encode_pgm(const Eigen::Ref<const Vector>& map, std::size_t height, std::size_t width)
{
    auto out = header("P5", height, width, static_cast<std::size_t>(map.size()));
    for (Eigen::Index n = 0; n < map.size(); ++n) {
        out.push_back(grey_level(map(n)));
    }
    return out;
}

std::vector<std::uint8_t> encode_ppm(const Eigen::Ref<const Vector>& map, std::size_t height, std::size_t width)
{
    auto out = header("P6", height, width, static_cast<std::size_t>(map.size()));
    for (Eigen::Index n = 0; n < map.size(); ++n) {
        const auto c = ramp_color(map(n));
        out.insert(out.end(), c.begin(), c.end());
    }
    return out;
}

} // namespace hsu::cli
