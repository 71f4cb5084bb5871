#pragma once

#include "hsu/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hsu {

/// Malformed binary file; `offset` is the byte position where decoding failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset);
    std::uint64_t offset() const { return offset_; }

private:
    std::uint64_t offset_;
};

/// Malformed CSV; row and column are 1-based.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column);
    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

// .hcube: "HCUB", u32 version=1, u32 height, u32 width, u32 bands, then f32 samples,
// all little-endian, pixel-major.
void save_cube(const std::filesystem::path& path, const HyperCube& cube);
HyperCube load_cube(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_cube(const HyperCube& cube);
HyperCube decode_cube(const std::vector<std::uint8_t>& bytes);

/// Endmember tensors travel as cubes with bands*materials samples per pixel, one
/// material's L bands after another.
HyperCube endmember_tensor_to_cube(const EndmemberTensor& em, std::size_t height, std::size_t width);
EndmemberTensor endmember_tensor_from_cube(const HyperCube& cube, std::size_t materials);

/// Comma-separated rows, '\n' line endings, no header.
void save_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix load_matrix_csv(const std::filesystem::path& path);
Matrix parse_matrix_csv(const std::string& text);
std::string format_matrix_csv(const Matrix& m);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

} // namespace hsu
