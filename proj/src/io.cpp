#include "hsu/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace hsu {

namespace {

constexpr std::array<char, 4> kCubeMagic = {'H', 'C', 'U', 'B'};
constexpr std::uint32_t kCubeVersion = 1;
constexpr std::size_t kCubeHeaderBytes = 4 + 4 * 4;

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t offset)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
    }
    return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what)
{
    if (v > 0xFFFFFFFFu) {
        throw InvariantError(std::string(what) + " does not fit in u32");
    }
    return static_cast<std::uint32_t>(v);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t size)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

} // namespace

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset)
{
}

ParseError::ParseError(const std::string& what, std::size_t row, std::size_t column)
    : std::runtime_error(what + " at row " + std::to_string(row) + ", column " + std::to_string(column)),
      row_(row), column_(column)
{
}

std::vector<std::uint8_t> encode_cube(const HyperCube& cube)
{
    std::vector<std::uint8_t> out;
    out.reserve(kCubeHeaderBytes + cube.data().size() * 4);
    out.insert(out.end(), kCubeMagic.begin(), kCubeMagic.end());
    put_u32(out, kCubeVersion);
    put_u32(out, checked_u32(cube.height(), "height"));
    put_u32(out, checked_u32(cube.width(), "width"));
    put_u32(out, checked_u32(cube.bands(), "bands"));
    for (double v : cube.data()) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

HyperCube decode_cube(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < kCubeHeaderBytes) {
        throw FormatError("truncated cube header", bytes.size());
    }
    if (std::memcmp(bytes.data(), kCubeMagic.data(), kCubeMagic.size()) != 0) {
        throw FormatError("bad cube magic", 0);
    }
    const auto version = get_u32(bytes, 4);
    if (version != kCubeVersion) {
        throw FormatError("unsupported cube version " + std::to_string(version), 4);
    }
    const std::size_t height = get_u32(bytes, 8);
    const std::size_t width = get_u32(bytes, 12);
    const std::size_t bands = get_u32(bytes, 16);
    const std::size_t count = height * width * bands;
    const std::size_t expected = kCubeHeaderBytes + count * 4;
    if (bytes.size() < expected) {
        throw FormatError("truncated cube payload: expected " + std::to_string(expected) + " bytes",
                          bytes.size());
    }
    if (bytes.size() > expected) {
        throw FormatError("trailing bytes after cube payload", expected);
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t offset = kCubeHeaderBytes + 4 * i;
        const float f = std::bit_cast<float>(get_u32(bytes, offset));
        if (!std::isfinite(f)) {
            throw FormatError("non-finite sample", offset);
        }
        data[i] = f;
    }
    return HyperCube(height, width, bands, std::move(data));
}

void save_cube(const std::filesystem::path& path, const HyperCube& cube)
{
    const auto bytes = encode_cube(cube);
    write_file(path, bytes.data(), bytes.size());
}

HyperCube load_cube(const std::filesystem::path& path)
{
    return decode_cube(read_file(path));
}

HyperCube endmember_tensor_to_cube(const EndmemberTensor& em, std::size_t height, std::size_t width)
{
    if (height * width != em.pixel_count()) {
        throw InvariantError("endmember tensor pixel count does not match height*width");
    }
    return HyperCube(height, width, em.bands() * em.materials(), em.data());
}

EndmemberTensor endmember_tensor_from_cube(const HyperCube& cube, std::size_t materials)
{
    if (materials == 0 || cube.bands() % materials != 0) {
        throw InvariantError("cube band count " + std::to_string(cube.bands()) +
                             " is not a multiple of the material count " + std::to_string(materials));
    }
    EndmemberTensor em(cube.bands() / materials, materials, cube.pixel_count());
    em.data() = cube.data();
    return em;
}

std::string format_double(double v)
{
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

std::string format_matrix_csv(const Matrix& m)
{
    std::string out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) {
                out += ',';
            }
            out += format_double(m(r, c));
        }
        out += '\n';
    }
    return out;
}

Matrix parse_matrix_csv(const std::string& text)
{
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            end = text.size();
        }
        std::string_view line(text.data() + start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        std::size_t col_no = 0;
        std::size_t pos = 0;
        while (true) {
            ++col_no;
            const std::size_t comma = line.find(',', pos);
            std::string_view cell = line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos);
            while (!cell.empty() && cell.front() == ' ') {
                cell.remove_prefix(1);
            }
            while (!cell.empty() && cell.back() == ' ') {
                cell.remove_suffix(1);
            }
            if (!cell.empty() && cell.front() == '+') {
                cell.remove_prefix(1);
            }
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
                throw ParseError("non-numeric cell '" + std::string(cell) + "'", line_no, col_no);
            }
            row.push_back(v);
            if (comma == std::string_view::npos) {
                break;
            }
            pos = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError("ragged row with " + std::to_string(row.size()) + " cells", line_no, row.size());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        return {};
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

void save_matrix_csv(const std::filesystem::path& path, const Matrix& m)
{
    const auto text = format_matrix_csv(m);
    write_file(path, text.data(), text.size());
}

Matrix load_matrix_csv(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    return parse_matrix_csv(std::string(bytes.begin(), bytes.end()));
}

} // namespace hsu
