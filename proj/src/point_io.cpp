#include "neurolds/point_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace neurolds {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

namespace {
template <class T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("unexpected end of binary data");
    return v;
}
}  // namespace

std::uint32_t read_u32(std::istream& in) { return read_raw<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_raw<std::uint64_t>(in); }
double read_f64(std::istream& in) { return read_raw<double>(in); }

void write_points_csv(std::ostream& out, const PointBuffer& points) {
    char buf[32];
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < points.dim(); ++j) {
            if (j) out.put(',');
            const auto res = std::to_chars(buf, buf + sizeof buf, points(i, j), std::chars_format::general, 17);
            out.write(buf, res.ptr - buf);
        }
        out.put('\n');
    }
}

PointBuffer read_points_csv(std::istream& in) {
    std::vector<double> coords;
    std::size_t dim = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t fields = 0;
        const char* p = line.data();
        const char* end = p + line.size();
        while (p <= end) {
            while (p < end && *p == ' ') ++p;
            double v = 0.0;
            const auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc{}) {
                throw std::runtime_error("CSV line " + std::to_string(line_no) + ": cannot parse number");
            }
            coords.push_back(v);
            ++fields;
            p = res.ptr;
            while (p < end && *p == ' ') ++p;
            if (p == end) break;
            if (*p != ',') throw std::runtime_error("CSV line " + std::to_string(line_no) + ": expected ','");
            ++p;
        }
        if (dim == 0) dim = fields;
        if (fields != dim) {
            throw std::runtime_error("CSV line " + std::to_string(line_no) + ": has " + std::to_string(fields) +
                                     " columns, expected " + std::to_string(dim));
        }
        ++rows;
    }
    return PointBuffer(rows, dim, std::move(coords));
}

void write_points_binary(std::ostream& out, const PointBuffer& points) {
    if (points.size() > 0xffffffffu || points.dim() > 0xffffffffu) {
        throw std::invalid_argument("point buffer too large for the binary format");
    }
    out.write(kPointMagic, sizeof kPointMagic);
    write_u32(out, kPointFormatVersion);
    write_u32(out, static_cast<std::uint32_t>(points.size()));
    write_u32(out, static_cast<std::uint32_t>(points.dim()));
    out.write(reinterpret_cast<const char*>(points.data()),
              static_cast<std::streamsize>(points.coords().size() * sizeof(double)));
}

PointBuffer read_points_binary(std::istream& in) {
    char magic[4];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kPointMagic, sizeof magic) != 0) {
        throw std::runtime_error("not a point file (bad magic)");
    }
    const std::uint32_t version = read_u32(in);
    if (version != kPointFormatVersion) {
        throw std::runtime_error("unsupported point format version " + std::to_string(version));
    }
    const std::uint32_t n = read_u32(in);
    const std::uint32_t d = read_u32(in);
    std::vector<double> coords(static_cast<std::size_t>(n) * d);
    in.read(reinterpret_cast<char*>(coords.data()), static_cast<std::streamsize>(coords.size() * sizeof(double)));
    if (!in) throw std::runtime_error("point file truncated");
    return PointBuffer(n, d, std::move(coords));
}

namespace {
bool is_binary_path(const std::string& path) {
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
}
}  // namespace

void save_points(const std::string& path, const PointBuffer& points) {
    const bool binary = is_binary_path(path);
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    if (binary) {
        write_points_binary(out, points);
    } else {
        write_points_csv(out, points);
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

PointBuffer load_points(const std::string& path) {
    const bool binary = is_binary_path(path);
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return binary ? read_points_binary(in) : read_points_csv(in);
}

}  // namespace neurolds
