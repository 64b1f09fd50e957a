#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "neurolds/point_buffer.hpp"

namespace neurolds {

// CSV: one point per row, comma separated, 17 significant digits, no header.
void write_points_csv(std::ostream& out, const PointBuffer& points);
PointBuffer read_points_csv(std::istream& in);

// Binary: 16-byte little-endian header {magic "NLDP", u32 version, u32 n, u32 d}
// followed by n*d little-endian IEEE-754 doubles, row-major.
inline constexpr char kPointMagic[4] = {'N', 'L', 'D', 'P'};
inline constexpr std::uint32_t kPointFormatVersion = 1;

void write_points_binary(std::ostream& out, const PointBuffer& points);
PointBuffer read_points_binary(std::istream& in);

// Dispatch on extension: ".bin" is binary, anything else CSV.
void save_points(const std::string& path, const PointBuffer& points);
PointBuffer load_points(const std::string& path);

// Little-endian helpers shared with the model container.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

}  // namespace neurolds
