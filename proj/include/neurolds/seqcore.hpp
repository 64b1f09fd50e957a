#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neurolds/point_buffer.hpp"

namespace neurolds {

// Digit reversal of i in base b across the radix point. Result is in [0,1).
double radical_inverse(std::uint64_t i, std::uint32_t base);

// j-th prime, zero based (nth_prime(0) == 2). Backed by a lazily grown sieve.
std::uint32_t nth_prime(std::size_t j);

// Point i of the Halton sequence in the first `dim` prime bases.
std::vector<double> halton_point(std::uint64_t i, std::size_t dim);

constexpr std::uint64_t gray_code(std::uint64_t i) { return i ^ (i >> 1); }

// Word width of Sobol' and scrambled coordinates.
inline constexpr int kSobolBits = 32;

// Primitive polynomials and initial direction integers in the Joe-Kuo layout.
// Dimension 1 is van der Corput and has no entry.
class DirectionTable {
public:
    struct Entry {
        std::uint32_t dimension = 0;     // 2, 3, ...
        std::uint32_t degree = 0;        // s
        std::uint32_t coefficients = 0;  // a: bits a_1..a_{s-1}, a_1 most significant
        std::vector<std::uint32_t> initial;  // m_1..m_s
    };

    DirectionTable() = default;
    explicit DirectionTable(std::vector<Entry> entries);

    // Table compiled into the library (dimensions 1..64).
    static const DirectionTable& embedded();
    // Parses whitespace-separated `d s a m_1 .. m_s` lines after a header line.
    static DirectionTable parse(std::istream& in);
    static DirectionTable from_file(const std::string& path);

    std::size_t max_dim() const { return entries_.size() + 1; }
    const std::vector<Entry>& entries() const { return entries_; }

    // kSobolBits direction integers for each of the first `dim` dimensions,
    // left aligned so that bit 31 is the first binary digit.
    std::vector<std::vector<std::uint32_t>> direction_integers(std::size_t dim) const;

private:
    std::vector<Entry> entries_;
};

// Precomputed direction integers for a fixed dimension.
class SobolGenerator {
public:
    SobolGenerator(std::size_t dim, const DirectionTable& table = DirectionTable::embedded());

    std::size_t dim() const { return dim_; }
    // Raw W-bit integer of coordinate j for natural index i (Gray-code order).
    std::uint32_t bits(std::uint64_t i, std::size_t j) const;
    void point(std::uint64_t i, std::span<double> out) const;
    std::vector<double> point(std::uint64_t i) const;

private:
    std::size_t dim_;
    std::vector<std::uint32_t> directions_;  // dim_ x kSobolBits
};

std::vector<double> sobol_point(std::uint64_t i, std::size_t dim,
                                const DirectionTable& table = DirectionTable::embedded());

// Owen nested uniform scrambling of one W-bit coordinate. The flip applied to
// bit k depends only on (seed, dimension, the k more significant input bits).
std::uint32_t owen_scramble_bits(std::uint32_t x, std::uint64_t seed, std::size_t dimension);

// Scrambles n x dim raw W-bit digital points (row-major) into unit-cube doubles.
PointBuffer owen_scramble(std::span<const std::uint32_t> raw, std::size_t dim, std::uint64_t seed);

enum class SequenceKind { vdc, halton, sobol, sobol_scrambled, uniform, neural };

std::string_view to_string(SequenceKind kind);
SequenceKind parse_sequence_kind(std::string_view name);

struct SequenceSpec {
    SequenceKind kind = SequenceKind::sobol;
    std::size_t dim = 1;
    std::uint64_t burn_in = 0;
    std::optional<std::uint64_t> seed;       // sobol_scrambled and uniform only
    std::optional<std::string> model_path;   // neural only
    const DirectionTable* table = nullptr;   // sobol kinds; null means embedded

    bool randomized() const { return kind == SequenceKind::sobol_scrambled || kind == SequenceKind::uniform; }
    // Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

struct GenerateInfo {
    // Neural only: some requested index exceeded the model's training length.
    bool beyond_training_length = false;
};

// Points for raw indices burn_in .. burn_in + n - 1.
PointBuffer generate(const SequenceSpec& spec, std::size_t n, GenerateInfo* info = nullptr);

}  // namespace neurolds
