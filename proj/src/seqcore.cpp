#include "neurolds/seqcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "neurolds/rng.hpp"

namespace neurolds {

double radical_inverse(std::uint64_t i, std::uint32_t base) {
    if (base < 2) throw std::invalid_argument("radical_inverse: base must be at least 2");
    const double inv = 1.0 / static_cast<double>(base);
    double scale = inv;
    double r = 0.0;
    while (i > 0) {
        r += static_cast<double>(i % base) * scale;
        i /= base;
        scale *= inv;
    }
    // Long digit strings in odd bases can round up to exactly 1.
    return std::min(r, 0x1.fffffffffffffp-1);
}

namespace {

std::mutex g_prime_mutex;
std::vector<std::uint32_t> g_primes;

void sieve_at_least(std::size_t count) {
    std::size_t limit = std::max<std::size_t>(64, g_primes.empty() ? 64 : 2 * static_cast<std::size_t>(g_primes.back()));
    while (g_primes.size() < count) {
        std::vector<bool> composite(limit + 1, false);
        std::vector<std::uint32_t> primes;
        for (std::size_t p = 2; p <= limit; ++p) {
            if (composite[p]) continue;
            primes.push_back(static_cast<std::uint32_t>(p));
            for (std::size_t q = p * p; q <= limit; q += p) composite[q] = true;
        }
        g_primes = std::move(primes);
        limit *= 2;
    }
}

}  // namespace

std::uint32_t nth_prime(std::size_t j) {
    std::lock_guard<std::mutex> lock(g_prime_mutex);
    if (j >= g_primes.size()) sieve_at_least(j + 1);
    return g_primes[j];
}

std::vector<double> halton_point(std::uint64_t i, std::size_t dim) {
    if (dim == 0) throw std::invalid_argument("halton_point: dim must be at least 1");
    std::vector<double> out(dim);
    for (std::size_t j = 0; j < dim; ++j) out[j] = radical_inverse(i, nth_prime(j));
    return out;
}

// ---------------------------------------------------------------------------
// Direction numbers

DirectionTable::DirectionTable(std::vector<Entry> entries) : entries_(std::move(entries)) {
    for (std::size_t e = 0; e < entries_.size(); ++e) {
        const Entry& en = entries_[e];
        const std::string where = "direction table dimension " + std::to_string(en.dimension);
        if (en.dimension != e + 2) {
            throw std::invalid_argument(where + ": dimensions must be consecutive starting at 2");
        }
        if (en.degree == 0 || en.degree > 31) throw std::invalid_argument(where + ": degree out of range");
        if (en.initial.size() != en.degree) {
            throw std::invalid_argument(where + ": expected " + std::to_string(en.degree) + " initial values");
        }
        if (en.degree > 1 && en.coefficients >= (1u << (en.degree - 1))) {
            throw std::invalid_argument(where + ": coefficient word has more than s-1 bits");
        }
        if (en.degree == 1 && en.coefficients != 0) throw std::invalid_argument(where + ": coefficient word must be 0");
        for (std::size_t k = 0; k < en.initial.size(); ++k) {
            const std::uint32_t m = en.initial[k];
            if (m % 2 == 0 || m >= (1u << (k + 1))) {
                throw std::invalid_argument(where + ": initial value m_" + std::to_string(k + 1) +
                                            " must be odd and below 2^" + std::to_string(k + 1));
            }
        }
    }
}

DirectionTable DirectionTable::parse(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("direction table: empty input");
    std::vector<Entry> entries;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        Entry e;
        if (!(ls >> e.dimension)) continue;  // blank line
        if (!(ls >> e.degree >> e.coefficients)) {
            throw std::invalid_argument("direction table line " + std::to_string(line_no) + ": expected `d s a m_1 .. m_s`");
        }
        e.initial.resize(e.degree);
        for (auto& m : e.initial) {
            if (!(ls >> m)) {
                throw std::invalid_argument("direction table line " + std::to_string(line_no) + ": too few m values");
            }
        }
        entries.push_back(std::move(e));
    }
    return DirectionTable(std::move(entries));
}

DirectionTable DirectionTable::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open direction-number file '" + path + "'");
    return parse(in);
}

const DirectionTable& DirectionTable::embedded() {
    static const DirectionTable table = [] {
        std::istringstream in(
#include "joe_kuo_embedded.inc"
        );
        return parse(in);
    }();
    return table;
}

std::vector<std::vector<std::uint32_t>> DirectionTable::direction_integers(std::size_t dim) const {
    if (dim == 0) throw std::invalid_argument("Sobol': dim must be at least 1");
    if (dim > max_dim()) {
        throw std::invalid_argument("Sobol' dimension " + std::to_string(dim) +
                                    " exceeds the direction table (max supported dimension " +
                                    std::to_string(max_dim()) + ")");
    }
    constexpr int W = kSobolBits;
    std::vector<std::vector<std::uint32_t>> v(dim, std::vector<std::uint32_t>(W));
    for (int k = 0; k < W; ++k) v[0][k] = 1u << (W - 1 - k);
    for (std::size_t j = 1; j < dim; ++j) {
        const Entry& e = entries_[j - 1];
        const int s = static_cast<int>(e.degree);
        auto& vj = v[j];
        for (int k = 0; k < std::min(s, W); ++k) vj[k] = e.initial[k] << (W - 1 - k);
        // v_k = a_1 v_{k-1} ^ ... ^ a_{s-1} v_{k-s+1} ^ v_{k-s} ^ (v_{k-s} >> s)
        for (int k = s; k < W; ++k) {
            std::uint32_t x = vj[k - s] ^ (vj[k - s] >> s);
            for (int i = 1; i < s; ++i) {
                if ((e.coefficients >> (s - 1 - i)) & 1u) x ^= vj[k - i];
            }
            vj[k] = x;
        }
    }
    return v;
}

SobolGenerator::SobolGenerator(std::size_t dim, const DirectionTable& table) : dim_(dim) {
    const auto v = table.direction_integers(dim);
    directions_.reserve(dim * kSobolBits);
    for (const auto& vj : v) directions_.insert(directions_.end(), vj.begin(), vj.end());
}

std::uint32_t SobolGenerator::bits(std::uint64_t i, std::size_t j) const {
    if (i >> kSobolBits) {
        throw std::out_of_range("Sobol' index " + std::to_string(i) + " needs more than " +
                                std::to_string(kSobolBits) + " direction numbers");
    }
    const std::uint32_t* v = directions_.data() + j * kSobolBits;
    std::uint32_t x = 0;
    for (std::uint64_t g = gray_code(i); g != 0; g >>= 1, ++v) {
        if (g & 1u) x ^= *v;
    }
    return x;
}

void SobolGenerator::point(std::uint64_t i, std::span<double> out) const {
    for (std::size_t j = 0; j < dim_; ++j) out[j] = static_cast<double>(bits(i, j)) * 0x1.0p-32;
}

std::vector<double> SobolGenerator::point(std::uint64_t i) const {
    std::vector<double> out(dim_);
    point(i, out);
    return out;
}

std::vector<double> sobol_point(std::uint64_t i, std::size_t dim, const DirectionTable& table) {
    return SobolGenerator(dim, table).point(i);
}

// ---------------------------------------------------------------------------
// Owen scrambling

std::uint32_t owen_scramble_bits(std::uint32_t x, std::uint64_t seed, std::size_t dimension) {
    const std::uint64_t dim_seed = split_seed(seed, dimension);
    std::uint32_t out = x;
    for (int k = 0; k < kSobolBits; ++k) {
        // The k leading input bits select the node of the flip tree.
        const std::uint64_t prefix = k == 0 ? 0 : (x >> (kSobolBits - k));
        const std::uint64_t node = (std::uint64_t{1} << k) | prefix;
        const std::uint64_t flip = mix64(dim_seed ^ mix64(node)) >> 63;
        out ^= static_cast<std::uint32_t>(flip) << (kSobolBits - 1 - k);
    }
    return out;
}

PointBuffer owen_scramble(std::span<const std::uint32_t> raw, std::size_t dim, std::uint64_t seed) {
    if (dim == 0 || raw.size() % dim != 0) {
        throw std::invalid_argument("owen_scramble: raw length is not a multiple of dim");
    }
    const std::size_t n = raw.size() / dim;
    PointBuffer out(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            out(i, j) = static_cast<double>(owen_scramble_bits(raw[i * dim + j], seed, j)) * 0x1.0p-32;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SequenceKind kind) {
    switch (kind) {
        case SequenceKind::vdc: return "vdc";
        case SequenceKind::halton: return "halton";
        case SequenceKind::sobol: return "sobol";
        case SequenceKind::sobol_scrambled: return "sobol-scrambled";
        case SequenceKind::uniform: return "uniform";
        case SequenceKind::neural: return "neural";
    }
    return "?";
}

SequenceKind parse_sequence_kind(std::string_view name) {
    for (SequenceKind k : {SequenceKind::vdc, SequenceKind::halton, SequenceKind::sobol,
                           SequenceKind::sobol_scrambled, SequenceKind::uniform, SequenceKind::neural}) {
        if (to_string(k) == name) return k;
    }
    if (name == "sobol_scrambled" || name == "scrambled") return SequenceKind::sobol_scrambled;
    throw std::invalid_argument("unknown sequence kind '" + std::string(name) +
                                "' (expected vdc, halton, sobol, sobol-scrambled, uniform or neural)");
}

void SequenceSpec::validate() const {
    if (dim == 0) throw std::invalid_argument("sequence dim must be at least 1");
    if (kind == SequenceKind::vdc && dim != 1) throw std::invalid_argument("van der Corput is one-dimensional");
    if (randomized() && !seed) {
        throw std::invalid_argument(std::string(to_string(kind)) + " sequences require a seed");
    }
    if (!randomized() && seed) {
        throw std::invalid_argument(std::string(to_string(kind)) + " sequences are deterministic; seed not allowed");
    }
    if (kind == SequenceKind::neural && !model_path) throw std::invalid_argument("neural sequences require a model path");
}

}  // namespace neurolds
