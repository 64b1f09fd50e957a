#pragma once

#include <cstdint>

namespace neurolds {

// SplitMix64 finalizer; the building block of every counter-based stream here.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent sub-seed for `stream` from a master seed:
//   split_seed(s, k) = mix64(s ^ mix64(k + 0x632be59bd9b4e019))
// All randomized components take their seeds through this function.
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// Hash of a (seed, a, b) triple.
constexpr std::uint64_t hash3(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(seed ^ mix64(a)) ^ b);
}

// Maps 64 random bits to a double in [0,1) with 53 bits of resolution.
constexpr double bits_to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based uniform stream: value k of stream `seed`.
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
    return bits_to_unit(hash3(seed, counter, 0x5851f42d4c957f2dULL));
}

// Small sequential generator satisfying UniformRandomBitGenerator.
class SplitMix64 {
public:
    using result_type = std::uint64_t;
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return bits_to_unit((*this)()); }

private:
    std::uint64_t state_;
};

}  // namespace neurolds
