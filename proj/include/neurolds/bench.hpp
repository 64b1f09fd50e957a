#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurolds/seqcore.hpp"

namespace neurolds {

using Integrand = std::function<double(std::span<const double>)>;

// ---------------------------------------------------------------------------
// Borehole

struct Range {
    double lo = 0.0;
    double hi = 1.0;
    double map(double u) const { return lo + u * (hi - lo); }
};

struct BoreholeSpec {
    // r_w, r, T_u, H_u, T_l, H_l, L, K_w
    std::array<Range, 8> ranges{{{0.05, 0.15},
                                 {100.0, 50000.0},
                                 {63070.0, 115600.0},
                                 {990.0, 1110.0},
                                 {63.1, 116.0},
                                 {700.0, 820.0},
                                 {1120.0, 1680.0},
                                 {9855.0, 12045.0}}};
    static constexpr std::array<const char*, 8> names{"r_w", "r", "T_u", "H_u", "T_l", "H_l", "L", "K_w"};
};

// Flow rate at the unit-cube point u mapped affinely onto the parameter ranges.
double borehole(std::span<const double> u, const BoreholeSpec& spec = {});

// Plain Monte Carlo reference for the Borehole integral.
inline constexpr std::uint64_t kBoreholeReferenceSeed = 20240521;
inline constexpr std::size_t kBoreholeReferenceSamples = std::size_t{1} << 21;
double borehole_reference(std::uint64_t seed = kBoreholeReferenceSeed,
                          std::size_t samples = kBoreholeReferenceSamples, const BoreholeSpec& spec = {});

// ---------------------------------------------------------------------------
// Integration

struct Checkpoint {
    std::size_t n = 0;
    double estimate = 0.0;
    std::optional<double> abs_error;
};

struct IntegrationResult {
    double estimate = 0.0;
    std::vector<Checkpoint> checkpoints;
};

std::vector<std::size_t> default_checkpoints();  // 20, 60, 100, ..., 500

// Sample mean of f over the first n points of the sequence, with running
// estimates at every checkpoint <= n. Errors are filled only when a reference is given.
IntegrationResult integrate(const SequenceSpec& seq, const Integrand& f, std::size_t n,
                            std::optional<double> reference = std::nullopt,
                            std::vector<std::size_t> checkpoints = default_checkpoints());
IntegrationResult integrate_points(const PointBuffer& points, const Integrand& f,
                                   std::optional<double> reference = std::nullopt,
                                   std::vector<std::size_t> checkpoints = default_checkpoints());

// `N,abs_error` rows (estimate only when no reference was supplied: `N,estimate`).
void write_error_csv(std::ostream& out, const IntegrationResult& result);

// ---------------------------------------------------------------------------
// Sensitivity

struct SensitivityResult {
    std::vector<double> first_order;  // S_i
    std::vector<double> total;        // S_Ti
    std::vector<double> first_order_se;
    std::vector<double> total_se;
    std::size_t base_n = 0;
    std::size_t evaluations = 0;  // base_n * (2d + 2)
};

// Saltelli design on a scrambled Sobol' sample of dimension 2d. Uses Jansen
// estimators, averaged over the (A, AB_i) and (B, BA_i) pairings.
SensitivityResult sensitivity(const Integrand& f, std::size_t dim, std::size_t base_n, std::uint64_t seed);

// Total-order indices normalized by their maximum, plus floor, clamped to [floor, 1].
std::vector<double> weights_from_sensitivity(const SensitivityResult& result, double floor);

// `param,S1,ST` rows.
void write_sensitivity_csv(std::ostream& out, const SensitivityResult& result,
                           std::span<const std::string> names = {});

// ---------------------------------------------------------------------------
// Geometric basket option

double normal_cdf(double x);

struct BasketOptionSpec {
    std::size_t dim = 2;
    std::vector<double> sigma;  // dim x dim row-major
    double maturity = 5.0;      // T
    double strike = 0.08;       // K
    double rate = 0.05;         // r

    // sigma = 1e-5 * identity and the remaining defaults.
    static BasketOptionSpec defaults(std::size_t dim);
    void validate() const;
};

// Closed-form price e^{-rT} (s e^{m~} Phi(d1) - K Phi(d2)) at initial prices S.
double basket_price(std::span<const double> prices, const BasketOptionSpec& spec);

}  // namespace neurolds
