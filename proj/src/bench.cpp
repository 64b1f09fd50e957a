#include "neurolds/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "neurolds/parallel.hpp"
#include "neurolds/rng.hpp"

namespace neurolds {

double borehole(std::span<const double> u, const BoreholeSpec& spec) {
    if (u.size() != 8) throw std::invalid_argument("borehole expects 8 coordinates, got " + std::to_string(u.size()));
    const auto& R = spec.ranges;
    const double rw = R[0].map(u[0]);
    const double r = R[1].map(u[1]);
    const double tu = R[2].map(u[2]);
    const double hu = R[3].map(u[3]);
    const double tl = R[4].map(u[4]);
    const double hl = R[5].map(u[5]);
    const double len = R[6].map(u[6]);
    const double kw = R[7].map(u[7]);
    const double lg = std::log(r / rw);
    return 2.0 * std::numbers::pi * tu * (hu - hl) / (lg * (1.0 + 2.0 * len * tu / (lg * rw * rw * kw) + tu / tl));
}

double borehole_reference(std::uint64_t seed, std::size_t samples, const BoreholeSpec& spec) {
    SequenceSpec seq;
    seq.kind = SequenceKind::uniform;
    seq.dim = 8;
    seq.seed = seed;
    const PointBuffer pts = generate(seq, samples);
    std::vector<double> vals(samples);
    const auto rows = static_cast<std::ptrdiff_t>(samples);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t i = 0; i < rows; ++i) vals[i] = borehole(pts.row(i), spec);
    return kahan_total(vals) / static_cast<double>(samples);
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> default_checkpoints() {
    std::vector<std::size_t> out;
    for (std::size_t n = 20; n <= 500; n += 40) out.push_back(n);
    return out;
}

IntegrationResult integrate_points(const PointBuffer& points, const Integrand& f, std::optional<double> reference,
                                   std::vector<std::size_t> checkpoints) {
    const std::size_t n = points.size();
    if (n == 0) throw std::invalid_argument("integrate: no points");
    std::vector<double> vals(n);
    const auto rows = static_cast<std::ptrdiff_t>(n);
    // Integrands are pure; evaluation order does not affect the values.
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t i = 0; i < rows; ++i) vals[i] = f(points.row(i));

    std::sort(checkpoints.begin(), checkpoints.end());
    IntegrationResult res;
    KahanSum acc;
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        acc.add(vals[i]);
        while (next < checkpoints.size() && checkpoints[next] == i + 1) {
            Checkpoint cp;
            cp.n = i + 1;
            cp.estimate = acc.value() / static_cast<double>(i + 1);
            if (reference) cp.abs_error = std::abs(cp.estimate - *reference);
            res.checkpoints.push_back(cp);
            ++next;
        }
        while (next < checkpoints.size() && checkpoints[next] <= i + 1) ++next;  // duplicates and 0
    }
    res.estimate = acc.value() / static_cast<double>(n);
    return res;
}

IntegrationResult integrate(const SequenceSpec& seq, const Integrand& f, std::size_t n,
                            std::optional<double> reference, std::vector<std::size_t> checkpoints) {
    return integrate_points(generate(seq, n), f, reference, std::move(checkpoints));
}

void write_error_csv(std::ostream& out, const IntegrationResult& result) {
    const auto old = out.precision(17);
    const bool errors = !result.checkpoints.empty() && result.checkpoints.front().abs_error.has_value();
    out << (errors ? "N,abs_error\n" : "N,estimate\n");
    for (const auto& cp : result.checkpoints) {
        out << cp.n << ',' << (errors ? *cp.abs_error : cp.estimate) << '\n';
    }
    out.precision(old);
}

// ---------------------------------------------------------------------------

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_and_se(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = kahan_total(v) / n;
    KahanSum ss;
    for (double x : v) ss.add((x - mean) * (x - mean));
    const double var = v.size() > 1 ? ss.value() / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

}  // namespace

SensitivityResult sensitivity(const Integrand& f, std::size_t dim, std::size_t base_n, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("sensitivity: dim must be at least 1");
    if (base_n < 2) throw std::invalid_argument("sensitivity: base_n must be at least 2");
    SequenceSpec seq;
    seq.kind = SequenceKind::sobol_scrambled;
    seq.dim = 2 * dim;
    seq.seed = split_seed(seed, 0x5a1);
    const PointBuffer base = generate(seq, base_n);

    // Rows of A, B, AB_1..AB_d, BA_1..BA_d, evaluated in one parallel pass.
    const std::size_t blocks = 2 * dim + 2;
    std::vector<double> y(blocks * base_n);
    const auto total_rows = static_cast<std::ptrdiff_t>(blocks * base_n);
#pragma omp parallel num_threads(thread_count())
    {
        std::vector<double> x(dim);
#pragma omp for schedule(static)
        for (std::ptrdiff_t r = 0; r < total_rows; ++r) {
            const std::size_t block = static_cast<std::size_t>(r) / base_n;
            const std::size_t k = static_cast<std::size_t>(r) % base_n;
            const auto row = base.row(k);
            // block 0: A, 1: B, 2..d+1: AB_i, d+2..2d+1: BA_i
            const bool from_b = block == 1 || block >= dim + 2;
            for (std::size_t j = 0; j < dim; ++j) x[j] = row[from_b ? dim + j : j];
            if (block >= 2 && block < dim + 2) {
                const std::size_t i = block - 2;
                x[i] = row[dim + i];
            } else if (block >= dim + 2) {
                const std::size_t i = block - dim - 2;
                x[i] = row[i];
            }
            y[r] = f(x);
        }
    }
    auto yv = [&](std::size_t block, std::size_t k) { return y[block * base_n + k]; };

    std::vector<double> pooled(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(2 * base_n));
    const MeanSe pooled_stats = mean_and_se(pooled);
    KahanSum ss;
    for (double v : pooled) ss.add((v - pooled_stats.mean) * (v - pooled_stats.mean));
    const double variance = ss.value() / static_cast<double>(pooled.size() - 1);
    if (!(variance > 0.0)) throw std::domain_error("sensitivity: integrand has zero output variance");

    SensitivityResult res;
    res.base_n = base_n;
    res.evaluations = blocks * base_n;
    std::vector<double> t1(base_n), tt(base_n);
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t k = 0; k < base_n; ++k) {
            const double a = yv(0, k), b = yv(1, k), ab = yv(2 + i, k), ba = yv(dim + 2 + i, k);
            // AB_i shares x_i with B and the rest with A; BA_i the reverse.
            t1[k] = 0.25 * ((b - ab) * (b - ab) + (a - ba) * (a - ba));
            tt[k] = 0.25 * ((a - ab) * (a - ab) + (b - ba) * (b - ba));
        }
        const MeanSe m1 = mean_and_se(t1);
        const MeanSe mt = mean_and_se(tt);
        res.first_order.push_back((variance - m1.mean) / variance);
        res.total.push_back(mt.mean / variance);
        res.first_order_se.push_back(m1.se / variance);
        res.total_se.push_back(mt.se / variance);
    }
    return res;
}

std::vector<double> weights_from_sensitivity(const SensitivityResult& result, double floor) {
    if (!(floor > 0.0)) throw std::invalid_argument("weights_from_sensitivity: floor must be positive");
    if (result.total.empty()) throw std::invalid_argument("weights_from_sensitivity: no indices");
    const double mx = *std::max_element(result.total.begin(), result.total.end());
    if (!(mx > 0.0)) throw std::invalid_argument("weights_from_sensitivity: all indices are zero");
    std::vector<double> out;
    for (double s : result.total) out.push_back(std::clamp(s / mx + floor, floor, 1.0));
    return out;
}

void write_sensitivity_csv(std::ostream& out, const SensitivityResult& result, std::span<const std::string> names) {
    const auto old = out.precision(17);
    out << "param,S1,ST\n";
    for (std::size_t i = 0; i < result.first_order.size(); ++i) {
        if (i < names.size()) {
            out << names[i];
        } else {
            out << 'x' << (i + 1);
        }
        out << ',' << result.first_order[i] << ',' << result.total[i] << '\n';
    }
    out.precision(old);
}

// ---------------------------------------------------------------------------

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

BasketOptionSpec BasketOptionSpec::defaults(std::size_t dim) {
    BasketOptionSpec s;
    s.dim = dim;
    s.sigma.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) s.sigma[i * dim + i] = 1e-5;
    return s;
}

void BasketOptionSpec::validate() const {
    if (dim < 1) throw std::invalid_argument("basket option: dim must be at least 1");
    if (sigma.size() != dim * dim) throw std::invalid_argument("basket option: sigma must be dim x dim");
    if (!(maturity > 0.0)) throw std::invalid_argument("basket option: maturity must be positive");
    if (!(strike >= 0.0)) throw std::invalid_argument("basket option: strike must be non-negative");
}

double basket_price(std::span<const double> prices, const BasketOptionSpec& spec) {
    spec.validate();
    const std::size_t d = spec.dim;
    if (prices.size() != d) throw std::invalid_argument("basket_price: expected " + std::to_string(d) + " prices");
    double log_sum = 0.0;
    for (double s : prices) {
        if (!(s > 0.0)) throw std::invalid_argument("basket_price: prices must be positive");
        log_sum += std::log(s);
    }
    const double dd = static_cast<double>(d);
    const double T = spec.maturity, K = spec.strike, r = spec.rate;

    double sum_sq = 0.0, nu_sq_sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < d; ++i) col += spec.sigma[i * d + j] * spec.sigma[i * d + j];
        nu_sq_sum += col * col;
        sum_sq += col;
    }
    const double nu = std::sqrt(nu_sq_sum) / dd;
    const double m = r * T - T / (2.0 * dd) * sum_sq;
    const double m_tilde = m + 0.5 * nu * nu;
    const double s_tilde = std::exp(log_sum / dd);
    const double disc = std::exp(-r * T);

    if (nu == 0.0) return disc * std::max(s_tilde * std::exp(m_tilde) - K, 0.0);
    const double d1 = (std::log(s_tilde / K) + m + nu * nu) / nu;
    const double d2 = d1 - nu;
    const double strike_term = K == 0.0 ? 0.0 : K * normal_cdf(d2);
    return disc * (s_tilde * std::exp(m_tilde) * normal_cdf(d1) - strike_term);
}

}  // namespace neurolds
