#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "neurolds/bench.hpp"
#include "oracles.hpp"

using namespace neurolds;

namespace {

// Second implementation of the Borehole flow rate, in long double with physical arguments.
long double borehole_physical(long double rw, long double r, long double tu, long double hu, long double tl,
                              long double hl, long double l, long double kw) {
    const long double lg = std::log(r / rw);
    const long double num = 2.0L * 3.14159265358979323846264338327950288L * tu * (hu - hl);
    const long double den = lg * (1.0L + 2.0L * l * tu / (lg * rw * rw * kw) + tu / tl);
    return num / den;
}

std::vector<double> midpoint(std::size_t d) { return std::vector<double>(d, 0.5); }

}  // namespace

TEST_CASE("borehole at the range midpoints") {
    const auto u = midpoint(8);
    const long double want = borehole_physical(0.1L, 25050.0L, 89335.0L, 1050.0L, 89.55L, 760.0L, 1400.0L, 10950.0L);
    CHECK(borehole(u) == doctest::Approx(static_cast<double>(want)).epsilon(1e-13));
    CHECK(borehole(u) == doctest::Approx(70.87291264).epsilon(1e-9));
}

TEST_CASE("borehole agrees with the second implementation at random points") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const BoreholeSpec spec;
    for (int t = 0; t < 200; ++t) {
        std::vector<double> u(8);
        for (auto& x : u) x = unif(rng);
        long double p[8];
        for (int j = 0; j < 8; ++j) p[j] = spec.ranges[j].lo + static_cast<long double>(u[j]) * (spec.ranges[j].hi - spec.ranges[j].lo);
        const long double want = borehole_physical(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]);
        CHECK(borehole(u) == doctest::Approx(static_cast<double>(want)).epsilon(1e-12));
    }
}

TEST_CASE("borehole monotonicity") {
    auto u = midpoint(8);
    double prev = 0.0;
    for (int k = 0; k <= 10; ++k) {
        u[3] = k / 10.0;  // H_u
        const double v = borehole(u);
        CHECK(v > prev);
        prev = v;
    }
    u = midpoint(8);
    // T_l from 63.1 to about twice that.
    u[4] = 0.0;
    const double low = borehole(u);
    u[4] = (2 * 63.1 - 63.1) / (116.0 - 63.1);
    CHECK(borehole(u) > low);
    CHECK(BoreholeSpec{}.ranges[0].lo == 0.05);
    CHECK(BoreholeSpec{}.ranges[0].hi == 0.15);
}

TEST_CASE("constant integrand integrates without error") {
    SequenceSpec seq;
    seq.kind = SequenceKind::sobol;
    seq.dim = 3;
    const auto r = integrate(seq, [](std::span<const double>) { return 2.5; }, 500, 2.5);
    CHECK(r.estimate == 2.5);
    REQUIRE(r.checkpoints.size() == default_checkpoints().size());
    for (const auto& c : r.checkpoints) {
        REQUIRE(c.abs_error.has_value());
        CHECK(*c.abs_error == 0.0);
    }
    CHECK(default_checkpoints().front() == 20);
    CHECK(default_checkpoints()[1] == 60);
    CHECK(default_checkpoints().back() == 500);
}

TEST_CASE("running estimates are prefix means") {
    std::mt19937_64 rng(4);
    const auto pts = oracle::random_points(rng, 100, 2);
    auto f = [](std::span<const double> x) { return x[0] * x[0] + 3 * x[1]; };
    const auto r = integrate_points(pts, f, std::nullopt, {10, 50, 100, 400});
    // Checkpoints beyond the sample count are dropped.
    REQUIRE(r.checkpoints.size() == 3);
    double lo = 1e300, hi = -1e300;
    for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t n = r.checkpoints[c].n;
        long double s = 0.0L;
        for (std::size_t i = 0; i < n; ++i) s += f(pts.row(i));
        CHECK(r.checkpoints[c].estimate == doctest::Approx(static_cast<double>(s / n)).epsilon(1e-14));
        CHECK_FALSE(r.checkpoints[c].abs_error.has_value());
    }
    for (std::size_t i = 0; i < 100; ++i) {
        lo = std::min(lo, f(pts.row(i)));
        hi = std::max(hi, f(pts.row(i)));
    }
    CHECK(r.estimate >= lo);
    CHECK(r.estimate <= hi);

    std::ostringstream os;
    write_error_csv(os, r);
    CHECK(os.str().rfind("N,estimate\n10,", 0) == 0);
    const auto r2 = integrate_points(pts, f, 1.8, {10});
    std::ostringstream os2;
    write_error_csv(os2, r2);
    CHECK(os2.str().rfind("N,abs_error\n10,", 0) == 0);
}

TEST_CASE("Sobol' beats plain Monte Carlo on a product integrand") {
    auto f = [](std::span<const double> x) { return x[0] * x[1]; };
    SequenceSpec sobol;
    sobol.kind = SequenceKind::sobol;
    sobol.dim = 2;
    const double qmc = *integrate(sobol, f, 256, 0.25, {256}).checkpoints[0].abs_error;
    double mc = 0.0;
    for (std::uint64_t s = 0; s < 32; ++s) {
        SequenceSpec u;
        u.kind = SequenceKind::uniform;
        u.dim = 2;
        u.seed = s;
        mc += *integrate(u, f, 256, 0.25, {256}).checkpoints[0].abs_error;
    }
    mc /= 32.0;
    CHECK(qmc < mc);
}

TEST_CASE("sensitivity of simple functions") {
    SUBCASE("additive function has equal indices and no interactions") {
        const auto r = sensitivity([](std::span<const double> x) { return x[0] + x[1] + x[2]; }, 3, 4096, 7);
        CHECK(r.evaluations == 4096 * 8);
        CHECK(r.base_n == 4096);
        double sum = 0.0, se = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(r.first_order[i] == doctest::Approx(1.0 / 3.0).epsilon(0.05));
            CHECK(r.total[i] == doctest::Approx(r.first_order[i]).epsilon(0.05));
            CHECK(r.first_order[i] <= r.total[i] + 3 * (r.first_order_se[i] + r.total_se[i]) + 1e-12);
            sum += r.first_order[i];
            se += r.first_order_se[i];
        }
        CHECK(sum <= 1.0 + 3 * se + 1e-12);
        const auto w = weights_from_sensitivity(r, 1e-3);
        for (double v : w) CHECK(v == doctest::Approx(w[0]).epsilon(0.05));
    }
    SUBCASE("single active input") {
        const auto r = sensitivity([](std::span<const double> x) { return x[0]; }, 4, 2048, 3);
        CHECK(r.first_order[0] == doctest::Approx(1.0).epsilon(0.02));
        CHECK(r.total[0] == doctest::Approx(1.0).epsilon(0.02));
        for (std::size_t i = 1; i < 4; ++i) {
            CHECK(std::abs(r.first_order[i]) < 0.02);
            CHECK(std::abs(r.total[i]) < 0.02);
        }
        const auto w = weights_from_sensitivity(r, 1e-3);
        CHECK(w[0] == 1.0);
        for (std::size_t i = 1; i < 4; ++i) CHECK(w[i] == doctest::Approx(1e-3).epsilon(0.05).scale(1e-3));
    }
    SUBCASE("constant output is rejected") {
        CHECK_THROWS_AS(sensitivity([](std::span<const double>) { return 1.0; }, 2, 256, 1), std::domain_error);
    }
    SUBCASE("same seed reproduces") {
        auto f = [](std::span<const double> x) { return x[0] * x[1] + x[1]; };
        const auto a = sensitivity(f, 2, 512, 9), b = sensitivity(f, 2, 512, 9);
        CHECK(a.first_order == b.first_order);
        CHECK(a.total == b.total);
    }
}

TEST_CASE("borehole sensitivity is dominated by the well radius") {
    const auto r = sensitivity([](std::span<const double> u) { return borehole(u); }, 8, std::size_t{1} << 13, 0);
    CHECK(r.first_order[0] == doctest::Approx(0.83).epsilon(0.05 / 0.83));
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(std::isfinite(r.first_order[i]));
        CHECK(r.first_order[i] <= r.total[i] + 3 * (r.first_order_se[i] + r.total_se[i]));
    }
    std::ostringstream os;
    std::vector<std::string> names(BoreholeSpec::names.begin(), BoreholeSpec::names.end());
    write_sensitivity_csv(os, r, names);
    CHECK(os.str().rfind("param,S1,ST\nr_w,", 0) == 0);
}

TEST_CASE("weights from sensitivity") {
    SensitivityResult r;
    r.total = {0.5, 0.25, 0.0, -0.01};
    r.first_order = r.total;
    const auto w = weights_from_sensitivity(r, 0.001);
    CHECK(w[0] == 1.0);
    CHECK(w[1] == doctest::Approx(0.501).epsilon(1e-14));
    CHECK(w[2] == doctest::Approx(0.001).epsilon(1e-14));
    CHECK(w[3] == 0.001);
    CHECK_THROWS_AS(weights_from_sensitivity(r, 0.0), std::invalid_argument);
    r.total = {0.0, 0.0};
    CHECK_THROWS_AS(weights_from_sensitivity(r, 0.001), std::invalid_argument);
    r.total = {0.2, 0.2, 0.2};
    const auto u = weights_from_sensitivity(r, 0.01);
    CHECK(u == std::vector<double>(3, 1.0));
}

TEST_CASE("normal cdf against a quadrature table") {
    double worst_abs = 0.0, worst_rel = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const double x = -10.0 + 20.0 * k / 9999.0;
        const long double want = oracle::normal_cdf_quadrature(x);
        const double got = normal_cdf(x);
        worst_abs = std::max(worst_abs, static_cast<double>(std::abs(got - want)));
        if (x < 0) worst_rel = std::max(worst_rel, static_cast<double>(std::abs(got - want) / want));
    }
    CHECK(worst_abs <= 1e-12);
    CHECK(worst_rel <= 1e-12);
    CHECK(normal_cdf(0.0) == 0.5);
}

TEST_CASE("basket option defaults and validation") {
    const auto s = BasketOptionSpec::defaults(3);
    CHECK(s.maturity == 5.0);
    CHECK(s.strike == 0.08);
    CHECK(s.rate == 0.05);
    CHECK(s.sigma == std::vector<double>{1e-5, 0, 0, 0, 1e-5, 0, 0, 0, 1e-5});
    const double p[] = {0.5, 0.5, 0.5}, bad[] = {0.5, 0.0, 0.5}, short_p[] = {0.5, 0.5};
    CHECK_THROWS_AS(basket_price(bad, s), std::invalid_argument);
    CHECK_THROWS_AS(basket_price(short_p, s), std::invalid_argument);
    auto broken = s;
    broken.sigma.pop_back();
    CHECK_THROWS_AS(basket_price(p, broken), std::invalid_argument);
}

TEST_CASE("basket price with zero strike") {
    auto spec = BasketOptionSpec::defaults(2);
    spec.sigma = {0.3, 0.1, 0.05, 0.2};
    spec.strike = 0.0;
    const double S[] = {0.7, 0.4};
    const double d = 2.0, T = spec.maturity, r = spec.rate;
    double sum_sq = 0.0, nu2 = 0.0;
    for (int j = 0; j < 2; ++j) {
        double col = 0.0;
        for (int i = 0; i < 2; ++i) col += spec.sigma[i * 2 + j] * spec.sigma[i * 2 + j];
        sum_sq += col;
        nu2 += col * col;
    }
    nu2 /= d * d;
    const double m = r * T - T / (2 * d) * sum_sq;
    const double s_tilde = std::sqrt(0.7 * 0.4);
    CHECK(basket_price(S, spec) == doctest::Approx(std::exp(-r * T) * s_tilde * std::exp(m + 0.5 * nu2)).epsilon(1e-14));
}

TEST_CASE("basket price bounds and monotonicity") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (auto spec : {BasketOptionSpec::defaults(2), BasketOptionSpec::defaults(5)}) {
        for (int t = 0; t < 5; ++t) {
            spec.sigma.assign(spec.dim * spec.dim, 0.0);
            for (std::size_t i = 0; i < spec.dim; ++i) spec.sigma[i * spec.dim + i] = t == 0 ? 1e-5 : 0.1 * t;
            std::vector<double> S(spec.dim);
            for (auto& x : S) x = u(rng);
            const double v = basket_price(S, spec);
            double logsum = 0.0, sum_sq = 0.0, nu2 = 0.0;
            for (double x : S) logsum += std::log(x);
            for (std::size_t j = 0; j < spec.dim; ++j) {
                const double c = spec.sigma[j * spec.dim + j] * spec.sigma[j * spec.dim + j];
                sum_sq += c;
                nu2 += c * c;
            }
            const double dd = static_cast<double>(spec.dim);
            nu2 /= dd * dd;
            const double m = spec.rate * spec.maturity - spec.maturity / (2 * dd) * sum_sq;
            const double upper = std::exp(-spec.rate * spec.maturity) * std::exp(logsum / dd) * std::exp(m + 0.5 * nu2);
            CHECK(v >= 0.0);
            CHECK(v <= upper * (1 + 1e-14));
            for (std::size_t j = 0; j < spec.dim; ++j) {
                auto up = S;
                up[j] *= 1.1;
                CHECK(basket_price(up, spec) >= v);
            }
        }
    }
}

TEST_CASE("basket price matches a geometric Brownian motion simulation") {
    // Default volatilities: terminal prices S_i exp((r - |sigma_i|^2/2) T + sqrt(T) sigma_i . Z).
    const auto spec = BasketOptionSpec::defaults(2);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int t = 0; t < 3; ++t) {
        const double S[] = {u(rng), u(rng)};
        const std::size_t paths = 1000000;
        long double payoff = 0.0L;
        for (std::size_t p = 0; p < paths; ++p) {
            const double z0 = z(rng), z1 = z(rng);
            double logprod = 0.0;
            for (int i = 0; i < 2; ++i) {
                const double a = spec.sigma[i * 2], b = spec.sigma[i * 2 + 1];
                logprod += std::log(S[i]) + (spec.rate - 0.5 * (a * a + b * b)) * spec.maturity +
                           std::sqrt(spec.maturity) * (a * z0 + b * z1);
            }
            payoff += std::max(std::exp(logprod / 2.0) - spec.strike, 0.0);
        }
        const double mc = std::exp(-spec.rate * spec.maturity) * static_cast<double>(payoff / paths);
        CAPTURE(S[0]);
        CAPTURE(S[1]);
        CHECK(basket_price(S, spec) == doctest::Approx(mc).epsilon(5e-4).scale(1e-6));
    }
}
