#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's kernel, discrepancy or sequence code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "neurolds/kernels.hpp"
#include "neurolds/point_buffer.hpp"

namespace oracle {

using neurolds::KernelFamily;

// One-dimensional kernels written directly from their textbook forms.
inline double k1(KernelFamily f, double x, double y) {
    switch (f) {
        case KernelFamily::star: return 1.0 - std::max(x, y);
        case KernelFamily::ext: return std::min(x, y) - x * y;
        case KernelFamily::per: return 0.5 - std::abs(x - y) + (x - y) * (x - y);
        case KernelFamily::ctr: return 0.5 * (std::abs(x - 0.5) + std::abs(y - 0.5) - std::abs(x - y));
        case KernelFamily::sym: return 0.25 * (1.0 - 2.0 * std::abs(x - y));
        case KernelFamily::asd: return 0.5 * (1.0 - std::abs(x - y));
    }
    return 0.0;
}

// 5-point Gauss-Legendre on [a,b]; exact for polynomials up to degree 9.
template <class F>
double gl5(F&& f, double a, double b) {
    static constexpr std::array<double, 5> t{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                             0.9061798459386640};
    static constexpr std::array<double, 5> w{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                             0.4786286704993665, 0.2369268850561891};
    const double h = 0.5 * (b - a), m = 0.5 * (a + b);
    double s = 0.0;
    for (int i = 0; i < 5; ++i) s += w[i] * f(m + h * t[i]);
    return s * h;
}

// Integral over [0,1] of a function that is polynomial between the given breakpoints.
template <class F>
double piecewise(F&& f, std::vector<double> breaks) {
    breaks.push_back(0.0);
    breaks.push_back(1.0);
    std::sort(breaks.begin(), breaks.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i + 1] > breaks[i]) s += gl5(f, breaks[i], breaks[i + 1]);
    }
    return s;
}

// b(x) = int k(x,y) dy, the kinks sit at y = x and y = 1/2.
inline double mean1(KernelFamily f, double x) {
    return piecewise([&](double y) { return k1(f, x, y); }, {x, 0.5});
}

// c = int int k.
inline double total1(KernelFamily f) {
    return piecewise([&](double x) { return mean1(f, x); }, {0.5});
}

struct Kernel {
    KernelFamily family;
    std::vector<double> gamma;  // empty: plain product

    double eval(std::span<const double> x, std::span<const double> y) const {
        double p = 1.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double v = k1(family, x[j], y[j]);
            p *= gamma.empty() ? v : 1.0 + gamma[j] * v;
        }
        return p;
    }
    double mean(std::span<const double> x) const {
        double p = 1.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double v = mean1(family, x[j]);
            p *= gamma.empty() ? v : 1.0 + gamma[j] * v;
        }
        return p;
    }
    double total(std::size_t d) const {
        const double c = total1(family);
        double p = 1.0;
        for (std::size_t j = 0; j < d; ++j) p *= gamma.empty() ? c : 1.0 + gamma[j] * c;
        return p;
    }
};

// Squared discrepancy of the first P points straight from the double-sum formula.
inline double d2_naive(const Kernel& k, const neurolds::PointBuffer& pts, std::size_t P) {
    const double n = static_cast<double>(P);
    long double s1 = 0.0L, s2 = 0.0L;
    for (std::size_t i = 0; i < P; ++i) {
        s1 += k.mean(pts.row(i));
        for (std::size_t j = 0; j < P; ++j) s2 += k.eval(pts.row(i), pts.row(j));
    }
    return static_cast<double>(k.total(pts.dim()) - 2.0L * s1 / n + s2 / (n * n));
}

inline std::vector<double> d2_all_naive(const Kernel& k, const neurolds::PointBuffer& pts) {
    std::vector<double> out;
    for (std::size_t P = 1; P <= pts.size(); ++P) out.push_back(d2_naive(k, pts, P));
    return out;
}

inline double prefix_loss_naive(const Kernel& k, const std::vector<double>& w, const neurolds::PointBuffer& pts) {
    double s = 0.0;
    for (std::size_t P = 2; P <= pts.size(); ++P) s += w[P - 2] * d2_naive(k, pts, P);
    return s;
}

// Uniform weights 1/(N-2) (1 when N = 2) and length-proportional 2P/(N^2+N-2).
inline std::vector<double> weights_uniform(std::size_t n) {
    return std::vector<double>(n - 1, n == 2 ? 1.0 : 1.0 / static_cast<double>(n - 2));
}
inline std::vector<double> weights_length(std::size_t n) {
    std::vector<double> w;
    const double nn = static_cast<double>(n);
    for (std::size_t P = 2; P <= n; ++P) w.push_back(2.0 * static_cast<double>(P) / (nn * nn + nn - 2.0));
    return w;
}

inline neurolds::PointBuffer random_points(std::mt19937_64& rng, std::size_t n, std::size_t d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    neurolds::PointBuffer p(n, d);
    for (auto& x : p.coords()) x = u(rng);
    return p;
}

// Halton coordinate as an exact rational num/den.
inline double radical_inverse_exact(std::uint64_t i, std::uint64_t base) {
    std::uint64_t num = 0, den = 1;
    while (i > 0) {
        num = num * base + i % base;
        den *= base;
        i /= base;
    }
    return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

// Sobol' coordinate from the Bratley-Fox integer recurrence
//   m_k = 2 a_1 m_{k-1} ^ 4 a_2 m_{k-2} ^ ... ^ 2^s m_{k-s} ^ m_{k-s}
// evaluated in Gray-code order with explicit bit extraction.
inline double sobol_coordinate(std::uint64_t i, std::uint32_t s, std::uint32_t a, std::vector<std::uint64_t> m) {
    constexpr int W = 32;
    for (int k = static_cast<int>(s); k < W; ++k) {
        std::uint64_t v = (m[k - s] << s) ^ m[k - s];
        for (std::uint32_t q = 1; q < s; ++q) {
            const std::uint64_t aq = (a >> (s - 1 - q)) & 1u;
            if (aq) v ^= m[k - q] << q;
        }
        m.push_back(v);
    }
    const std::uint64_t g = i ^ (i >> 1);
    std::uint64_t x = 0;
    for (int k = 0; k < W; ++k) {
        if ((g >> k) & 1u) x ^= m[k] << (W - 1 - k);
    }
    return static_cast<double>(x) / 4294967296.0;
}

// Standard normal CDF by Gauss-Legendre quadrature of the density in long double.
inline long double normal_cdf_quadrature(double x) {
    auto integrate = [](long double a, long double b) {
        static constexpr std::array<long double, 5> t{-0.906179845938663992797626878299392965L,
                                                      -0.538469310105683091036314420700208805L, 0.0L,
                                                      0.538469310105683091036314420700208805L,
                                                      0.906179845938663992797626878299392965L};
        static constexpr std::array<long double, 5> w{0.236926885056189087514264040719917363L,
                                                      0.478628670499366468041291514835638193L,
                                                      0.568888888888888888888888888888888889L,
                                                      0.478628670499366468041291514835638193L,
                                                      0.236926885056189087514264040719917363L};
        const int panels = 400;
        const long double h = (b - a) / panels;
        long double s = 0.0L;
        for (int p = 0; p < panels; ++p) {
            const long double m = a + (p + 0.5L) * h;
            for (int i = 0; i < 5; ++i) {
                const long double y = m + 0.5L * h * t[i];
                s += w[i] * std::exp(-0.5L * y * y);
            }
        }
        return s * 0.5L * h / std::sqrt(2.0L * 3.14159265358979323846264338327950288L);
    };
    // Tail integral keeps relative accuracy for negative x.
    const long double ax = std::abs(static_cast<long double>(x));
    const long double tail = integrate(ax, ax + 40.0L);
    return x < 0 ? tail : 1.0L - tail;
}

}  // namespace oracle
