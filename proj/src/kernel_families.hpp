#pragma once

// Closed-form one-dimensional components per family, as static members so the
// pair loops in discrepancy.cpp can be instantiated per family.

#include <cmath>

namespace neurolds::detail {

inline double sgn(double u) { return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); }

// Sum of squared distances to the interval ends: integral of |x-y| over y is half of this.
inline double ends2(double x) { return x * x + (1.0 - x) * (1.0 - x); }

struct Star {
    static double k(double x, double y) { return 1.0 - (x > y ? x : y); }
    static double dk(double x, double y) { return x > y ? -1.0 : (x < y ? 0.0 : -0.5); }
    static double b(double x) { return 0.5 * (1.0 - x * x); }
    static double db(double x) { return -x; }
    static constexpr double c = 1.0 / 3.0;
    static double ddiag(double) { return -1.0; }
};

struct Ext {
    static double k(double x, double y) { return (x < y ? x : y) - x * y; }
    static double dk(double x, double y) { return (x < y ? 1.0 : (x > y ? 0.0 : 0.5)) - y; }
    static double b(double x) { return 0.5 * x * (1.0 - x); }
    static double db(double x) { return 0.5 - x; }
    static constexpr double c = 1.0 / 12.0;
    static double ddiag(double x) { return 1.0 - 2.0 * x; }
};

struct Per {
    static double k(double x, double y) {
        const double u = x - y;
        return 0.5 - std::fabs(u) + u * u;
    }
    static double dk(double x, double y) {
        const double u = x - y;
        return -sgn(u) + 2.0 * u;
    }
    static double b(double) { return 1.0 / 3.0; }
    static double db(double) { return 0.0; }
    static constexpr double c = 1.0 / 3.0;
    static double ddiag(double) { return 0.0; }
};

struct Ctr {
    static double k(double x, double y) {
        return 0.5 * (std::fabs(x - 0.5) + std::fabs(y - 0.5) - std::fabs(x - y));
    }
    static double dk(double x, double y) { return 0.5 * (sgn(x - 0.5) - sgn(x - y)); }
    static double b(double x) { return 0.5 * (std::fabs(x - 0.5) + 0.25 - 0.5 * ends2(x)); }
    static double db(double x) { return 0.5 * (sgn(x - 0.5) - (2.0 * x - 1.0)); }
    static constexpr double c = 1.0 / 12.0;
    static double ddiag(double x) { return sgn(x - 0.5); }
};

struct Sym {
    static double k(double x, double y) { return 0.25 * (1.0 - 2.0 * std::fabs(x - y)); }
    static double dk(double x, double y) { return -0.5 * sgn(x - y); }
    static double b(double x) { return 0.25 * (1.0 - ends2(x)); }
    static double db(double x) { return 0.5 - x; }
    static constexpr double c = 1.0 / 12.0;
    static double ddiag(double) { return 0.0; }
};

struct Asd {
    static double k(double x, double y) { return 0.5 * (1.0 - std::fabs(x - y)); }
    static double dk(double x, double y) { return -0.5 * sgn(x - y); }
    static double b(double x) { return 0.5 - 0.25 * ends2(x); }
    static double db(double x) { return 0.5 - x; }
    static constexpr double c = 1.0 / 3.0;
    static double ddiag(double) { return 0.0; }
};

// Calls fn(Family{}) for the runtime family.
template <class Fn>
decltype(auto) dispatch_family(KernelFamily family, Fn&& fn) {
    switch (family) {
        case KernelFamily::star: return fn(Star{});
        case KernelFamily::ext: return fn(Ext{});
        case KernelFamily::per: return fn(Per{});
        case KernelFamily::ctr: return fn(Ctr{});
        case KernelFamily::sym: return fn(Sym{});
        case KernelFamily::asd: return fn(Asd{});
    }
    return fn(Sym{});
}

}  // namespace neurolds::detail
