#include "neurolds/discrepancy.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include <omp.h>

#include "kernel_families.hpp"
#include "neurolds/parallel.hpp"

namespace neurolds {

namespace {

using detail::dispatch_family;

void check_points(const KernelSpec& spec, const PointBuffer& points, std::size_t min_points, const char* what) {
    if (points.dim() == 0) throw std::invalid_argument(std::string(what) + ": points have dimension 0");
    if (points.size() < min_points) {
        throw std::invalid_argument(std::string(what) + ": needs at least " + std::to_string(min_points) +
                                    " points, got " + std::to_string(points.size()));
    }
    spec.validate(points.dim());
}

// Per-dimension factor of the product kernel: k (unweighted) or 1 + gamma_j k.
template <class FamT, bool Weighted>
struct ProductKernel {
    using Fam = FamT;
    const double* gamma;
    std::size_t dim;

    double lift(std::size_t j, double v) const {
        if constexpr (Weighted) {
            return 1.0 + gamma[j] * v;
        } else {
            return v;
        }
    }
    double slope(std::size_t j, double v) const {
        if constexpr (Weighted) {
            return gamma[j] * v;
        } else {
            return v;
        }
    }

    double pair(const double* x, const double* y) const {
        double p = 1.0;
        for (std::size_t j = 0; j < dim; ++j) p *= lift(j, Fam::k(x[j], y[j]));
        return p;
    }
    double mean(const double* x) const {
        double p = 1.0;
        for (std::size_t j = 0; j < dim; ++j) p *= lift(j, Fam::b(x[j]));
        return p;
    }
    double diag(const double* x) const {
        double p = 1.0;
        for (std::size_t j = 0; j < dim; ++j) p *= lift(j, Fam::k(x[j], x[j]));
        return p;
    }
    double total() const {
        double p = 1.0;
        for (std::size_t j = 0; j < dim; ++j) p *= lift(j, Fam::c);
        return p;
    }
};

// out[l] = prod_{m != l} f[m], without division.
inline void product_except(const double* f, std::size_t d, double* out) {
    double run = 1.0;
    for (std::size_t l = 0; l < d; ++l) {
        out[l] = run;
        run *= f[l];
    }
    run = 1.0;
    for (std::size_t l = d; l-- > 0;) {
        out[l] *= run;
        run *= f[l];
    }
}

template <class Fn>
decltype(auto) with_kernel(const KernelSpec& spec, std::size_t dim, Fn&& fn) {
    return dispatch_family(spec.family, [&](auto fam) {
        using Fam = decltype(fam);
        if (spec.weighted()) return fn(ProductKernel<Fam, true>{spec.weights.data(), dim});
        return fn(ProductKernel<Fam, false>{nullptr, dim});
    });
}

struct RowTerms {
    std::vector<double> mean;      // b(x_i)
    std::vector<double> diag;      // k(x_i, x_i)
    std::vector<double> lower;     // sum_{j<i} k(x_i, x_j)
};

template <class Kernel>
RowTerms row_terms(const Kernel& kern, const PointBuffer& points) {
    const std::size_t n = points.size();
    const std::size_t d = points.dim();
    const double* x = points.data();
    RowTerms t{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 32) num_threads(thread_count())
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double* xi = x + i * d;
        KahanSum s;
        for (std::size_t j = 0; j < i; ++j) s.add(kern.pair(xi, x + j * d));
        t.lower[i] = s.value();
        t.mean[i] = kern.mean(xi);
        t.diag[i] = kern.diag(xi);
    }
    return t;
}

// Suffix coefficients of the prefix loss:
//   alpha_i = sum_{P >= max(i,2)} -2 w_P / P,  beta_i = sum_{P >= max(i,2)} w_P / P^2   (1-based i)
struct SuffixCoefficients {
    double weight_sum = 0.0;
    std::vector<double> alpha;
    std::vector<double> beta;
};

SuffixCoefficients suffix_coefficients(const std::vector<double>& w, std::size_t n) {
    SuffixCoefficients sc{0.0, std::vector<double>(n), std::vector<double>(n)};
    double a = 0.0, b = 0.0;
    KahanSum ws;
    for (std::size_t p = n; p >= 2; --p) {
        const double wp = w[p - 2];
        const double pd = static_cast<double>(p);
        a += -2.0 * wp / pd;
        b += wp / (pd * pd);
        ws.add(wp);
        sc.alpha[p - 1] = a;
        sc.beta[p - 1] = b;
    }
    sc.alpha[0] = sc.alpha[1];
    sc.beta[0] = sc.beta[1];
    sc.weight_sum = ws.value();
    return sc;
}

}  // namespace

double clamp_sqrt(double radicand) {
    if (std::isnan(radicand)) throw NumericalFailure("discrepancy radicand is NaN");
    if (radicand < 0.0) {
        if (radicand >= kRadicandClamp) return 0.0;
        std::ostringstream msg;
        msg << "squared discrepancy " << radicand << " is below the rounding tolerance " << kRadicandClamp;
        throw NumericalFailure(msg.str());
    }
    return std::sqrt(radicand);
}

double kernel_constant(const KernelSpec& spec, std::size_t dim) {
    spec.validate(dim);
    return with_kernel(spec, dim, [](const auto& kern) { return kern.total(); });
}

std::vector<double> discrepancy_squared_all_prefixes(const KernelSpec& spec, const PointBuffer& points) {
    check_points(spec, points, 1, "discrepancy");
    return with_kernel(spec, points.dim(), [&](const auto& kern) {
        const RowTerms t = row_terms(kern, points);
        const double c0 = kern.total();
        const std::size_t n = points.size();
        std::vector<double> out(n);
        KahanSum s1, s2;
        for (std::size_t p = 1; p <= n; ++p) {
            s1.add(t.mean[p - 1]);
            s2.add(2.0 * t.lower[p - 1] + t.diag[p - 1]);
            const double pd = static_cast<double>(p);
            out[p - 1] = c0 - 2.0 * s1.value() / pd + s2.value() / (pd * pd);
        }
        return out;
    });
}

std::vector<double> discrepancy_all_prefixes(const KernelSpec& spec, const PointBuffer& points) {
    std::vector<double> out = discrepancy_squared_all_prefixes(spec, points);
    for (double& v : out) v = clamp_sqrt(v);
    return out;
}

double discrepancy_squared(const KernelSpec& spec, const PointBuffer& points) {
    return discrepancy_squared_all_prefixes(spec, points).back();
}

double discrepancy_single(const KernelSpec& spec, const PointBuffer& points) {
    return clamp_sqrt(discrepancy_squared(spec, points));
}

std::string_view to_string(WeightScheme scheme) {
    switch (scheme) {
        case WeightScheme::uniform: return "uniform";
        case WeightScheme::length_proportional: return "length-proportional";
        case WeightScheme::custom: return "custom";
    }
    return "?";
}

WeightScheme parse_weight_scheme(std::string_view name) {
    if (name == "uniform") return WeightScheme::uniform;
    if (name == "length-proportional" || name == "length_proportional") return WeightScheme::length_proportional;
    if (name == "custom") return WeightScheme::custom;
    throw std::invalid_argument("unknown prefix weight scheme '" + std::string(name) +
                                "' (expected uniform, length-proportional or custom)");
}

std::vector<double> PrefixWeights::resolve(std::size_t n) const {
    if (n < 2) throw std::invalid_argument("prefix weights need a sequence of at least 2 points");
    const std::size_t count = n - 1;
    switch (scheme) {
        case WeightScheme::uniform:
            return std::vector<double>(count, n == 2 ? 1.0 : 1.0 / static_cast<double>(n - 2));
        case WeightScheme::length_proportional: {
            std::vector<double> w(count);
            const double nd = static_cast<double>(n);
            const double denom = nd * nd + nd - 2.0;
            for (std::size_t p = 2; p <= n; ++p) w[p - 2] = 2.0 * static_cast<double>(p) / denom;
            return w;
        }
        case WeightScheme::custom:
            if (values.size() != count) {
                throw std::invalid_argument("custom prefix weights have length " + std::to_string(values.size()) +
                                            ", expected N-1 = " + std::to_string(count));
            }
            for (double v : values) {
                if (!(v >= 0.0) || !std::isfinite(v)) {
                    throw std::invalid_argument("custom prefix weights must be finite and nonnegative");
                }
            }
            return values;
    }
    return {};
}

double prefix_loss(const KernelSpec& spec, const PrefixWeights& weights, const PointBuffer& points) {
    check_points(spec, points, 2, "prefix_loss");
    const std::size_t n = points.size();
    const SuffixCoefficients sc = suffix_coefficients(weights.resolve(n), n);
    return with_kernel(spec, points.dim(), [&](const auto& kern) {
        const RowTerms t = row_terms(kern, points);
        const double head = sc.weight_sum * kern.total();
        if (deterministic()) {
            KahanSum s;
            s.add(head);
            for (std::size_t i = 0; i < n; ++i) {
                s.add(sc.alpha[i] * t.mean[i] + sc.beta[i] * (t.diag[i] + 2.0 * t.lower[i]));
            }
            return s.value();
        }
        double acc = 0.0;
        const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for reduction(+ : acc) num_threads(thread_count())
        for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            acc += sc.alpha[i] * t.mean[i] + sc.beta[i] * (t.diag[i] + 2.0 * t.lower[i]);
        }
        return head + acc;
    });
}

LossAndGradient prefix_loss_and_grad(const KernelSpec& spec, const PrefixWeights& weights,
                                     const PointBuffer& points) {
    check_points(spec, points, 2, "prefix_loss_grad");
    const std::size_t n = points.size();
    const std::size_t d = points.dim();
    const SuffixCoefficients sc = suffix_coefficients(weights.resolve(n), n);

    return with_kernel(spec, d, [&](const auto& kern) {
        using Kern = std::decay_t<decltype(kern)>;
        LossAndGradient out{0.0, GradientBuffer(n, d)};
        std::vector<double> row_loss(n);
        const double* x = points.data();
        const auto rows = static_cast<std::ptrdiff_t>(n);

#pragma omp parallel num_threads(thread_count())
        {
            // f: factors, df: factor slopes, rest: product of the other factors
            std::vector<double> f(d), df(d), rest(d), acc(d);
#pragma omp for schedule(dynamic, 16)
            for (std::ptrdiff_t mm = 0; mm < rows; ++mm) {
                const auto m = static_cast<std::size_t>(mm);
                const double* xm = x + m * d;
                std::fill(acc.begin(), acc.end(), 0.0);
                KahanSum lower;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == m) continue;
                    const double* xj = x + j * d;
                    for (std::size_t l = 0; l < d; ++l) {
                        f[l] = kern.lift(l, Kern::Fam::k(xm[l], xj[l]));
                        df[l] = kern.slope(l, Kern::Fam::dk(xm[l], xj[l]));
                    }
                    product_except(f.data(), d, rest.data());
                    if (j < m) lower.add(rest[0] * f[0]);
                    const double coef = 2.0 * sc.beta[m > j ? m : j];
                    for (std::size_t l = 0; l < d; ++l) acc[l] += coef * df[l] * rest[l];
                }

                // alpha_m * grad b(x_m)
                for (std::size_t l = 0; l < d; ++l) {
                    f[l] = kern.lift(l, Kern::Fam::b(xm[l]));
                    df[l] = kern.slope(l, Kern::Fam::db(xm[l]));
                }
                product_except(f.data(), d, rest.data());
                const double mean = rest[0] * f[0];
                for (std::size_t l = 0; l < d; ++l) acc[l] += sc.alpha[m] * df[l] * rest[l];

                // beta_m * grad k(x_m, x_m)
                for (std::size_t l = 0; l < d; ++l) {
                    f[l] = kern.lift(l, Kern::Fam::k(xm[l], xm[l]));
                    df[l] = kern.slope(l, Kern::Fam::ddiag(xm[l]));
                }
                product_except(f.data(), d, rest.data());
                const double diag = rest[0] * f[0];
                for (std::size_t l = 0; l < d; ++l) acc[l] += sc.beta[m] * df[l] * rest[l];

                for (std::size_t l = 0; l < d; ++l) out.gradient(m, l) = acc[l];
                row_loss[m] = sc.alpha[m] * mean + sc.beta[m] * (diag + 2.0 * lower.value());
            }
        }

        KahanSum s;
        s.add(sc.weight_sum * kern.total());
        for (double r : row_loss) s.add(r);
        out.loss = s.value();
        return out;
    });
}

GradientBuffer prefix_loss_grad(const KernelSpec& spec, const PrefixWeights& weights, const PointBuffer& points) {
    return prefix_loss_and_grad(spec, weights, points).gradient;
}

// ---------------------------------------------------------------------------
// Serial reference

namespace reference {

namespace {

double mean_term(const KernelSpec& spec, std::span<const double> x) {
    double p = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double b = kernel_1d_mean(spec.family, x[j]);
        p *= spec.weighted() ? 1.0 + spec.weights[j] * b : b;
    }
    return p;
}

double factor(const KernelSpec& spec, std::size_t j, double v) {
    return spec.weighted() ? 1.0 + spec.weights[j] * v : v;
}
double factor_slope(const KernelSpec& spec, std::size_t j, double v) {
    return spec.weighted() ? spec.weights[j] * v : v;
}

}  // namespace

std::vector<double> discrepancy_squared_all_prefixes(const KernelSpec& spec, const PointBuffer& points) {
    check_points(spec, points, 1, "reference::discrepancy");
    const std::size_t n = points.size();
    const double c0 = kernel_constant(spec, points.dim());
    std::vector<double> out(n);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        s1 += mean_term(spec, points.row(p));
        double cross = 0.0;
        for (std::size_t i = 0; i < p; ++i) cross += kernel_eval(spec, points.row(p), points.row(i));
        s2 += 2.0 * cross + kernel_eval(spec, points.row(p), points.row(p));
        const double pd = static_cast<double>(p + 1);
        out[p] = c0 - 2.0 * s1 / pd + s2 / (pd * pd);
    }
    return out;
}

double prefix_loss(const KernelSpec& spec, const PrefixWeights& weights, const PointBuffer& points) {
    check_points(spec, points, 2, "reference::prefix_loss");
    const std::vector<double> w = weights.resolve(points.size());
    const std::vector<double> d2 = reference::discrepancy_squared_all_prefixes(spec, points);
    double loss = 0.0;
    for (std::size_t p = 2; p <= points.size(); ++p) loss += w[p - 2] * d2[p - 1];
    return loss;
}

GradientBuffer prefix_loss_grad(const KernelSpec& spec, const PrefixWeights& weights, const PointBuffer& points) {
    check_points(spec, points, 2, "reference::prefix_loss_grad");
    const std::size_t n = points.size();
    const std::size_t d = points.dim();
    const std::vector<double> w = weights.resolve(n);

    // Gradient of k(x_a, x_b) with respect to x_a, one dimension at a time.
    auto pair_grad = [&](std::size_t a, std::size_t b, std::size_t l) {
        double g = factor_slope(spec, l, kernel_1d_dx(spec.family, points(a, l), points(b, l)));
        for (std::size_t q = 0; q < d; ++q) {
            if (q != l) g *= factor(spec, q, kernel_1d(spec.family, points(a, q), points(b, q)));
        }
        return g;
    };
    auto mean_grad = [&](std::size_t a, std::size_t l) {
        double g = factor_slope(spec, l, kernel_1d_mean_dx(spec.family, points(a, l)));
        for (std::size_t q = 0; q < d; ++q) {
            if (q != l) g *= factor(spec, q, kernel_1d_mean(spec.family, points(a, q)));
        }
        return g;
    };
    auto diag_grad = [&](std::size_t a, std::size_t l) {
        double g = factor_slope(spec, l, kernel_1d_diag_dx(spec.family, points(a, l)));
        for (std::size_t q = 0; q < d; ++q) {
            if (q != l) g *= factor(spec, q, kernel_1d(spec.family, points(a, q), points(a, q)));
        }
        return g;
    };

    // cross(m, l) tracks sum_{j <= P, j != m} d/dx_{m,l} k(x_m, x_j) as P grows.
    GradientBuffer cross(n, d);
    GradientBuffer grad(n, d);
    for (std::size_t p = 1; p < n; ++p) {
        // Extend the running cross sums with the new point index p (0-based).
        for (std::size_t m = 0; m < p; ++m) {
            for (std::size_t l = 0; l < d; ++l) cross(m, l) += pair_grad(m, p, l);
        }
        for (std::size_t l = 0; l < d; ++l) {
            double s = 0.0;
            for (std::size_t j = 0; j < p; ++j) s += pair_grad(p, j, l);
            cross(p, l) = s;
        }
        // Differentiate w_P D^2(P) for P = p + 1.
        const double pd = static_cast<double>(p + 1);
        const double wp = w[p - 1];
        for (std::size_t m = 0; m <= p; ++m) {
            for (std::size_t l = 0; l < d; ++l) {
                grad(m, l) += wp * (-2.0 / pd * mean_grad(m, l) +
                                    (diag_grad(m, l) + 2.0 * cross(m, l)) / (pd * pd));
            }
        }
    }
    return grad;
}

}  // namespace reference

}  // namespace neurolds
