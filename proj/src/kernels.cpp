#include "neurolds/kernels.hpp"

#include <stdexcept>
#include <string>

#include "kernel_families.hpp"

namespace neurolds {

using detail::dispatch_family;

std::string_view to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::star: return "star";
        case KernelFamily::ext: return "ext";
        case KernelFamily::per: return "per";
        case KernelFamily::ctr: return "ctr";
        case KernelFamily::sym: return "sym";
        case KernelFamily::asd: return "asd";
    }
    return "?";
}

KernelFamily parse_kernel_family(std::string_view name) {
    for (KernelFamily f : kAllFamilies) {
        if (to_string(f) == name) return f;
    }
    throw std::invalid_argument("unknown kernel family '" + std::string(name) +
                                "' (expected star, ext, per, ctr, sym or asd)");
}

double kernel_1d(KernelFamily f, double x, double y) {
    return dispatch_family(f, [&](auto fam) { return decltype(fam)::k(x, y); });
}
double kernel_1d_mean(KernelFamily f, double x) {
    return dispatch_family(f, [&](auto fam) { return decltype(fam)::b(x); });
}
double kernel_1d_total(KernelFamily f) {
    return dispatch_family(f, [](auto fam) { return decltype(fam)::c; });
}
double kernel_1d_dx(KernelFamily f, double x, double y) {
    return dispatch_family(f, [&](auto fam) { return decltype(fam)::dk(x, y); });
}
double kernel_1d_mean_dx(KernelFamily f, double x) {
    return dispatch_family(f, [&](auto fam) { return decltype(fam)::db(x); });
}
double kernel_1d_diag_dx(KernelFamily f, double x) {
    return dispatch_family(f, [&](auto fam) { return decltype(fam)::ddiag(x); });
}

void KernelSpec::validate(std::size_t dim) const {
    if (weights.empty()) return;
    if (weights.size() != dim) {
        throw std::invalid_argument("kernel weights have length " + std::to_string(weights.size()) +
                                    " but points have dimension " + std::to_string(dim));
    }
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (!(weights[j] > 0.0)) {
            throw std::invalid_argument("kernel weight " + std::to_string(j) + " must be positive");
        }
    }
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("kernel_eval: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()) + ")");
    }
    spec.validate(x.size());
    double prod = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double k = kernel_1d(spec.family, x[j], y[j]);
        prod *= spec.weighted() ? 1.0 + spec.weights[j] * k : k;
    }
    return prod;
}

}  // namespace neurolds
