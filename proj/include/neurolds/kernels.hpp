#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace neurolds {

// L2 discrepancy families, each a product of one-dimensional kernels.
enum class KernelFamily { star, ext, per, ctr, sym, asd };

inline constexpr KernelFamily kAllFamilies[] = {KernelFamily::star, KernelFamily::ext, KernelFamily::per,
                                                KernelFamily::ctr,  KernelFamily::sym, KernelFamily::asd};

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);

// One-dimensional closed forms of a family.
//   k(x,y)         kernel
//   b(x)           integral of k(x,y) over y in [0,1]
//   c              integral of b over [0,1]
//   dk(x,y)        partial derivative in x
//   db(x)          derivative of b
//   ddiag(x)       derivative of x -> k(x,x)
// Subgradients: d|u| at u = 0 is 0, and each argument of max(x,y) receives 1/2 at a tie.
double kernel_1d(KernelFamily f, double x, double y);
double kernel_1d_mean(KernelFamily f, double x);
double kernel_1d_total(KernelFamily f);
double kernel_1d_dx(KernelFamily f, double x, double y);
double kernel_1d_mean_dx(KernelFamily f, double x);
double kernel_1d_diag_dx(KernelFamily f, double x);

struct KernelSpec {
    KernelFamily family = KernelFamily::sym;
    // Optional product weights; when non-empty the kernel is prod_j (1 + w_j k(x_j, y_j)).
    std::vector<double> weights;

    bool weighted() const { return !weights.empty(); }
    // Throws std::invalid_argument if weights are present with wrong length or non-positive.
    void validate(std::size_t dim) const;
};

// Full d-dimensional kernel.
double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

}  // namespace neurolds
