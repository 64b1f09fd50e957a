#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "neurolds/kernels.hpp"
#include "neurolds/point_buffer.hpp"

namespace neurolds {

// Raised when a squared discrepancy is negative beyond rounding noise.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Radicands in [kRadicandClamp, 0) are treated as 0 before the square root.
inline constexpr double kRadicandClamp = -1e-12;

double clamp_sqrt(double radicand);

// Integral of the kernel over the unit square in dimension `dim`.
double kernel_constant(const KernelSpec& spec, std::size_t dim);

// Squared discrepancy and discrepancy of the whole point set.
double discrepancy_squared(const KernelSpec& spec, const PointBuffer& points);
double discrepancy_single(const KernelSpec& spec, const PointBuffer& points);

// Entry P-1 holds the squared discrepancy / discrepancy of the first P points.
// Incremental over prefixes, O(d N^2) in total.
std::vector<double> discrepancy_squared_all_prefixes(const KernelSpec& spec, const PointBuffer& points);
std::vector<double> discrepancy_all_prefixes(const KernelSpec& spec, const PointBuffer& points);

enum class WeightScheme { uniform, length_proportional, custom };

std::string_view to_string(WeightScheme scheme);
WeightScheme parse_weight_scheme(std::string_view name);

struct PrefixWeights {
    WeightScheme scheme = WeightScheme::uniform;
    std::vector<double> values;  // custom only: w_2..w_N

    // Weights w_2..w_N for a sequence of length n (entry 0 is w_2).
    //   uniform:              1/(n-2), and exactly 1 when n = 2
    //   length_proportional:  2P/(n^2+n-2)
    std::vector<double> resolve(std::size_t n) const;
};

// sum_{P=2}^{N} w_P D^2(P), evaluated in one O(d N^2) pass through per-point
// suffix coefficients instead of N separate prefix sums.
double prefix_loss(const KernelSpec& spec, const PrefixWeights& weights, const PointBuffer& points);

// N x d gradient of prefix_loss with respect to the point coordinates.
// Stored in a PointBuffer for shape only; entries are unrestricted reals.
using GradientBuffer = PointBuffer;

struct LossAndGradient {
    double loss = 0.0;
    GradientBuffer gradient;
};

LossAndGradient prefix_loss_and_grad(const KernelSpec& spec, const PrefixWeights& weights,
                                     const PointBuffer& points);
GradientBuffer prefix_loss_grad(const KernelSpec& spec, const PrefixWeights& weights, const PointBuffer& points);

// Serial reference implementations. Plain loops over kernel_eval with no
// blocking, templating or threading; kept for tests and benchmarks.
namespace reference {
std::vector<double> discrepancy_squared_all_prefixes(const KernelSpec& spec, const PointBuffer& points);
double prefix_loss(const KernelSpec& spec, const PrefixWeights& weights, const PointBuffer& points);
GradientBuffer prefix_loss_grad(const KernelSpec& spec, const PrefixWeights& weights, const PointBuffer& points);
}  // namespace reference

}  // namespace neurolds
