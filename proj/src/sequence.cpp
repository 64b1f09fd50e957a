#include <numeric>
#include <stdexcept>

#include "neurolds/mlp.hpp"
#include "neurolds/parallel.hpp"
#include "neurolds/rng.hpp"
#include "neurolds/seqcore.hpp"

namespace neurolds {

PointBuffer generate(const SequenceSpec& spec, std::size_t n, GenerateInfo* info) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("generate: n must be at least 1");
    const std::size_t d = spec.dim;
    const std::uint64_t first = spec.burn_in;
    if (info) *info = GenerateInfo{};
    PointBuffer out(n, d);
    const auto rows = static_cast<std::ptrdiff_t>(n);

    switch (spec.kind) {
        case SequenceKind::vdc:
            for (std::size_t i = 0; i < n; ++i) out(i, 0) = radical_inverse(first + i, 2);
            break;
        case SequenceKind::halton: {
            std::vector<std::uint32_t> bases(d);
            for (std::size_t j = 0; j < d; ++j) bases[j] = nth_prime(j);
#pragma omp parallel for schedule(static) num_threads(thread_count())
            for (std::ptrdiff_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < d; ++j) out(i, j) = radical_inverse(first + i, bases[j]);
            }
            break;
        }
        case SequenceKind::sobol:
        case SequenceKind::sobol_scrambled: {
            const SobolGenerator gen(d, spec.table ? *spec.table : DirectionTable::embedded());
            const bool scramble = spec.kind == SequenceKind::sobol_scrambled;
            const std::uint64_t seed = scramble ? *spec.seed : 0;
            if ((first + n - 1) >> kSobolBits) throw std::out_of_range("Sobol' index range exceeds 2^32");
#pragma omp parallel for schedule(static) num_threads(thread_count())
            for (std::ptrdiff_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    std::uint32_t x = gen.bits(first + i, j);
                    if (scramble) x = owen_scramble_bits(x, seed, j);
                    out(i, j) = static_cast<double>(x) * 0x1.0p-32;
                }
            }
            break;
        }
        case SequenceKind::uniform: {
            const std::uint64_t seed = *spec.seed;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    out(i, j) = counter_uniform(split_seed(seed, j), first + i);
                }
            }
            break;
        }
        case SequenceKind::neural: {
            const MlpModel model = load_model(*spec.model_path);
            if (model.output_dim() != d) {
                throw std::invalid_argument("model produces dimension " + std::to_string(model.output_dim()) +
                                            ", requested " + std::to_string(d));
            }
            // Raw index r maps to the model's sequence-local index r + origin.
            std::vector<std::uint64_t> idx(n);
            std::iota(idx.begin(), idx.end(), first + model.metadata.index_origin);
            if (info) info->beyond_training_length = beyond_training_length(model, idx);
            out = forward(model, idx);
            break;
        }
    }
    return out;
}

}  // namespace neurolds
