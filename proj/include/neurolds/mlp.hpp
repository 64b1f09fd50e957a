#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "neurolds/kernels.hpp"
#include "neurolds/point_buffer.hpp"

namespace neurolds {

// Sinusoidal index features [i/N, sin(2^k pi i/N), cos(2^k pi i/N) : k < K].
struct EncodingConfig {
    std::size_t bands = 64;      // K
    std::uint64_t n_norm = 1;    // N in i/N

    std::size_t width() const { return 1 + 2 * bands; }
    void validate() const;
};

void encode_index(const EncodingConfig& cfg, std::uint64_t i, std::span<double> out);
std::vector<double> encode_index(const EncodingConfig& cfg, std::uint64_t i);

// Provenance carried in the model header and sidecar.
struct ModelMetadata {
    KernelFamily loss = KernelFamily::sym;
    std::uint64_t burn_in = 0;
    std::uint64_t seed = 0;
    // Sequence-local index of the first training point.
    std::uint64_t index_origin = 1;
    // Free-form key/value pairs written to the sidecar (training configuration etc).
    std::map<std::string, std::string> extra;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Index -> point map: encoding, L affine layers with ReLU between them, sigmoid output.
class MlpModel {
public:
    struct Layer {
        std::size_t in = 0;
        std::size_t out = 0;
        std::size_t weight_offset = 0;  // out x in, row-major
        std::size_t bias_offset = 0;
    };

    MlpModel() = default;
    // layers = number of affine layers (>= 1); hidden width unused when layers == 1.
    MlpModel(EncodingConfig encoding, std::size_t hidden, std::size_t layers, std::size_t dim);

    // Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
    static MlpModel initialized(EncodingConfig encoding, std::size_t hidden, std::size_t layers, std::size_t dim,
                                std::uint64_t seed);

    const EncodingConfig& encoding() const { return encoding_; }
    const std::vector<std::size_t>& layer_dims() const { return dims_; }
    std::size_t num_layers() const { return layers_.size(); }
    std::size_t hidden_width() const { return hidden_; }
    std::size_t output_dim() const { return dims_.back(); }
    const Layer& layer(std::size_t l) const { return layers_[l]; }

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }

    // Layer that owns flat parameter `p`.
    std::size_t layer_of(std::size_t p) const;

    ModelMetadata metadata;

    bool same_architecture(const MlpModel& other) const;

private:
    EncodingConfig encoding_;
    std::size_t hidden_ = 0;
    std::vector<std::size_t> dims_;
    std::vector<Layer> layers_;
    std::vector<double> params_;
};

// Activations saved by a forward pass for the backward pass.
struct ForwardCache {
    // Per fixed-size row chunk, activations of every layer (input encoding first).
    std::vector<std::vector<RowMatrix>> chunks;
    PointBuffer output;
};

// Rows per chunk. Fixed so that results do not depend on the thread count.
inline constexpr std::size_t kBatchChunk = 128;

PointBuffer forward(const MlpModel& model, std::span<const std::uint64_t> indices);
ForwardCache forward_cached(const MlpModel& model, std::span<const std::uint64_t> indices);

// True when any index exceeds the model's normalizing length.
bool beyond_training_length(const MlpModel& model, std::span<const std::uint64_t> indices);

// Reverse-mode gradient of sum_i <upstream_i, f(i)> with respect to all parameters.
std::vector<double> backward(const MlpModel& model, const ForwardCache& cache, const PointBuffer& upstream);
std::vector<double> backward(const MlpModel& model, std::span<const std::uint64_t> indices,
                             const PointBuffer& upstream);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update in place. Throws std::runtime_error naming the
// layer when a gradient entry is not finite; the model is left untouched then.
void adam_step(AdamState& state, MlpModel& model, std::span<const double> grads, double lr);

// Binary container: header {magic "NLDSMODL", u32 version, u32 K, u64 N_norm,
// u32 d, u32 L, u32 H, u32 loss family, u64 burn-in, u64 seed, u64 index origin}
// followed by each layer's weights then biases as little-endian doubles.
inline constexpr std::uint32_t kModelFormatVersion = 1;

void write_model(std::ostream& out, const MlpModel& model);
MlpModel read_model(std::istream& in);
// Writes `path` and a human-readable `path.meta` sidecar of `key: value` lines.
void save_model(const std::string& path, const MlpModel& model);
MlpModel load_model(const std::string& path);
void write_model_sidecar(std::ostream& out, const MlpModel& model);

}  // namespace neurolds
