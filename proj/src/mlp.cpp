#include "neurolds/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "neurolds/parallel.hpp"
#include "neurolds/point_io.hpp"
#include "neurolds/rng.hpp"

namespace neurolds {

void EncodingConfig::validate() const {
    if (bands < 1) throw std::invalid_argument("encoding needs at least one band");
    if (n_norm < 1) throw std::invalid_argument("encoding normalizing length must be at least 1");
}

void encode_index(const EncodingConfig& cfg, std::uint64_t i, std::span<double> out) {
    if (out.size() != cfg.width()) throw std::invalid_argument("encode_index: output width mismatch");
    const double t = static_cast<double>(i) / static_cast<double>(cfg.n_norm);
    out[0] = t;
    double freq = std::numbers::pi;
    for (std::size_t k = 0; k < cfg.bands; ++k) {
        const double a = freq * t;
        out[1 + 2 * k] = std::sin(a);
        out[2 + 2 * k] = std::cos(a);
        freq *= 2.0;
    }
}

std::vector<double> encode_index(const EncodingConfig& cfg, std::uint64_t i) {
    std::vector<double> out(cfg.width());
    encode_index(cfg, i, out);
    return out;
}

// ---------------------------------------------------------------------------

MlpModel::MlpModel(EncodingConfig encoding, std::size_t hidden, std::size_t layers, std::size_t dim)
    : encoding_(encoding), hidden_(layers > 1 ? hidden : 0) {
    encoding_.validate();
    if (layers < 1) throw std::invalid_argument("MLP needs at least one layer");
    if (dim < 1) throw std::invalid_argument("MLP output dimension must be at least 1");
    if (layers > 1 && hidden < 1) throw std::invalid_argument("MLP hidden width must be at least 1");
    dims_.push_back(encoding_.width());
    for (std::size_t l = 1; l < layers; ++l) dims_.push_back(hidden);
    dims_.push_back(dim);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        Layer ly{dims_[l], dims_[l + 1], offset, offset + dims_[l] * dims_[l + 1]};
        offset = ly.bias_offset + ly.out;
        layers_.push_back(ly);
    }
    params_.assign(offset, 0.0);
}

MlpModel MlpModel::initialized(EncodingConfig encoding, std::size_t hidden, std::size_t layers, std::size_t dim,
                               std::uint64_t seed) {
    MlpModel m(encoding, hidden, layers, dim);
    SplitMix64 rng(split_seed(seed, 0x1417));
    for (const Layer& ly : m.layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(ly.in + ly.out));
        for (std::size_t p = 0; p < ly.in * ly.out; ++p) {
            m.params_[ly.weight_offset + p] = limit * (2.0 * rng.uniform() - 1.0);
        }
    }
    m.metadata.seed = seed;
    return m;
}

std::size_t MlpModel::layer_of(std::size_t p) const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (p < layers_[l].bias_offset + layers_[l].out) return l;
    }
    throw std::out_of_range("parameter index out of range");
}

bool MlpModel::same_architecture(const MlpModel& other) const {
    return encoding_.bands == other.encoding_.bands && encoding_.n_norm == other.encoding_.n_norm &&
           dims_ == other.dims_;
}

// ---------------------------------------------------------------------------

namespace {

using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

constexpr double kSigmoidLow = 0x1.0p-1022;
constexpr double kSigmoidHigh = 0x1.fffffffffffffp-1;

std::size_t chunk_count(std::size_t n) { return (n + kBatchChunk - 1) / kBatchChunk; }

std::vector<RowMatrix> forward_chunk(const MlpModel& model, std::span<const std::uint64_t> indices) {
    const std::size_t rows = indices.size();
    std::vector<RowMatrix> acts;
    acts.reserve(model.num_layers() + 1);
    RowMatrix a0(rows, model.encoding().width());
    for (std::size_t r = 0; r < rows; ++r) {
        encode_index(model.encoding(), indices[r], std::span<double>(a0.row(r).data(), a0.cols()));
    }
    acts.push_back(std::move(a0));
    const double* p = model.parameters().data();
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const auto& ly = model.layer(l);
        ConstMap w(p + ly.weight_offset, ly.out, ly.in);
        Eigen::Map<const Eigen::RowVectorXd> b(p + ly.bias_offset, ly.out);
        RowMatrix z = acts.back() * w.transpose();
        z.rowwise() += b;
        if (l + 1 < model.num_layers()) {
            acts.push_back(z.cwiseMax(0.0));
        } else {
            acts.push_back(z.unaryExpr([](double v) {
                return std::clamp(1.0 / (1.0 + std::exp(-v)), kSigmoidLow, kSigmoidHigh);
            }));
        }
    }
    return acts;
}

void backward_chunk(const MlpModel& model, const std::vector<RowMatrix>& acts, const PointBuffer& upstream,
                    std::size_t first_row, std::vector<double>& grad) {
    const std::size_t rows = static_cast<std::size_t>(acts.front().rows());
    const std::size_t d = model.output_dim();
    const RowMatrix& y = acts.back();
    RowMatrix g(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            const double yv = y(r, j);
            g(r, j) = upstream(first_row + r, j) * yv * (1.0 - yv);
        }
    }
    const double* p = model.parameters().data();
    for (std::size_t l = model.num_layers(); l-- > 0;) {
        const auto& ly = model.layer(l);
        Map gw(grad.data() + ly.weight_offset, ly.out, ly.in);
        Eigen::Map<Eigen::RowVectorXd> gb(grad.data() + ly.bias_offset, ly.out);
        gw.noalias() += g.transpose() * acts[l];
        gb += g.colwise().sum();
        if (l > 0) {
            ConstMap w(p + ly.weight_offset, ly.out, ly.in);
            RowMatrix next = g * w;
            // ReLU subgradient at 0 is 0.
            next.array() *= (acts[l].array() > 0.0).cast<double>();
            g = std::move(next);
        }
    }
}

}  // namespace

ForwardCache forward_cached(const MlpModel& model, std::span<const std::uint64_t> indices) {
    const std::size_t n = indices.size();
    const std::size_t chunks = chunk_count(n);
    ForwardCache cache{std::vector<std::vector<RowMatrix>>(chunks), PointBuffer(n, model.output_dim())};
    const auto nc = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t c = 0; c < nc; ++c) {
        const std::size_t first = static_cast<std::size_t>(c) * kBatchChunk;
        const std::size_t rows = std::min(kBatchChunk, n - first);
        cache.chunks[c] = forward_chunk(model, indices.subspan(first, rows));
        const RowMatrix& y = cache.chunks[c].back();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < model.output_dim(); ++j) cache.output(first + r, j) = y(r, j);
        }
    }
    return cache;
}

PointBuffer forward(const MlpModel& model, std::span<const std::uint64_t> indices) {
    return forward_cached(model, indices).output;
}

bool beyond_training_length(const MlpModel& model, std::span<const std::uint64_t> indices) {
    return std::any_of(indices.begin(), indices.end(),
                       [&](std::uint64_t i) { return i > model.encoding().n_norm; });
}

std::vector<double> backward(const MlpModel& model, const ForwardCache& cache, const PointBuffer& upstream) {
    if (upstream.size() != cache.output.size() || upstream.dim() != model.output_dim()) {
        throw std::invalid_argument("backward: upstream shape " + std::to_string(upstream.size()) + "x" +
                                    std::to_string(upstream.dim()) + " does not match output " +
                                    std::to_string(cache.output.size()) + "x" + std::to_string(model.output_dim()));
    }
    const std::size_t chunks = cache.chunks.size();
    std::vector<std::vector<double>> partial(chunks, std::vector<double>(model.parameter_count(), 0.0));
    const auto nc = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t c = 0; c < nc; ++c) {
        backward_chunk(model, cache.chunks[c], upstream, static_cast<std::size_t>(c) * kBatchChunk, partial[c]);
    }
    if (partial.empty()) return std::vector<double>(model.parameter_count(), 0.0);
    // Chunk order fixes the reduction order.
    std::vector<double> grad = std::move(partial[0]);
    for (std::size_t c = 1; c < chunks; ++c) {
        for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += partial[c][p];
    }
    return grad;
}

std::vector<double> backward(const MlpModel& model, std::span<const std::uint64_t> indices,
                             const PointBuffer& upstream) {
    return backward(model, forward_cached(model, indices), upstream);
}

void adam_step(AdamState& state, MlpModel& model, std::span<const double> grads, double lr) {
    auto& params = model.parameters();
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: parameter, gradient and moment shapes differ");
    }
    for (std::size_t p = 0; p < grads.size(); ++p) {
        if (!std::isfinite(grads[p])) {
            throw std::runtime_error("non-finite gradient in layer " + std::to_string(model.layer_of(p)) +
                                     " (parameter " + std::to_string(p) + ")");
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        const double g = grads[p];
        state.m[p] = state.beta1 * state.m[p] + (1.0 - state.beta1) * g;
        state.v[p] = state.beta2 * state.v[p] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[p] / c1;
        const double vhat = state.v[p] / c2;
        params[p] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kModelMagic[8] = {'N', 'L', 'D', 'S', 'M', 'O', 'D', 'L'};

std::uint32_t narrow32(std::size_t v, const char* what) {
    if (v > 0xffffffffu) throw std::invalid_argument(std::string(what) + " does not fit the model header");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_model(std::ostream& out, const MlpModel& model) {
    out.write(kModelMagic, sizeof kModelMagic);
    write_u32(out, kModelFormatVersion);
    write_u32(out, narrow32(model.encoding().bands, "band count"));
    write_u64(out, model.encoding().n_norm);
    write_u32(out, narrow32(model.output_dim(), "dimension"));
    write_u32(out, narrow32(model.num_layers(), "layer count"));
    write_u32(out, narrow32(model.hidden_width(), "hidden width"));
    write_u32(out, static_cast<std::uint32_t>(model.metadata.loss));
    write_u64(out, model.metadata.burn_in);
    write_u64(out, model.metadata.seed);
    write_u64(out, model.metadata.index_origin);
    for (double p : model.parameters()) write_f64(out, p);
    if (!out) throw std::runtime_error("failed writing model");
}

MlpModel read_model(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
        throw std::runtime_error("not a model file (bad magic)");
    }
    const std::uint32_t version = read_u32(in);
    if (version != kModelFormatVersion) {
        throw std::runtime_error("unsupported model format version " + std::to_string(version));
    }
    EncodingConfig enc;
    enc.bands = read_u32(in);
    enc.n_norm = read_u64(in);
    const std::uint32_t dim = read_u32(in);
    const std::uint32_t layers = read_u32(in);
    const std::uint32_t hidden = read_u32(in);
    const std::uint32_t loss = read_u32(in);
    if (loss > static_cast<std::uint32_t>(KernelFamily::asd)) throw std::runtime_error("model header: bad loss family");
    MlpModel model(enc, hidden, layers, dim);
    model.metadata.loss = static_cast<KernelFamily>(loss);
    model.metadata.burn_in = read_u64(in);
    model.metadata.seed = read_u64(in);
    model.metadata.index_origin = read_u64(in);
    for (double& p : model.parameters()) p = read_f64(in);
    return model;
}

void write_model_sidecar(std::ostream& out, const MlpModel& model) {
    out << "format_version: " << kModelFormatVersion << '\n'
        << "bands: " << model.encoding().bands << '\n'
        << "n_norm: " << model.encoding().n_norm << '\n'
        << "dim: " << model.output_dim() << '\n'
        << "layers: " << model.num_layers() << '\n'
        << "hidden: " << model.hidden_width() << '\n'
        << "loss: " << to_string(model.metadata.loss) << '\n'
        << "burn_in: " << model.metadata.burn_in << '\n'
        << "seed: " << model.metadata.seed << '\n'
        << "index_origin: " << model.metadata.index_origin << '\n'
        << "parameter_count: " << model.parameter_count() << '\n';
    for (const auto& [k, v] : model.metadata.extra) out << k << ": " << v << '\n';
}

void save_model(const std::string& path, const MlpModel& model) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
        write_model(out, model);
    }
    std::ofstream meta(path + ".meta");
    if (!meta) throw std::runtime_error("cannot write model sidecar '" + path + ".meta'");
    write_model_sidecar(meta, model);
}

MlpModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
    MlpModel model = read_model(in);

    // Restore free-form entries from the sidecar when it exists.
    std::ifstream meta(path + ".meta");
    static const char* header_keys[] = {"format_version", "bands", "n_norm", "dim", "layers", "hidden",
                                        "loss", "burn_in", "seed", "index_origin", "parameter_count"};
    std::string line;
    while (std::getline(meta, line)) {
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string key = line.substr(0, colon);
        std::string value = line.substr(colon + 1);
        value.erase(0, value.find_first_not_of(' '));
        if (std::find(std::begin(header_keys), std::end(header_keys), key) != std::end(header_keys)) continue;
        model.metadata.extra[key] = value;
    }
    return model;
}

}  // namespace neurolds
