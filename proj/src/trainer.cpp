#include "neurolds/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "neurolds/parallel.hpp"
#include "neurolds/rng.hpp"

namespace neurolds {

TrainConfig TrainConfig::defaults_for(KernelFamily family) {
    TrainConfig cfg;
    cfg.loss = family;
    switch (family) {
        case KernelFamily::star:
            cfg.hidden = 512;
            cfg.layers = 5;
            cfg.bands = 64;
            cfg.pretrain_lr = 1.38e-3;
            cfg.finetune_lr = 3.52e-4;
            cfg.final_lr_ratio = 4.39e-2;
            break;
        case KernelFamily::ctr:
            cfg.hidden = 768;
            cfg.layers = 7;
            cfg.bands = 32;
            cfg.pretrain_lr = 2.85e-3;
            cfg.finetune_lr = 4.14e-3;
            cfg.final_lr_ratio = 1.14e-1;
            break;
        default:
            break;  // sym values are the struct defaults
    }
    return cfg;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
    if (dim < 1) fail("dim must be at least 1");
    if (n_points < 2) fail("n_points must be at least 2");
    if (layers < 1) fail("layers must be at least 1");
    if (layers > 1 && hidden < 1) fail("hidden must be at least 1");
    if (bands < 1) fail("bands must be at least 1");
    if (!(pretrain_lr > 0.0)) fail("pretrain_lr must be positive");
    if (!(finetune_lr > 0.0)) fail("finetune_lr must be positive");
    if (!(final_lr_ratio > 0.0 && final_lr_ratio <= 1.0)) fail("final_lr_ratio must lie in (0,1]");
    if (finetune_epochs < 1) fail("finetune_epochs must be at least 1");
    if (reference != SequenceKind::sobol && reference != SequenceKind::halton) fail("reference must be sobol or halton");
    kernel().validate(dim);
    if (prefix_weights.scheme == WeightScheme::custom) (void)prefix_weights.resolve(n_points);
}

// ---------------------------------------------------------------------------
// Config text

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        throw std::invalid_argument("train config: bad value '" + value + "' for " + key);
    }
    return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_number<double>(key, item));
    }
    return out;
}

std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

void apply_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "dim") cfg.dim = parse_number<std::size_t>(key, value);
    else if (key == "n_points") cfg.n_points = parse_number<std::size_t>(key, value);
    else if (key == "hidden") cfg.hidden = parse_number<std::size_t>(key, value);
    else if (key == "layers") cfg.layers = parse_number<std::size_t>(key, value);
    else if (key == "bands") cfg.bands = parse_number<std::size_t>(key, value);
    else if (key == "pretrain_lr") cfg.pretrain_lr = parse_number<double>(key, value);
    else if (key == "pretrain_epochs") cfg.pretrain_epochs = parse_number<std::size_t>(key, value);
    else if (key == "finetune_lr") cfg.finetune_lr = parse_number<double>(key, value);
    else if (key == "finetune_epochs") cfg.finetune_epochs = parse_number<std::size_t>(key, value);
    else if (key == "final_lr_ratio") cfg.final_lr_ratio = parse_number<double>(key, value);
    else if (key == "loss") cfg.loss = parse_kernel_family(value);
    else if (key == "gamma") cfg.gamma = parse_list(key, value);
    else if (key == "prefix_weights") cfg.prefix_weights.scheme = parse_weight_scheme(value);
    else if (key == "prefix_weight_values") cfg.prefix_weights.values = parse_list(key, value);
    else if (key == "reference") cfg.reference = parse_sequence_kind(value);
    else if (key == "burn_in") cfg.burn_in = parse_number<std::uint64_t>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "checkpoint_path") cfg.checkpoint_path = value;
    else if (key == "checkpoint_every") cfg.checkpoint_every = parse_number<std::size_t>(key, value);
    else throw std::invalid_argument("train config: unknown key '" + key + "'");
}

}  // namespace

TrainConfig parse_train_config(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) {
            throw std::invalid_argument("train config line " + std::to_string(line_no) + ": expected `key: value`");
        }
        pairs.emplace_back(trim(line.substr(0, colon)), trim(line.substr(colon + 1)));
    }
    TrainConfig cfg;
    for (const auto& [k, v] : pairs) {
        if (k == "loss") cfg = TrainConfig::defaults_for(parse_kernel_family(v));
    }
    for (const auto& [k, v] : pairs) apply_key(cfg, k, v);
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    return parse_train_config(in);
}

void write_train_config(std::ostream& out, const TrainConfig& cfg) {
    const auto old = out.precision(17);
    out << "dim: " << cfg.dim << '\n'
        << "n_points: " << cfg.n_points << '\n'
        << "hidden: " << cfg.hidden << '\n'
        << "layers: " << cfg.layers << '\n'
        << "bands: " << cfg.bands << '\n'
        << "pretrain_lr: " << cfg.pretrain_lr << '\n'
        << "pretrain_epochs: " << cfg.pretrain_epochs << '\n'
        << "finetune_lr: " << cfg.finetune_lr << '\n'
        << "finetune_epochs: " << cfg.finetune_epochs << '\n'
        << "final_lr_ratio: " << cfg.final_lr_ratio << '\n'
        << "loss: " << to_string(cfg.loss) << '\n';
    if (!cfg.gamma.empty()) out << "gamma: " << join(cfg.gamma) << '\n';
    out << "prefix_weights: " << to_string(cfg.prefix_weights.scheme) << '\n';
    if (!cfg.prefix_weights.values.empty()) out << "prefix_weight_values: " << join(cfg.prefix_weights.values) << '\n';
    out << "reference: " << to_string(cfg.reference) << '\n'
        << "burn_in: " << cfg.burn_in << '\n'
        << "seed: " << cfg.seed << '\n';
    if (!cfg.checkpoint_path.empty()) {
        out << "checkpoint_path: " << cfg.checkpoint_path << '\n' << "checkpoint_every: " << cfg.checkpoint_every << '\n';
    }
    out.precision(old);
}

// ---------------------------------------------------------------------------
// Log

void TrainLog::append(const TrainLog& other) {
    records.insert(records.end(), other.records.begin(), other.records.end());
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

void TrainLog::write_csv(std::ostream& out) const {
    const auto old = out.precision(17);
    out << "stage,epoch,loss,lr,seconds\n";
    for (const auto& r : records) {
        out << r.stage << ',' << r.epoch << ',' << r.loss << ',' << r.lr << ',' << r.seconds << '\n';
    }
    out.precision(old);
}

void TrainLog::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write log '" + path + "'");
    write_csv(out);
}

// ---------------------------------------------------------------------------

std::vector<std::uint64_t> training_indices(std::size_t n) {
    std::vector<std::uint64_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::uint64_t{1});
    return idx;
}

PointBuffer reference_targets(const TrainConfig& cfg) {
    SequenceSpec spec;
    spec.kind = cfg.reference;
    spec.dim = cfg.dim;
    spec.burn_in = cfg.burn_in;
    return generate(spec, cfg.n_points);
}

MlpModel initial_model(const TrainConfig& cfg) {
    EncodingConfig enc;
    enc.bands = cfg.bands;
    enc.n_norm = cfg.n_points;
    MlpModel model = MlpModel::initialized(enc, cfg.hidden, cfg.layers, cfg.dim, cfg.seed);
    model.metadata.loss = cfg.loss;
    model.metadata.burn_in = cfg.burn_in;
    model.metadata.seed = cfg.seed;
    model.metadata.index_origin = 1;
    return model;
}

double cosine_lr(double base, double ratio, std::size_t epoch, std::size_t epochs) {
    if (epochs <= 1) return base;
    const double t = static_cast<double>(std::min(epoch, epochs - 1)) / static_cast<double>(epochs - 1);
    return base * (ratio + (1.0 - ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

double bounding_box_volume(const PointBuffer& points) {
    double vol = 1.0;
    for (std::size_t j = 0; j < points.dim(); ++j) {
        double lo = 1.0, hi = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            lo = std::min(lo, points(i, j));
            hi = std::max(hi, points(i, j));
        }
        vol *= std::max(0.0, hi - lo);
    }
    return vol;
}

namespace {

std::string format_exact(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void check_model(const MlpModel& model, const TrainConfig& cfg) {
    if (model.output_dim() != cfg.dim) {
        throw std::invalid_argument("model output dimension " + std::to_string(model.output_dim()) +
                                    " does not match config dim " + std::to_string(cfg.dim));
    }
    if (model.encoding().n_norm != cfg.n_points) {
        throw std::invalid_argument("model was built for " + std::to_string(model.encoding().n_norm) +
                                    " points, config asks for " + std::to_string(cfg.n_points));
    }
}

// Checks used by pretrain/finetune. Weaker than validate(): lr = 0 is allowed.
void check_direct(const TrainConfig& cfg) {
    if (cfg.n_points < 2) throw std::invalid_argument("train config: n_points must be at least 2");
    if (!(cfg.pretrain_lr >= 0.0) || !(cfg.finetune_lr >= 0.0)) {
        throw std::invalid_argument("train config: learning rates must be non-negative");
    }
    if (!(cfg.final_lr_ratio > 0.0 && cfg.final_lr_ratio <= 1.0)) {
        throw std::invalid_argument("train config: final_lr_ratio must lie in (0,1]");
    }
    cfg.kernel().validate(cfg.dim);
}

struct StageClock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

double mse_and_upstream(const PointBuffer& out, const PointBuffer& targets, PointBuffer* upstream) {
    const std::size_t n = out.size();
    KahanSum acc;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < out.dim(); ++j) {
            const double r = out(i, j) - targets(i, j);
            acc.add(r * r);
            if (upstream) (*upstream)(i, j) = 2.0 * r / static_cast<double>(n);
        }
    }
    return acc.value() / static_cast<double>(n);
}

void maybe_checkpoint(const TrainConfig& cfg, const MlpModel& model, std::size_t epoch, bool force) {
    if (cfg.checkpoint_path.empty()) return;
    if (force || (cfg.checkpoint_every > 0 && epoch > 0 && epoch % cfg.checkpoint_every == 0)) {
        save_model(cfg.checkpoint_path, model);
    }
}

}  // namespace

double pretrain_mse(const MlpModel& model, const PointBuffer& targets) {
    const auto idx = training_indices(targets.size());
    return mse_and_upstream(forward(model, idx), targets, nullptr);
}

double model_prefix_loss(const MlpModel& model, const TrainConfig& cfg) {
    const auto idx = training_indices(cfg.n_points);
    return prefix_loss(cfg.kernel(), cfg.prefix_weights, forward(model, idx));
}

TrainResult pretrain(const TrainConfig& cfg) {
    check_direct(cfg);
    return pretrain(initial_model(cfg), cfg);
}

TrainResult pretrain(MlpModel model, const TrainConfig& cfg) {
    check_direct(cfg);
    check_model(model, cfg);
    const PointBuffer targets = reference_targets(cfg);
    const auto idx = training_indices(cfg.n_points);
    const std::size_t epochs = cfg.pretrain_epochs;

    TrainLog log;
    AdamState adam(model.parameter_count());
    PointBuffer upstream(cfg.n_points, cfg.dim);
    MlpModel last_good = model;
    StageClock clock;

    for (std::size_t e = 0; e < epochs; ++e) {
        const double lr = cosine_lr(cfg.pretrain_lr, cfg.final_lr_ratio, e, epochs);
        const ForwardCache cache = forward_cached(model, idx);
        const double mse = mse_and_upstream(cache.output, targets, &upstream);
        if (!std::isfinite(mse)) {
            throw TrainingError("pretrain diverged at epoch " + std::to_string(e) + " (non-finite loss)", last_good, log);
        }
        last_good = model;
        log.records.push_back({"pretrain", e, mse, lr, clock.seconds()});
        const auto grads = backward(model, cache, upstream);
        try {
            adam_step(adam, model, grads, lr);
        } catch (const std::runtime_error& err) {
            throw TrainingError(std::string("pretrain diverged: ") + err.what(), last_good, log);
        }
        maybe_checkpoint(cfg, model, e + 1, false);
    }

    const double final_mse = mse_and_upstream(forward(model, idx), targets, nullptr);
    if (!std::isfinite(final_mse)) throw TrainingError("pretrain diverged after the last epoch", last_good, log);
    log.records.push_back({"pretrain", epochs, final_mse, cosine_lr(cfg.pretrain_lr, cfg.final_lr_ratio, epochs, epochs),
                           clock.seconds()});
    model.metadata.extra["pretrain_mse"] = format_exact(final_mse);
    maybe_checkpoint(cfg, model, epochs, true);
    return {std::move(model), std::move(log), final_mse};
}

TrainResult finetune(MlpModel model, const TrainConfig& cfg) {
    check_direct(cfg);
    check_model(model, cfg);
    const KernelSpec kernel = cfg.kernel();
    const auto idx = training_indices(cfg.n_points);
    const std::size_t epochs = cfg.finetune_epochs;

    TrainLog log;
    AdamState adam(model.parameter_count());
    MlpModel best = model;
    double best_loss = std::numeric_limits<double>::infinity();
    StageClock clock;

    auto evaluate = [&](std::size_t e, double lr, const PointBuffer& pts, double loss) {
        if (!std::isfinite(loss)) {
            throw TrainingError("finetune diverged at epoch " + std::to_string(e) + " (non-finite loss)", best, log);
        }
        if (bounding_box_volume(pts) < kCollapseVolume) {
            throw TrainingError("finetune collapsed at epoch " + std::to_string(e) +
                                    ": all points lie in a box of volume below 1e-6 (degenerate solution)",
                                best, log);
        }
        log.records.push_back({"finetune", e, loss, lr, clock.seconds()});
        if (loss < best_loss) {
            best_loss = loss;
            best = model;
        }
    };

    for (std::size_t e = 0; e < epochs; ++e) {
        const double lr = cosine_lr(cfg.finetune_lr, cfg.final_lr_ratio, e, epochs);
        const ForwardCache cache = forward_cached(model, idx);
        LossAndGradient lg = prefix_loss_and_grad(kernel, cfg.prefix_weights, cache.output);
        evaluate(e, lr, cache.output, lg.loss);
        const auto grads = backward(model, cache, lg.gradient);
        try {
            adam_step(adam, model, grads, lr);
        } catch (const std::runtime_error& err) {
            throw TrainingError(std::string("finetune diverged: ") + err.what(), best, log);
        }
        maybe_checkpoint(cfg, best, e + 1, false);
    }
    {
        const PointBuffer pts = forward(model, idx);
        evaluate(epochs, cosine_lr(cfg.finetune_lr, cfg.final_lr_ratio, epochs, epochs), pts,
                 prefix_loss(kernel, cfg.prefix_weights, pts));
    }

    best.metadata.extra["finetune_loss"] = format_exact(best_loss);
    maybe_checkpoint(cfg, best, epochs, true);
    return {std::move(best), std::move(log), best_loss};
}

TrainResult train_full(const TrainConfig& cfg) {
    cfg.validate();
    TrainLog log;
    if (cfg.pretrain_epochs == 0) {
        log.warnings.push_back(
            "unsupported regime: fine-tuning without pretraining tends to collapse to a degenerate corner solution");
    }
    TrainResult pre = pretrain(cfg);
    log.append(pre.log);
    TrainResult fine;
    try {
        fine = finetune(std::move(pre.model), cfg);
    } catch (TrainingError& err) {
        log.append(err.log);
        err.log = log;
        throw;
    }
    log.append(fine.log);

    std::ostringstream os;
    write_train_config(os, cfg);
    std::istringstream is(os.str());
    std::string line;
    while (std::getline(is, line)) {
        const auto colon = line.find(':');
        fine.model.metadata.extra["config." + line.substr(0, colon)] = trim(line.substr(colon + 1));
    }
    for (std::size_t i = 0; i < log.warnings.size(); ++i) {
        fine.model.metadata.extra["warning." + std::to_string(i)] = log.warnings[i];
    }
    fine.log = std::move(log);
    return fine;
}

}  // namespace neurolds
