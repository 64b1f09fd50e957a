#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "neurolds/discrepancy.hpp"
#include "neurolds/kernels.hpp"
#include "neurolds/mlp.hpp"
#include "neurolds/seqcore.hpp"

namespace neurolds {

struct TrainConfig {
    std::size_t dim = 2;
    std::size_t n_points = 256;
    std::size_t hidden = 768;   // H
    std::size_t layers = 7;     // L, number of affine layers
    std::size_t bands = 64;     // K

    double pretrain_lr = 2.61e-3;
    std::size_t pretrain_epochs = 2000;
    double finetune_lr = 5.04e-3;
    std::size_t finetune_epochs = 2000;
    double final_lr_ratio = 3.02e-2;

    KernelFamily loss = KernelFamily::sym;
    std::vector<double> gamma;  // empty: unweighted kernel
    PrefixWeights prefix_weights;

    SequenceKind reference = SequenceKind::sobol;
    std::uint64_t burn_in = 128;
    std::uint64_t seed = 0;

    // When set, the best model so far is saved here every `checkpoint_every` epochs and at the end of a stage.
    std::string checkpoint_path;
    std::size_t checkpoint_every = 0;

    // Tuned architecture and learning rates for a loss family. Families
    // without a tuned entry use the sym values.
    static TrainConfig defaults_for(KernelFamily family);

    KernelSpec kernel() const { return KernelSpec{loss, gamma}; }

    // Throws std::invalid_argument. Learning rates must be positive, the ratio
    // in (0,1], fine-tune epochs at least 1; pretrain_epochs = 0 is allowed.
    void validate() const;
};

// `key: value` lines; '#' starts a comment. A `loss` key selects that
// family's defaults before the remaining keys are applied.
TrainConfig parse_train_config(std::istream& in);
TrainConfig load_train_config(const std::string& path);
void write_train_config(std::ostream& out, const TrainConfig& cfg);

struct TrainRecord {
    std::string stage;  // "pretrain" or "finetune"
    std::size_t epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<TrainRecord> records;
    std::vector<std::string> warnings;

    void append(const TrainLog& other);
    // Header `stage,epoch,loss,lr,seconds`.
    void write_csv(std::ostream& out) const;
    void save_csv(const std::string& path) const;
};

struct TrainResult {
    MlpModel model;
    TrainLog log;
    double loss = 0.0;  // final MSE for pretrain, best prefix loss for finetune
};

// Divergence or collapse. Carries the last good model.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, MlpModel last_good, TrainLog log)
        : std::runtime_error(what), last_good(std::move(last_good)), log(std::move(log)) {}
    MlpModel last_good;
    TrainLog log;
};

// Sequence-local indices 1..n fed to the model.
std::vector<std::uint64_t> training_indices(std::size_t n);

// Reference points for indices 1..N (raw indices burn_in .. burn_in+N-1).
PointBuffer reference_targets(const TrainConfig& cfg);

// Fresh model for cfg with the encoding normalized by n_points.
MlpModel initial_model(const TrainConfig& cfg);

// Learning rate at `epoch` of a cosine decay from base to base*ratio over `epochs` steps.
double cosine_lr(double base, double ratio, std::size_t epoch, std::size_t epochs);

// Volume of the axis-aligned bounding box of the points.
double bounding_box_volume(const PointBuffer& points);
inline constexpr double kCollapseVolume = 1e-6;

// Mean squared regression error (1/N) sum ||f(i) - q_i||^2.
double pretrain_mse(const MlpModel& model, const PointBuffer& targets);

// Prefix loss of the model's points for cfg's kernel and prefix weights.
double model_prefix_loss(const MlpModel& model, const TrainConfig& cfg);

// Regression onto the reference; returns the final model.
TrainResult pretrain(const TrainConfig& cfg);
TrainResult pretrain(MlpModel model, const TrainConfig& cfg);

// Prefix-loss descent with cosine decay; returns the best checkpoint.
TrainResult finetune(MlpModel model, const TrainConfig& cfg);

// pretrain then finetune. Model metadata records the configuration.
TrainResult train_full(const TrainConfig& cfg);

}  // namespace neurolds
