#pragma once

// Desk-scale trainer: small rectifier MLPs with a low-dimensional linear
// bottleneck, trained with SGD + momentum under optional soft-label
// regularizers, emitting RSDUMP01 snapshots of the bottleneck features.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "repspace/dumpfmt.hpp"
#include "repspace/head.hpp"
#include "repspace/matrix.hpp"
#include "repspace/rng.hpp"

namespace repspace::synth {

enum class Placement { simplex, circular };

struct SynthDataSpec {
    std::size_t n_classes = 10;
    std::size_t input_dim = 16;
    std::size_t samples_per_class = 200;
    Placement placement = Placement::simplex;
    double separation = 3.0;  // distance of each class mean from the origin
    double std = 1.0;  // within-class isotropic standard deviation
    std::uint64_t seed = 1;

    void validate() const;
};

struct Dataset {
    Matrix<double> inputs;  // [N x input_dim]
    std::vector<std::uint32_t> labels;
    std::size_t n_classes = 0;
};

/// Gaussian blobs; rows are interleaved by class (row i has label i % C).
Dataset generate_data(const SynthDataSpec& spec);
Matrix<double> class_means(const SynthDataSpec& spec);

struct MlpSpec {
    /// [input_dim, hidden..., bottleneck D, C]; rectifiers follow hidden layers only.
    std::vector<std::size_t> widths{16, 64, 32, 2, 10};

    void validate() const;
    std::size_t input_dim() const { return widths.front(); }
    std::size_t bottleneck() const { return widths[widths.size() - 2]; }
    std::size_t num_classes() const { return widths.back(); }

    bool operator==(const MlpSpec&) const = default;
};

struct DenseLayer {
    Matrix<double> weight;  // [out x in]
    std::vector<double> bias;

    bool operator==(const DenseLayer&) const = default;
};

class Mlp {
public:
    Mlp() = default;
    explicit Mlp(MlpSpec spec);

    const MlpSpec& spec() const noexcept { return spec_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::size_t num_parameters() const;

    /// Bottleneck (representation) outputs for a batch of inputs.
    Matrix<double> features(const Matrix<double>& inputs) const;
    Matrix<double> logits(const Matrix<double>& inputs) const;
    ClassifierHead head() const;

    bool operator==(const Mlp&) const = default;

private:
    MlpSpec spec_;
    std::vector<DenseLayer> layers_;
};

/// Flat parameter access in layer order (weights then bias per layer).
std::vector<double> flatten(const std::vector<DenseLayer>& layers);
void unflatten(std::span<const double> flat, std::vector<DenseLayer>& layers);

/// Mean soft-target cross-entropy over the batch plus (weight_decay / 2) * |theta|^2.
struct LossAndGradient {
    double loss = 0.0;  // including the weight-decay term
    double data_loss = 0.0;
    std::vector<DenseLayer> gradient;
};

LossAndGradient loss_and_gradient(const Mlp& mlp, const Matrix<double>& inputs,
                                  const Matrix<double>& targets, double weight_decay);
double loss_only(const Mlp& mlp, const Matrix<double>& inputs, const Matrix<double>& targets,
                 double weight_decay);

enum class RegularizerKind { none, label_smoothing, mixup, coordmix };

struct RegularizerConfig {
    RegularizerKind kind = RegularizerKind::none;
    double epsilon = 0.1;  // label smoothing
    double alpha = 0.2;  // Beta(alpha, alpha) for mixup / coordmix

    void validate() const;
};

enum class InitScheme { default_init, features_far, head_far, both_far };

struct TrainConfig {
    int epochs = 100;
    std::size_t batch_size = 64;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double peak_lr = 0.01;
    int warmup_epochs = 10;
    RegularizerConfig regularizer;
    InitScheme init_scheme = InitScheme::default_init;
    std::vector<int> snapshot_epochs;
    std::uint64_t seed = 1;
    // features_far pretraining
    double pretrain_lr = 0.0005;
    std::size_t pretrain_batch_size = 16;
    std::array<double, 2> pretrain_target{80.0, 80.0};

    void validate() const;
};

/// Linear warmup from 0 to peak over warmup steps, then cosine annealing to 0.
double learning_rate(const TrainConfig& cfg, std::size_t step, std::size_t steps_per_epoch);

struct MixedBatch {
    Matrix<double> inputs;
    Matrix<double> targets;  // rows are soft targets
    double lambda = 1.0;
};

Matrix<double> smoothed_targets(std::span<const std::uint32_t> labels, std::size_t n_classes,
                                double epsilon);
/// lambda * (a, onehot(ya)) + (1 - lambda) * (b, onehot(yb)).
MixedBatch mixup_pair(std::span<const double> a, std::span<const double> b, std::uint32_t ya,
                      std::uint32_t yb, std::size_t n_classes, double lambda);
/// Coordinates where keep_first is true come from a, the rest from b; the
/// label weight of a is the kept fraction.
MixedBatch coordmix_pair(std::span<const double> a, std::span<const double> b, std::uint32_t ya,
                         std::uint32_t yb, std::size_t n_classes, const std::vector<bool>& keep_first);
/// Inputs and soft targets for one batch under the configured regularizer.
/// Mixing pairs row r with row perm[r] of a random permutation, one lambda per batch.
MixedBatch make_targets(const Matrix<double>& inputs, std::span<const std::uint32_t> labels,
                        std::size_t n_classes, const RegularizerConfig& reg, Rng& rng);

/// The hand-crafted 10-class 2D head whose decision regions are split far from the origin.
ClassifierHead hand_crafted_far_head();

/// Fan-in uniform weights and zero biases, then the scheme-specific adjustments.
/// features_far pretrains the extractor for one epoch towards pretrain_target.
Mlp init_model(const MlpSpec& spec, InitScheme scheme, const Dataset& train, const TrainConfig& cfg,
               Rng& rng);

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;  // mean data loss over the epoch's batches
    double train_accuracy = 0.0;
    double learning_rate = 0.0;  // at the epoch's last step
};

struct Snapshot {
    int epoch = 0;
    FeatureDump dump;
};

struct TrainResult {
    Mlp model;
    std::vector<Snapshot> snapshots;
    std::vector<EpochLog> log;
    double train_accuracy = 0.0;
    double eval_accuracy = 0.0;
};

/// Snapshots hold the eval set's bottleneck features (or the training set's
/// when no eval set is given) at each listed epoch; epoch 0 is the initialized model.
TrainResult train(const Dataset& train_set, const Dataset* eval_set, const MlpSpec& mlp,
                  const TrainConfig& cfg, const std::string& run_name = "run");

FeatureDump snapshot_dump(const Mlp& model, const Dataset& data);
double accuracy(const Mlp& model, const Dataset& data);

/// Everything needed to reproduce one synthetic run.
struct RunConfig {
    std::string name = "run";
    SynthDataSpec data;
    std::size_t eval_samples_per_class = 100;
    MlpSpec mlp;
    TrainConfig train;
};

/// Desk-scale preset: 10 classes, 60 epochs with a 6-epoch warmup, peak lr 0.05,
/// weight decay 5e-4. The bottleneck defaults to 8 for the default init and 2
/// for the far schemes; 2D presets place the class means on a circle.
RunConfig preset(RegularizerKind kind, InitScheme scheme, std::uint64_t seed,
                 std::optional<std::size_t> bottleneck = std::nullopt);

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

std::string to_string(RegularizerKind kind);
std::string to_string(InitScheme scheme);
RegularizerKind parse_regularizer(const std::string& s);
InitScheme parse_init_scheme(const std::string& s);

/// Runs a config end to end: eval set seeded separately, training, snapshots.
TrainResult run(const RunConfig& cfg);

}  // namespace repspace::synth
