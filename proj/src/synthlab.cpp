#include "repspace/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "repspace/geometry.hpp"

namespace repspace::synth {

using nlohmann::json;

// ---------------------------------------------------------------------------
// data

void SynthDataSpec::validate() const {
    require(n_classes >= 2, ErrorKind::usage, "need at least two classes");
    require(samples_per_class >= 1, ErrorKind::usage, "need at least one sample per class");
    require(std >= 0.0 && std::isfinite(std), ErrorKind::usage, "within-class std must be >= 0");
    require(separation > 0.0, ErrorKind::usage, "class separation must be positive");
    if (placement == Placement::simplex)
        require(input_dim >= n_classes, ErrorKind::usage, "simplex placement needs input_dim >= n_classes");
    else
        require(input_dim >= 2, ErrorKind::usage, "circular placement needs input_dim >= 2");
}

Matrix<double> class_means(const SynthDataSpec& spec) {
    spec.validate();
    Matrix<double> means(spec.n_classes, spec.input_dim, 0.0);
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        if (spec.placement == Placement::simplex) {
            means(c, c) = spec.separation;
        } else {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                                 static_cast<double>(spec.n_classes);
            means(c, 0) = spec.separation * std::cos(angle);
            means(c, 1) = spec.separation * std::sin(angle);
        }
    }
    return means;
}

Dataset generate_data(const SynthDataSpec& spec) {
    const auto means = class_means(spec);
    Rng rng(spec.seed);
    Dataset data;
    data.n_classes = spec.n_classes;
    const std::size_t n = spec.n_classes * spec.samples_per_class;
    data.inputs = Matrix<double>(n, spec.input_dim);
    data.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % spec.n_classes;
        data.labels[i] = static_cast<std::uint32_t>(c);
        for (std::size_t j = 0; j < spec.input_dim; ++j)
            data.inputs(i, j) = means(c, j) + spec.std * rng.normal();
    }
    return data;
}

// ---------------------------------------------------------------------------
// model

void MlpSpec::validate() const {
    require(widths.size() >= 3, ErrorKind::usage, "MLP needs at least input, bottleneck and class widths");
    for (auto w : widths) require(w >= 1, ErrorKind::usage, "layer widths must be positive");
    require(bottleneck() >= 2, ErrorKind::usage, "bottleneck dimension must be at least 2");
    require(num_classes() >= 2, ErrorKind::usage, "need at least two classes");
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l)
        layers_.push_back({Matrix<double>(spec_.widths[l + 1], spec_.widths[l], 0.0),
                           std::vector<double>(spec_.widths[l + 1], 0.0)});
}

std::size_t Mlp::num_parameters() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
}

namespace {

// out = in * W^T + b
Matrix<double> affine(const Matrix<double>& in, const DenseLayer& layer) {
    const std::size_t rows = in.rows(), outs = layer.weight.rows(), ins = layer.weight.cols();
    require(in.cols() == ins, ErrorKind::dimension, "layer input width mismatch");
    Matrix<double> out(rows, outs);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = in.row(r).data();
        double* y = out.row(r).data();
        for (std::size_t o = 0; o < outs; ++o) {
            const double* w = layer.weight.row(o).data();
            double s = layer.bias[o];
            for (std::size_t k = 0; k < ins; ++k) s += w[k] * x[k];
            y[o] = s;
        }
    }
    return out;
}

void relu_inplace(Matrix<double>& m) {
    for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

// Layers 0 .. L-3 are hidden (rectified); L-2 is the linear bottleneck; L-1 the head.
bool is_hidden(std::size_t layer, std::size_t num_layers) { return layer + 2 < num_layers; }

struct Forward {
    std::vector<Matrix<double>> activations;  // activations[l] is the input to layer l
    Matrix<double> logits;
};

Forward forward(const std::vector<DenseLayer>& layers, const Matrix<double>& inputs,
                std::size_t stop_after = SIZE_MAX) {
    Forward fw;
    fw.activations.push_back(inputs);
    const std::size_t n = std::min(layers.size(), stop_after);
    for (std::size_t l = 0; l < n; ++l) {
        auto z = affine(fw.activations.back(), layers[l]);
        if (is_hidden(l, layers.size())) relu_inplace(z);
        if (l + 1 == n)
            fw.logits = std::move(z);
        else
            fw.activations.push_back(std::move(z));
    }
    return fw;
}

std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer>& layers) {
    std::vector<DenseLayer> out;
    for (const auto& l : layers)
        out.push_back({Matrix<double>(l.weight.rows(), l.weight.cols(), 0.0),
                       std::vector<double>(l.bias.size(), 0.0)});
    return out;
}

// Backpropagates d(loss)/d(output of layer `last`) through layers last..0.
void backward(const std::vector<DenseLayer>& layers, const Forward& fw, Matrix<double> delta,
              std::size_t last, std::vector<DenseLayer>& grad) {
    for (std::size_t l = last + 1; l-- > 0;) {
        const auto& a = fw.activations[l];
        auto& g = grad[l];
        const std::size_t rows = delta.rows(), outs = delta.cols(), ins = a.cols();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* d = delta.row(r).data();
            const double* x = a.row(r).data();
            for (std::size_t o = 0; o < outs; ++o) {
                if (d[o] == 0.0) continue;
                double* gw = g.weight.row(o).data();
                for (std::size_t k = 0; k < ins; ++k) gw[k] += d[o] * x[k];
                g.bias[o] += d[o];
            }
        }
        if (l == 0) break;
        Matrix<double> prev(rows, ins, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* d = delta.row(r).data();
            double* p = prev.row(r).data();
            for (std::size_t o = 0; o < outs; ++o) {
                if (d[o] == 0.0) continue;
                const double* w = layers[l].weight.row(o).data();
                for (std::size_t k = 0; k < ins; ++k) p[k] += d[o] * w[k];
            }
            // a is the rectified output of layer l-1 when that layer is hidden
            if (is_hidden(l - 1, layers.size())) {
                const double* x = a.row(r).data();
                for (std::size_t k = 0; k < ins; ++k)
                    if (x[k] <= 0.0) p[k] = 0.0;
            }
        }
        delta = std::move(prev);
    }
}

double squared_norm(const std::vector<DenseLayer>& layers) {
    double s = 0.0;
    for (const auto& l : layers) {
        for (double w : l.weight.values()) s += w * w;
        for (double b : l.bias) s += b * b;
    }
    return s;
}

}  // namespace

Matrix<double> Mlp::features(const Matrix<double>& inputs) const {
    return forward(layers_, inputs, layers_.size() - 1).logits;
}

Matrix<double> Mlp::logits(const Matrix<double>& inputs) const { return forward(layers_, inputs).logits; }

ClassifierHead Mlp::head() const { return {layers_.back().weight, layers_.back().bias}; }

std::vector<double> flatten(const std::vector<DenseLayer>& layers) {
    std::vector<double> flat;
    for (const auto& l : layers) {
        flat.insert(flat.end(), l.weight.values().begin(), l.weight.values().end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
}

void unflatten(std::span<const double> flat, std::vector<DenseLayer>& layers) {
    std::size_t k = 0;
    for (auto& l : layers) {
        for (double& w : l.weight.values()) w = flat[k++];
        for (double& b : l.bias) b = flat[k++];
    }
    require(k == flat.size(), ErrorKind::dimension, "flat parameter vector has the wrong length");
}

LossAndGradient loss_and_gradient(const Mlp& mlp, const Matrix<double>& inputs,
                                  const Matrix<double>& targets, double weight_decay) {
    const auto& layers = mlp.layers();
    const auto fw = forward(layers, inputs);
    const std::size_t rows = inputs.rows(), classes = fw.logits.cols();
    require(targets.rows() == rows && targets.cols() == classes, ErrorKind::dimension,
            "target matrix shape mismatch");

    LossAndGradient out;
    Matrix<double> delta(rows, classes);
    const double inv = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto z = fw.logits.row(r);
        const double lse = log_sum_exp(z);
        for (std::size_t c = 0; c < classes; ++c) {
            const double t = targets(r, c);
            if (t > 0.0) out.data_loss -= t * (z[c] - lse);
            delta(r, c) = (std::exp(z[c] - lse) - t) * inv;
        }
    }
    out.data_loss *= inv;
    out.loss = out.data_loss + 0.5 * weight_decay * squared_norm(layers);
    out.gradient = zeros_like(layers);
    backward(layers, fw, std::move(delta), layers.size() - 1, out.gradient);
    if (weight_decay != 0.0) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto gw = out.gradient[l].weight.values();
            const auto w = layers[l].weight.values();
            for (std::size_t k = 0; k < gw.size(); ++k) gw[k] += weight_decay * w[k];
            for (std::size_t k = 0; k < layers[l].bias.size(); ++k)
                out.gradient[l].bias[k] += weight_decay * layers[l].bias[k];
        }
    }
    return out;
}

double loss_only(const Mlp& mlp, const Matrix<double>& inputs, const Matrix<double>& targets,
                 double weight_decay) {
    const auto z = mlp.logits(inputs);
    double loss = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
        const double lse = log_sum_exp(z.row(r));
        for (std::size_t c = 0; c < z.cols(); ++c)
            if (targets(r, c) > 0.0) loss -= targets(r, c) * (z(r, c) - lse);
    }
    return loss / static_cast<double>(z.rows()) + 0.5 * weight_decay * squared_norm(mlp.layers());
}

// ---------------------------------------------------------------------------
// targets

void RegularizerConfig::validate() const {
    require(epsilon >= 0.0 && epsilon < 1.0, ErrorKind::usage, "label smoothing must lie in [0, 1)");
    require(alpha > 0.0, ErrorKind::usage, "mixing alpha must be positive");
}

Matrix<double> smoothed_targets(std::span<const std::uint32_t> labels, std::size_t n_classes,
                                double epsilon) {
    Matrix<double> t(labels.size(), n_classes);
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const auto s = SoftTarget::smoothed(n_classes, labels[r], epsilon);
        std::copy(s.probabilities().begin(), s.probabilities().end(), t.row(r).begin());
    }
    return t;
}

MixedBatch mixup_pair(std::span<const double> a, std::span<const double> b, std::uint32_t ya,
                      std::uint32_t yb, std::size_t n_classes, double lambda) {
    require(a.size() == b.size(), ErrorKind::dimension, "mixup pair widths differ");
    require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::usage, "mixing weight must lie in [0, 1]");
    MixedBatch m;
    m.lambda = lambda;
    m.inputs = Matrix<double>(1, a.size());
    for (std::size_t j = 0; j < a.size(); ++j) m.inputs(0, j) = lambda * a[j] + (1.0 - lambda) * b[j];
    m.targets = Matrix<double>(1, n_classes, 0.0);
    m.targets(0, ya) += lambda;
    m.targets(0, yb) += 1.0 - lambda;
    return m;
}

MixedBatch coordmix_pair(std::span<const double> a, std::span<const double> b, std::uint32_t ya,
                         std::uint32_t yb, std::size_t n_classes, const std::vector<bool>& keep_first) {
    require(a.size() == b.size() && keep_first.size() == a.size(), ErrorKind::dimension,
            "coordmix pair widths differ");
    MixedBatch m;
    m.inputs = Matrix<double>(1, a.size());
    std::size_t kept = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        m.inputs(0, j) = keep_first[j] ? a[j] : b[j];
        kept += keep_first[j] ? 1 : 0;
    }
    m.lambda = static_cast<double>(kept) / static_cast<double>(a.size());
    m.targets = Matrix<double>(1, n_classes, 0.0);
    m.targets(0, ya) += m.lambda;
    m.targets(0, yb) += 1.0 - m.lambda;
    return m;
}

MixedBatch make_targets(const Matrix<double>& inputs, std::span<const std::uint32_t> labels,
                        std::size_t n_classes, const RegularizerConfig& reg, Rng& rng) {
    reg.validate();
    const std::size_t rows = inputs.rows();
    require(labels.size() == rows, ErrorKind::dimension, "label count != batch rows");
    MixedBatch out;
    switch (reg.kind) {
        case RegularizerKind::none:
            out.inputs = inputs;
            out.targets = smoothed_targets(labels, n_classes, 0.0);
            return out;
        case RegularizerKind::label_smoothing:
            out.inputs = inputs;
            out.targets = smoothed_targets(labels, n_classes, reg.epsilon);
            return out;
        case RegularizerKind::mixup:
        case RegularizerKind::coordmix:
            break;
    }

    std::vector<std::size_t> partner(rows);
    for (std::size_t r = 0; r < rows; ++r) partner[r] = r;
    rng.shuffle(partner);
    out.lambda = rng.beta(reg.alpha, reg.alpha);
    out.inputs = Matrix<double>(rows, inputs.cols());
    out.targets = Matrix<double>(rows, n_classes, 0.0);

    std::vector<bool> keep(inputs.cols(), false);
    if (reg.kind == RegularizerKind::coordmix) {
        // one random mask per batch covering round(lambda * d) coordinates
        std::vector<std::size_t> order(inputs.cols());
        for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
        rng.shuffle(order);
        const auto kept = static_cast<std::size_t>(std::lround(out.lambda * static_cast<double>(order.size())));
        for (std::size_t j = 0; j < kept; ++j) keep[order[j]] = true;
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t q = partner[r];
        const auto pair = reg.kind == RegularizerKind::mixup
                              ? mixup_pair(inputs.row(r), inputs.row(q), labels[r], labels[q], n_classes, out.lambda)
                              : coordmix_pair(inputs.row(r), inputs.row(q), labels[r], labels[q], n_classes, keep);
        std::copy(pair.inputs.row(0).begin(), pair.inputs.row(0).end(), out.inputs.row(r).begin());
        std::copy(pair.targets.row(0).begin(), pair.targets.row(0).end(), out.targets.row(r).begin());
        if (reg.kind == RegularizerKind::coordmix) out.lambda = pair.lambda;
    }
    return out;
}

// ---------------------------------------------------------------------------
// initialization

ClassifierHead hand_crafted_far_head() {
    static constexpr double kWeight[2][10] = {
        {0.1318, 0.2245, 0.2630, 0.2881, 0.2947, 0.3189, 0.3195, 0.3323, 0.3482, 0.3619},
        {-0.0165, 0.0709, 0.1030, 0.1138, 0.1381, 0.1362, 0.1567, 0.1654, 0.1684, 0.1806},
    };
    static constexpr double kBias[10] = {15.705, 9.045, 5.644, 3.144, 0.834,
                                         -1.286, -3.442, -5.799, -8.489, -11.972};
    ClassifierHead head{Matrix<double>(10, 2), std::vector<double>(kBias, kBias + 10)};
    for (std::size_t c = 0; c < 10; ++c) {
        head.weight(c, 0) = kWeight[0][c];
        head.weight(c, 1) = kWeight[1][c];
    }
    return head;
}

namespace {

void default_init(Mlp& mlp, Rng& rng) {
    for (auto& layer : mlp.layers()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        for (double& w : layer.weight.values()) w = (2.0 * rng.uniform() - 1.0) * bound;
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
}

void pretrain_features_far(Mlp& mlp, const Dataset& train, const TrainConfig& cfg, Rng& rng) {
    auto& layers = mlp.layers();
    const std::size_t last = layers.size() - 2;  // bottleneck layer index
    std::vector<std::size_t> order(train.inputs.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t batch = std::max<std::size_t>(1, cfg.pretrain_batch_size);
    for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t rows = std::min(batch, order.size() - start);
        Matrix<double> x(rows, train.inputs.cols());
        for (std::size_t r = 0; r < rows; ++r) {
            const auto src = train.inputs.row(order[start + r]);
            std::copy(src.begin(), src.end(), x.row(r).begin());
        }
        const auto fw = forward(layers, x, last + 1);
        // loss = mean_r |f_r - v|^2
        Matrix<double> delta(rows, fw.logits.cols());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < delta.cols(); ++j)
                delta(r, j) = 2.0 * (fw.logits(r, j) - cfg.pretrain_target[j]) / static_cast<double>(rows);
        auto grad = zeros_like(layers);
        backward(layers, fw, std::move(delta), last, grad);
        for (std::size_t l = 0; l <= last; ++l) {
            auto w = layers[l].weight.values();
            const auto gw = grad[l].weight.values();
            for (std::size_t k = 0; k < w.size(); ++k) w[k] -= cfg.pretrain_lr * gw[k];
            for (std::size_t k = 0; k < layers[l].bias.size(); ++k)
                layers[l].bias[k] -= cfg.pretrain_lr * grad[l].bias[k];
        }
        for (double v : layers[last].bias)
            require(std::isfinite(v), ErrorKind::divergence, "features_far pretraining diverged");
    }
}

}  // namespace

Mlp init_model(const MlpSpec& spec, InitScheme scheme, const Dataset& train, const TrainConfig& cfg,
               Rng& rng) {
    Mlp mlp(spec);
    default_init(mlp, rng);
    const bool far_features = scheme == InitScheme::features_far || scheme == InitScheme::both_far;
    const bool far_head = scheme == InitScheme::head_far || scheme == InitScheme::both_far;
    if (far_features || far_head)
        require(spec.bottleneck() == 2, ErrorKind::usage,
                "far initialization schemes need a 2D bottleneck, got D = " + std::to_string(spec.bottleneck()));
    if (far_head) {
        require(spec.num_classes() == 10, ErrorKind::usage,
                "the hand-crafted far head is defined for exactly 10 classes");
        const auto head = hand_crafted_far_head();
        mlp.layers().back().weight = head.weight;
        mlp.layers().back().bias = head.bias;
    }
    if (far_features) pretrain_features_far(mlp, train, cfg, rng);
    return mlp;
}

// ---------------------------------------------------------------------------
// training

void TrainConfig::validate() const {
    require(epochs >= 0, ErrorKind::usage, "epochs must be non-negative");
    require(batch_size >= 1, ErrorKind::usage, "batch size must be positive");
    require(momentum >= 0.0 && momentum < 1.0, ErrorKind::usage, "momentum must lie in [0, 1)");
    require(weight_decay >= 0.0, ErrorKind::usage, "weight decay must be non-negative");
    require(peak_lr > 0.0, ErrorKind::usage, "peak learning rate must be positive");
    require(warmup_epochs >= 0, ErrorKind::usage, "warmup epochs must be non-negative");
    regularizer.validate();
    for (int e : snapshot_epochs)
        require(e >= 0 && e <= epochs, ErrorKind::usage, "snapshot epoch outside [0, epochs]");
}

double learning_rate(const TrainConfig& cfg, std::size_t step, std::size_t steps_per_epoch) {
    const std::size_t total = static_cast<std::size_t>(cfg.epochs) * steps_per_epoch;
    const std::size_t warm = std::min(total, static_cast<std::size_t>(cfg.warmup_epochs) * steps_per_epoch);
    if (step < warm) return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(warm);
    if (total <= warm) return cfg.peak_lr;
    const double progress = static_cast<double>(step - warm) / static_cast<double>(total - warm);
    return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

FeatureDump snapshot_dump(const Mlp& model, const Dataset& data) {
    auto dump = make_dump(model.features(data.inputs), data.labels, model.head());
    dump.logits = compute_logits(dump);
    return dump;
}

double accuracy(const Mlp& model, const Dataset& data) {
    const auto z = model.logits(data.inputs);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < z.rows(); ++r) hits += argmax(z.row(r)) == data.labels[r] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(z.rows());
}

TrainResult train(const Dataset& train_set, const Dataset* eval_set, const MlpSpec& mlp_spec,
                  const TrainConfig& cfg, const std::string& run_name) {
    cfg.validate();
    mlp_spec.validate();
    require(train_set.inputs.cols() == mlp_spec.input_dim(), ErrorKind::dimension,
            "dataset input width != MLP input width");
    require(train_set.n_classes == mlp_spec.num_classes(), ErrorKind::dimension,
            "dataset class count != MLP output width");

    Rng rng(cfg.seed);
    TrainResult result;
    result.model = init_model(mlp_spec, cfg.init_scheme, train_set, cfg, rng);
    auto& model = result.model;
    const Dataset& snap_data = eval_set ? *eval_set : train_set;

    auto take_snapshot = [&](int epoch) {
        if (std::find(cfg.snapshot_epochs.begin(), cfg.snapshot_epochs.end(), epoch) == cfg.snapshot_epochs.end())
            return;
        auto dump = snapshot_dump(model, snap_data);
        dump.meta = {{"run", run_name},
                     {"epoch", std::to_string(epoch)},
                     {"regularizer", to_string(cfg.regularizer.kind)},
                     {"init_scheme", to_string(cfg.init_scheme)},
                     {"seed", std::to_string(cfg.seed)},
                     {"split", eval_set ? "eval" : "train"},
                     {"model", "synthlab-mlp"}};
        result.snapshots.push_back({epoch, std::move(dump)});
    };
    take_snapshot(0);

    const std::size_t n = train_set.inputs.rows();
    const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    auto velocity = flatten(model.layers());
    std::fill(velocity.begin(), velocity.end(), 0.0);
    auto params = flatten(model.layers());
    std::size_t step = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        double lr = 0.0;
        for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
            const std::size_t start = b * cfg.batch_size;
            const std::size_t rows = std::min(cfg.batch_size, n - start);
            Matrix<double> x(rows, train_set.inputs.cols());
            std::vector<std::uint32_t> y(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                const auto src = train_set.inputs.row(order[start + r]);
                std::copy(src.begin(), src.end(), x.row(r).begin());
                y[r] = train_set.labels[order[start + r]];
            }
            const auto batch = make_targets(x, y, train_set.n_classes, cfg.regularizer, rng);
            const auto lg = loss_and_gradient(model, batch.inputs, batch.targets, cfg.weight_decay);
            if (!std::isfinite(lg.loss))
                throw Error(ErrorKind::divergence, "training loss is not finite at epoch " +
                                                       std::to_string(epoch) + ", batch " + std::to_string(b));
            loss_sum += lg.data_loss;
            lr = learning_rate(cfg, step, steps_per_epoch);
            const auto grad = flatten(lg.gradient);
            for (std::size_t k = 0; k < params.size(); ++k) {
                velocity[k] = cfg.momentum * velocity[k] + grad[k];
                params[k] -= lr * velocity[k];
            }
            unflatten(params, model.layers());
        }
        EpochLog log;
        log.epoch = epoch;
        log.loss = loss_sum / static_cast<double>(steps_per_epoch);
        log.learning_rate = lr;
        log.train_accuracy = accuracy(model, train_set);
        result.log.push_back(log);
        take_snapshot(epoch);
    }
    result.train_accuracy = accuracy(model, train_set);
    result.eval_accuracy = accuracy(model, snap_data);
    return result;
}

// ---------------------------------------------------------------------------
// configs

std::string to_string(RegularizerKind kind) {
    switch (kind) {
        case RegularizerKind::none: return "none";
        case RegularizerKind::label_smoothing: return "label_smoothing";
        case RegularizerKind::mixup: return "mixup";
        case RegularizerKind::coordmix: return "coordmix";
    }
    return "none";
}

std::string to_string(InitScheme scheme) {
    switch (scheme) {
        case InitScheme::default_init: return "default";
        case InitScheme::features_far: return "features_far";
        case InitScheme::head_far: return "head_far";
        case InitScheme::both_far: return "both_far";
    }
    return "default";
}

RegularizerKind parse_regularizer(const std::string& s) {
    for (auto k : {RegularizerKind::none, RegularizerKind::label_smoothing, RegularizerKind::mixup,
                   RegularizerKind::coordmix})
        if (to_string(k) == s) return k;
    throw Error(ErrorKind::usage, "unknown regularizer '" + s + "'");
}

InitScheme parse_init_scheme(const std::string& s) {
    for (auto k : {InitScheme::default_init, InitScheme::features_far, InitScheme::head_far,
                   InitScheme::both_far})
        if (to_string(k) == s) return k;
    throw Error(ErrorKind::usage, "unknown init scheme '" + s + "'");
}

RunConfig preset(RegularizerKind kind, InitScheme scheme, std::uint64_t seed,
                 std::optional<std::size_t> bottleneck) {
    const std::size_t d = bottleneck.value_or(scheme == InitScheme::default_init ? 8 : 2);
    RunConfig cfg;
    cfg.name = to_string(kind) + "_" + to_string(scheme) + "_d" + std::to_string(d) + "_s" + std::to_string(seed);
    cfg.data.seed = seed;
    cfg.mlp.widths = {16, 64, 32, d, 10};
    if (d == 2) {
        // ten classes on a ring unroll cleanly into a plane
        cfg.data.placement = Placement::circular;
        cfg.data.separation = 6.0;
    } else {
        cfg.data.separation = 4.0;
    }
    cfg.train.seed = seed;
    cfg.train.epochs = 60;
    cfg.train.warmup_epochs = 6;
    cfg.train.peak_lr = 0.05;
    cfg.train.weight_decay = 5e-4;
    cfg.train.regularizer.kind = kind;
    if (kind == RegularizerKind::mixup || kind == RegularizerKind::coordmix) cfg.train.regularizer.alpha = 1.0;
    cfg.train.init_scheme = scheme;
    cfg.train.snapshot_epochs = {0, 30, 60};
    return cfg;
}

json to_json(const RunConfig& cfg) {
    const auto& t = cfg.train;
    return {
        {"name", cfg.name},
        {"data",
         {{"n_classes", cfg.data.n_classes},
          {"input_dim", cfg.data.input_dim},
          {"samples_per_class", cfg.data.samples_per_class},
          {"eval_samples_per_class", cfg.eval_samples_per_class},
          {"placement", cfg.data.placement == Placement::simplex ? "simplex" : "circular"},
          {"separation", cfg.data.separation},
          {"std", cfg.data.std},
          {"seed", cfg.data.seed}}},
        {"mlp", {{"widths", cfg.mlp.widths}}},
        {"train",
         {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"momentum", t.momentum},
          {"weight_decay", t.weight_decay},
          {"peak_lr", t.peak_lr},
          {"warmup_epochs", t.warmup_epochs},
          {"regularizer",
           {{"kind", to_string(t.regularizer.kind)},
            {"epsilon", t.regularizer.epsilon},
            {"alpha", t.regularizer.alpha}}},
          {"init_scheme", to_string(t.init_scheme)},
          {"snapshot_epochs", t.snapshot_epochs},
          {"seed", t.seed},
          {"pretrain_lr", t.pretrain_lr},
          {"pretrain_batch_size", t.pretrain_batch_size},
          {"pretrain_target", t.pretrain_target}}},
    };
}

RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    try {
        cfg.name = j.value("name", cfg.name);
        if (j.contains("data")) {
            const auto& d = j.at("data");
            cfg.data.n_classes = d.value("n_classes", cfg.data.n_classes);
            cfg.data.input_dim = d.value("input_dim", cfg.data.input_dim);
            cfg.data.samples_per_class = d.value("samples_per_class", cfg.data.samples_per_class);
            cfg.eval_samples_per_class = d.value("eval_samples_per_class", cfg.eval_samples_per_class);
            const auto placement = d.value("placement", std::string("simplex"));
            require(placement == "simplex" || placement == "circular", ErrorKind::usage,
                    "placement must be 'simplex' or 'circular'");
            cfg.data.placement = placement == "simplex" ? Placement::simplex : Placement::circular;
            cfg.data.separation = d.value("separation", cfg.data.separation);
            cfg.data.std = d.value("std", cfg.data.std);
            cfg.data.seed = d.value("seed", cfg.data.seed);
        }
        if (j.contains("mlp")) cfg.mlp.widths = j.at("mlp").value("widths", cfg.mlp.widths);
        if (j.contains("train")) {
            const auto& t = j.at("train");
            auto& c = cfg.train;
            c.epochs = t.value("epochs", c.epochs);
            c.batch_size = t.value("batch_size", c.batch_size);
            c.momentum = t.value("momentum", c.momentum);
            c.weight_decay = t.value("weight_decay", c.weight_decay);
            c.peak_lr = t.value("peak_lr", c.peak_lr);
            c.warmup_epochs = t.value("warmup_epochs", c.warmup_epochs);
            if (t.contains("regularizer")) {
                const auto& r = t.at("regularizer");
                c.regularizer.kind = parse_regularizer(r.value("kind", std::string("none")));
                c.regularizer.epsilon = r.value("epsilon", c.regularizer.epsilon);
                c.regularizer.alpha = r.value("alpha", c.regularizer.alpha);
            }
            c.init_scheme = parse_init_scheme(t.value("init_scheme", std::string("default")));
            c.snapshot_epochs = t.value("snapshot_epochs", c.snapshot_epochs);
            c.seed = t.value("seed", c.seed);
            c.pretrain_lr = t.value("pretrain_lr", c.pretrain_lr);
            c.pretrain_batch_size = t.value("pretrain_batch_size", c.pretrain_batch_size);
            c.pretrain_target = t.value("pretrain_target", c.pretrain_target);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::usage, std::string("invalid run config: ") + e.what());
    }
    cfg.data.validate();
    cfg.mlp.validate();
    cfg.train.validate();
    return cfg;
}

TrainResult run(const RunConfig& cfg) {
    const auto train_set = generate_data(cfg.data);
    auto eval_spec = cfg.data;
    eval_spec.samples_per_class = cfg.eval_samples_per_class;
    eval_spec.seed = splitmix64(cfg.data.seed ^ 0xE7A1u);
    const auto eval_set = generate_data(eval_spec);
    return train(train_set, &eval_set, cfg.mlp, cfg.train, cfg.name);
}

}  // namespace repspace::synth
