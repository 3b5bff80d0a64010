#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "repspace/dumpfmt.hpp"
#include "repspace/head.hpp"

namespace repspace {

struct CalibrationBin {
    double lower = 0.0;  // bin covers (lower, upper]
    double upper = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;  // 0 for empty bins
    double accuracy = 0.0;
};

struct CalibrationReport {
    std::vector<CalibrationBin> bins;
    double ece = 0.0;
    /// sum_k (count_k / N) * (conf_k - acc_k); positive means overconfident.
    double signed_gap = 0.0;
    bool overconfident = false;
    std::size_t num_samples = 0;
};

/// Index of the (lower, upper] bin holding `confidence`, out of n_bins equal-width bins on (0, 1].
std::size_t confidence_bin(double confidence, std::size_t n_bins);

CalibrationReport calibration_report(std::span<const double> confidence,
                                     std::span<const std::uint8_t> correct, std::size_t n_bins = 15);
CalibrationReport ece(const FeatureDump& dump, std::size_t n_bins = 15);

enum class ScalingMode {
    temperature,  // softmax((W f + b) / T)
    feature,  // softmax(W (f / T) + b)
};

struct ScalingRange {
    double t_min = 0.05;
    double t_max = 10.0;
};

struct ScalingFit {
    ScalingMode mode = ScalingMode::temperature;
    double t = 1.0;
    double nll_before = 0.0;  // at T = 1
    double nll_after = 0.0;
    double accuracy_before = 0.0;
    double accuracy_after = 0.0;
    double ece_before = 0.0;
    double ece_after = 0.0;
    std::size_t changed_predictions = 0;
    /// (T, mean NLL) pairs from the coarse log-spaced scan preceding the
    /// golden-section refinement.
    std::vector<std::pair<double, double>> curve;
};

/// Precomputed W f per sample so both scaling modes share one pass over the data.
class ScaledLogits {
public:
    explicit ScaledLogits(const FeatureDump& dump);

    std::size_t num_samples() const noexcept { return labels_.size(); }
    std::vector<double> at(std::size_t i, ScalingMode mode, double t) const;
    double mean_nll(ScalingMode mode, double t) const;
    std::vector<double> confidences(ScalingMode mode, double t, std::vector<std::uint8_t>& correct,
                                    std::vector<std::size_t>& predicted) const;

private:
    Matrix<double> wf_;
    std::vector<double> bias_;
    std::vector<std::uint32_t> labels_;
};

ScalingFit fit_scaling(const FeatureDump& dump, ScalingMode mode, ScalingRange range = {},
                       std::size_t n_bins = 15);
ScalingFit fit_temperature(const FeatureDump& dump, ScalingRange range = {}, std::size_t n_bins = 15);
ScalingFit fit_feature_scale(const FeatureDump& dump, ScalingRange range = {}, std::size_t n_bins = 15);

/// Feature-scaled minus temperature-scaled logits, which equals ((T - 1) / T) * b.
/// Throws ErrorKind::invariant if the identity fails by more than 1e-9.
std::vector<double> scaling_discrepancy(const ClassifierHead& head, std::span<const double> f, double t);

}  // namespace repspace
