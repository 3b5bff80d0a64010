#include "repspace/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "repspace/geometry.hpp"

namespace repspace {

std::size_t confidence_bin(double confidence, std::size_t n_bins) {
    const double k_real = std::ceil(confidence * static_cast<double>(n_bins)) - 1.0;
    auto k = static_cast<long>(std::clamp(k_real, 0.0, static_cast<double>(n_bins - 1)));
    auto edge = [n_bins](long j) { return static_cast<double>(j) / static_cast<double>(n_bins); };
    // repair rounding in confidence * n_bins against the reported edges
    while (k > 0 && confidence <= edge(k)) --k;
    while (k + 1 < static_cast<long>(n_bins) && confidence > edge(k + 1)) ++k;
    return static_cast<std::size_t>(k);
}

CalibrationReport calibration_report(std::span<const double> confidence,
                                     std::span<const std::uint8_t> correct, std::size_t n_bins) {
    require(n_bins >= 1, ErrorKind::usage, "need at least one calibration bin");
    require(confidence.size() == correct.size(), ErrorKind::dimension,
            "confidence and correctness series differ in length");
    require(!confidence.empty(), ErrorKind::invariant, "calibration of an empty set");

    CalibrationReport report;
    report.num_samples = confidence.size();
    report.bins.resize(n_bins);
    std::vector<double> conf_sum(n_bins, 0.0), hit_sum(n_bins, 0.0);
    for (std::size_t i = 0; i < confidence.size(); ++i) {
        const std::size_t k = confidence_bin(confidence[i], n_bins);
        ++report.bins[k].count;
        conf_sum[k] += confidence[i];
        hit_sum[k] += correct[i] ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(confidence.size());
    for (std::size_t k = 0; k < n_bins; ++k) {
        auto& bin = report.bins[k];
        bin.lower = static_cast<double>(k) / static_cast<double>(n_bins);
        bin.upper = static_cast<double>(k + 1) / static_cast<double>(n_bins);
        if (bin.count == 0) continue;
        const double count = static_cast<double>(bin.count);
        bin.mean_confidence = conf_sum[k] / count;
        bin.accuracy = hit_sum[k] / count;
        report.ece += (count / n) * std::abs(bin.accuracy - bin.mean_confidence);
        report.signed_gap += (count / n) * (bin.mean_confidence - bin.accuracy);
    }
    report.overconfident = report.signed_gap > 0.0;
    return report;
}

CalibrationReport ece(const FeatureDump& dump, std::size_t n_bins) {
    require(dump.num_samples() >= 1, ErrorKind::invariant, "ece on an empty dump");
    ScaledLogits scaled(dump);
    std::vector<std::uint8_t> correct;
    std::vector<std::size_t> predicted;
    const auto conf = scaled.confidences(ScalingMode::temperature, 1.0, correct, predicted);
    return calibration_report(conf, correct, n_bins);
}

ScaledLogits::ScaledLogits(const FeatureDump& dump)
    : wf_(dump.num_samples(), dump.num_classes()),
      bias_(dump.bias.begin(), dump.bias.end()),
      labels_(dump.labels) {
    const auto head = dump.head();
    for (std::size_t i = 0; i < dump.num_samples(); ++i) {
        const auto z = logits_without_bias(head, dump.feature(i));
        std::copy(z.begin(), z.end(), wf_.row(i).begin());
    }
}

std::vector<double> ScaledLogits::at(std::size_t i, ScalingMode mode, double t) const {
    const auto wf = wf_.row(i);
    std::vector<double> z(wf.size());
    // with b = 0 both branches produce bit-identical values
    for (std::size_t c = 0; c < z.size(); ++c)
        z[c] = mode == ScalingMode::temperature ? (wf[c] + bias_[c]) / t : wf[c] / t + bias_[c];
    return z;
}

double ScaledLogits::mean_nll(ScalingMode mode, double t) const {
    double total = 0.0;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const auto z = at(i, mode, t);
        total += log_sum_exp(z) - z[labels_[i]];
    }
    return total / static_cast<double>(labels_.size());
}

std::vector<double> ScaledLogits::confidences(ScalingMode mode, double t,
                                              std::vector<std::uint8_t>& correct,
                                              std::vector<std::size_t>& predicted) const {
    std::vector<double> conf(labels_.size());
    correct.resize(labels_.size());
    predicted.resize(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const auto p = predict_from_logits(at(i, mode, t));
        conf[i] = p.confidence;
        predicted[i] = p.label;
        correct[i] = p.label == labels_[i] ? 1 : 0;
    }
    return conf;
}

ScalingFit fit_scaling(const FeatureDump& dump, ScalingMode mode, ScalingRange range, std::size_t n_bins) {
    require(range.t_min > 0.0 && range.t_max > range.t_min, ErrorKind::usage, "invalid T range");
    ScaledLogits scaled(dump);
    auto objective = [&](double log_t) { return scaled.mean_nll(mode, std::exp(log_t)); };

    ScalingFit fit;
    fit.mode = mode;
    const double lo = std::log(range.t_min);
    const double hi = std::log(range.t_max);

    // Coarse scan brackets the minimum; golden-section refines inside the bracket.
    constexpr int kScan = 41;
    std::vector<double> grid(kScan), values(kScan);
    int best = 0;
    for (int k = 0; k < kScan; ++k) {
        grid[k] = lo + (hi - lo) * k / (kScan - 1);
        values[k] = objective(grid[k]);
        fit.curve.emplace_back(std::exp(grid[k]), values[k]);
        if (values[k] < values[best]) best = k;
    }
    double a = grid[std::max(0, best - 1)];
    double b = grid[std::min(kScan - 1, best + 1)];
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = objective(c), fd = objective(d);
    while (b - a > 1e-4) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    double log_t = 0.5 * (a + b);
    double nll = objective(log_t);

    fit.nll_before = scaled.mean_nll(mode, 1.0);
    if (fit.nll_before < nll && range.t_min <= 1.0 && 1.0 <= range.t_max) {
        log_t = 0.0;
        nll = fit.nll_before;
    }
    fit.t = std::exp(log_t);
    fit.nll_after = nll;

    std::vector<std::uint8_t> correct_before, correct_after;
    std::vector<std::size_t> pred_before, pred_after;
    const auto conf_before = scaled.confidences(mode, 1.0, correct_before, pred_before);
    const auto conf_after = scaled.confidences(mode, fit.t, correct_after, pred_after);
    const double n = static_cast<double>(scaled.num_samples());
    fit.accuracy_before = std::count(correct_before.begin(), correct_before.end(), 1) / n;
    fit.accuracy_after = std::count(correct_after.begin(), correct_after.end(), 1) / n;
    for (std::size_t i = 0; i < pred_before.size(); ++i)
        fit.changed_predictions += pred_before[i] != pred_after[i] ? 1 : 0;
    fit.ece_before = calibration_report(conf_before, correct_before, n_bins).ece;
    fit.ece_after = calibration_report(conf_after, correct_after, n_bins).ece;
    return fit;
}

ScalingFit fit_temperature(const FeatureDump& dump, ScalingRange range, std::size_t n_bins) {
    return fit_scaling(dump, ScalingMode::temperature, range, n_bins);
}

ScalingFit fit_feature_scale(const FeatureDump& dump, ScalingRange range, std::size_t n_bins) {
    return fit_scaling(dump, ScalingMode::feature, range, n_bins);
}

std::vector<double> scaling_discrepancy(const ClassifierHead& head, std::span<const double> f, double t) {
    require(t > 0.0, ErrorKind::usage, "scaling factor T must be positive");
    const auto wf = logits_without_bias(head, f);
    std::vector<double> out(wf.size());
    for (std::size_t c = 0; c < wf.size(); ++c) {
        const double temperature_scaled = (wf[c] + head.bias[c]) / t;
        const double feature_scaled = wf[c] / t + head.bias[c];
        out[c] = feature_scaled - temperature_scaled;
        const double expected = (t - 1.0) / t * head.bias[c];
        require(std::abs(out[c] - expected) <= 1e-9, ErrorKind::invariant,
                "feature/temperature scaling discrepancy deviates from (T-1)/T * b");
    }
    return out;
}

}  // namespace repspace
