#include "repspace/stats.hpp"

#include <algorithm>
#include <cmath>

#include "repspace/geometry.hpp"
#include "repspace/parallel.hpp"

namespace repspace {

double rms(std::span<const double> v) {
    require(!v.empty(), ErrorKind::dimension, "rms of an empty vector");
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(v.size()));
}

double pearson(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), ErrorKind::dimension, "pearson: series lengths differ");
    require(x.size() >= 3, ErrorKind::undefined, "pearson needs at least 3 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    require(sxx > 0.0 && syy > 0.0, ErrorKind::undefined, "pearson: zero-variance series");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

MeanStd mean_std(std::span<const double> values) {
    MeanStd out;
    if (values.empty()) return out;
    double s = 0.0;
    for (double v : values) s += v;
    out.mean = s / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size()));
    return out;
}

FeatureStats feature_stats(const FeatureDump& dump, const ClassCenterSet& centers,
                           bool include_incorrect) {
    require(centers.num_classes() == dump.num_classes() && centers.min_loss_point.cols() == dump.dim(),
            ErrorKind::dimension, "class centers do not match the dump's head");
    const auto head = dump.head();
    const std::size_t n = dump.num_samples();
    FeatureStats s;
    s.include_incorrect = include_incorrect;
    s.rms.resize(n);
    s.cos_to_center.resize(n);
    s.confidence.resize(n);
    s.predicted.resize(n);
    s.correct.resize(n);
    parallel_for(n, [&](std::size_t i) {
        const auto f = dump.feature(i);
        const auto pred = confidence_and_prediction(head, f);
        s.rms[i] = rms(f);
        s.cos_to_center[i] = cosine(f, centers.min_loss_point.row(dump.labels[i]));
        s.confidence[i] = pred.confidence;
        s.predicted[i] = pred.label;
        s.correct[i] = pred.label == dump.labels[i] ? 1 : 0;
    });

    std::vector<double> r, c;
    std::size_t n_correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        n_correct += s.correct[i];
        if (!include_incorrect && !s.correct[i]) continue;
        r.push_back(s.rms[i]);
        c.push_back(s.cos_to_center[i]);
    }
    s.accuracy = static_cast<double>(n_correct) / static_cast<double>(n);
    s.summary_count = r.size();
    s.rms_summary = mean_std(r);
    s.cos_summary = mean_std(c);
    return s;
}

PerturbationStats perturbation_stats(const FeatureDump& dump) {
    require(dump.perturbed_features.has_value(), ErrorKind::usage,
            "perturbation_stats requires perturbed features in the dump");
    const std::size_t n = dump.num_samples();
    PerturbationStats s;
    s.feature_rms.resize(n);
    s.perturbation_rms.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = dump.feature(i);
        auto delta = dump.perturbed(i);
        for (std::size_t j = 0; j < f.size(); ++j) delta[j] -= f[j];
        s.feature_rms[i] = rms(f);
        s.perturbation_rms[i] = rms(delta);
    }
    s.mean_feature_rms = mean_std(s.feature_rms).mean;
    s.mean_perturbation_rms = mean_std(s.perturbation_rms).mean;
    try {
        s.pearson_r = pearson(s.feature_rms, s.perturbation_rms);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::undefined) throw;
    }
    return s;
}

}  // namespace repspace
