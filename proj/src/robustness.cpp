#include "repspace/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "repspace/geometry.hpp"
#include "repspace/parallel.hpp"

namespace repspace {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

Matrix<double> feature_sign_attack(const FeatureDump& dump, double epsilon) {
    require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorKind::usage,
            "feature attack epsilon must be finite and non-negative");
    const auto head = dump.head();
    Matrix<double> out(dump.num_samples(), dump.dim());
    parallel_for(dump.num_samples(), [&](std::size_t i) {
        const auto f = dump.feature(i);
        const auto target = SoftTarget::one_hot(dump.num_classes(), dump.labels[i]);
        const auto g = grad_wrt_feature(head, f, target);
        for (std::size_t j = 0; j < f.size(); ++j) out(i, j) = f[j] + epsilon * sign(g[j]);
    });
    return out;
}

FeatureDump with_feature_attack(const FeatureDump& dump, double epsilon) {
    FeatureDump out = dump;
    out.perturbed_features = feature_sign_attack(dump, epsilon).cast<float>();
    out.meta["attack"] = "feature_sign";
    out.meta["epsilon"] = format_double(epsilon);
    return out;
}

AttackBinReport attack_success_by_cosine_bin(const FeatureDump& dump, const ClassCenterSet& centers,
                                             std::size_t n_bins) {
    require(dump.perturbed_features.has_value(), ErrorKind::usage,
            "attack analysis requires perturbed features in the dump");
    require(centers.num_classes() == dump.num_classes() && centers.min_loss_point.cols() == dump.dim(),
            ErrorKind::usage, "attack analysis requires class centers matching the dump");
    require(n_bins >= 1, ErrorKind::usage, "need at least one cosine bin");
    const auto head = dump.head();
    const std::size_t n = dump.num_samples();

    std::vector<double> cos(n, 0.0);
    std::vector<std::uint8_t> clean_correct(n, 0), flipped(n, 0);
    parallel_for(n, [&](std::size_t i) {
        const auto f = dump.feature(i);
        const std::size_t y = dump.labels[i];
        if (argmax(logits(head, f)) != y) return;
        clean_correct[i] = 1;
        cos[i] = cosine(f, centers.min_loss_point.row(y));
        flipped[i] = argmax(logits(head, dump.perturbed(i))) != y ? 1 : 0;
    });

    AttackBinReport report;
    report.num_samples = n;
    auto attack = dump.meta.find("attack");
    report.attack = attack == dump.meta.end() ? "unknown" : attack->second;
    if (auto eps = dump.meta.find("epsilon"); eps != dump.meta.end()) {
        try {
            report.epsilon = std::stod(eps->second);
        } catch (const std::exception&) {
        }
    }

    double lo = 1.0, hi = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!clean_correct[i]) continue;
        lo = std::min(lo, cos[i]);
        hi = std::max(hi, cos[i]);
    }
    if (lo > hi) {  // no clean-correct samples
        lo = -1.0;
        hi = 1.0;
    } else if (hi - lo < 1e-12) {
        lo -= 1e-6;
        hi += 1e-6;
    }
    report.bin_edges.resize(n_bins + 1);
    for (std::size_t k = 0; k <= n_bins; ++k)
        report.bin_edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_bins);
    report.counts.assign(n_bins, 0);
    report.successes.assign(n_bins, 0);
    std::size_t total_success = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!clean_correct[i]) continue;
        auto k = static_cast<std::size_t>((cos[i] - lo) / (hi - lo) * static_cast<double>(n_bins));
        k = std::min(k, n_bins - 1);
        ++report.counts[k];
        report.successes[k] += flipped[i];
        total_success += flipped[i];
        ++report.clean_correct;
    }
    report.success_rate.resize(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k)
        if (report.counts[k] > 0)
            report.success_rate[k] =
                static_cast<double>(report.successes[k]) / static_cast<double>(report.counts[k]);
    report.overall_success_rate =
        report.clean_correct == 0 ? 0.0
                                  : static_cast<double>(total_success) / static_cast<double>(report.clean_correct);
    return report;
}

GradientField gradient_field(const ClassifierHead& head, const Region& region, int resolution,
                             std::size_t cls, double smoothing) {
    require(head.dim() == 2, ErrorKind::dimension,
            "gradient fields need a 2D representation space, got D = " + std::to_string(head.dim()));
    require(resolution >= 2, ErrorKind::usage, "gradient field resolution must be at least 2");
    region.validate();
    const auto target = SoftTarget::smoothed(head.num_classes(), cls, smoothing);

    GradientField field;
    field.region = region;
    field.resolution = resolution;
    field.cls = cls;
    field.smoothing = smoothing;
    const auto r = static_cast<std::size_t>(resolution);
    field.records.resize(r * r);
    parallel_for(r, [&](std::size_t j) {
        const double y = region.y_min + (region.y_max - region.y_min) * static_cast<double>(j) /
                                            static_cast<double>(r - 1);
        for (std::size_t i = 0; i < r; ++i) {
            const double x = region.x_min + (region.x_max - region.x_min) * static_cast<double>(i) /
                                                static_cast<double>(r - 1);
            const std::vector<double> f{x, y};
            const auto g = grad_wrt_feature(head, f, target);
            field.records[j * r + i] = {x, y, cross_entropy(logits(head, f), target), g[0], g[1]};
        }
    });
    return field;
}

}  // namespace repspace
