#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "repspace/centers.hpp"
#include "repspace/dumpfmt.hpp"
#include "repspace/head.hpp"
#include "repspace/region.hpp"

namespace repspace {

/// f' = f + epsilon * sign(d CE(W f + b, onehot(y)) / d f), with sign(0) = 0.
Matrix<double> feature_sign_attack(const FeatureDump& dump, double epsilon);

/// Copy of `dump` carrying the sign-attacked features (rounded to f32) as
/// perturbed_features, tagged in meta with attack=feature_sign and its epsilon.
FeatureDump with_feature_attack(const FeatureDump& dump, double epsilon);

struct AttackBinReport {
    std::vector<double> bin_edges;  // n_bins + 1 edges over observed cosine range
    std::vector<std::size_t> counts;  // clean-correct samples per bin
    std::vector<std::size_t> successes;
    std::vector<std::optional<double>> success_rate;  // empty for empty bins
    double overall_success_rate = 0.0;
    std::size_t clean_correct = 0;
    std::size_t num_samples = 0;
    std::optional<double> epsilon;
    std::string attack;  // "feature_sign", "input_fgsm", or "unknown"
};

/// Success = clean prediction equals the label and the perturbed prediction does not.
AttackBinReport attack_success_by_cosine_bin(const FeatureDump& dump, const ClassCenterSet& centers,
                                             std::size_t n_bins = 20);

struct GradientRecord {
    double x = 0.0;
    double y = 0.0;
    double loss = 0.0;
    double gx = 0.0;
    double gy = 0.0;
};

/// Lattice of resolution x resolution points, row-major with y as the slow index.
/// Point (i, j) sits at (x_min + w * i / (R - 1), y_min + h * j / (R - 1)).
struct GradientField {
    Region region;
    int resolution = 0;
    std::size_t cls = 0;
    double smoothing = 0.0;
    std::vector<GradientRecord> records;

    const GradientRecord& at(int i, int j) const {
        return records[static_cast<std::size_t>(j) * static_cast<std::size_t>(resolution) +
                       static_cast<std::size_t>(i)];
    }
};

GradientField gradient_field(const ClassifierHead& head, const Region& region, int resolution,
                             std::size_t cls, double smoothing);

}  // namespace repspace
