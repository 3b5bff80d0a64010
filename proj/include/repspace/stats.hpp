#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "repspace/centers.hpp"
#include "repspace/dumpfmt.hpp"

namespace repspace {

/// sqrt(mean(v_j^2)); dimension-normalized magnitude.
double rms(std::span<const double> v);

/// Sample Pearson correlation. Throws ErrorKind::undefined for fewer than
/// three points or a zero-variance series, ErrorKind::dimension on length mismatch.
double pearson(std::span<const double> x, std::span<const double> y);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(std::span<const double> values);

struct FeatureStats {
    std::vector<double> rms;
    std::vector<double> cos_to_center;  // to the min-loss point of the true class
    std::vector<double> confidence;
    std::vector<std::size_t> predicted;
    std::vector<std::uint8_t> correct;
    MeanStd rms_summary;
    MeanStd cos_summary;
    std::size_t summary_count = 0;
    bool include_incorrect = false;
    double accuracy = 0.0;
};

FeatureStats feature_stats(const FeatureDump& dump, const ClassCenterSet& centers,
                           bool include_incorrect = false);

struct PerturbationStats {
    std::vector<double> feature_rms;
    std::vector<double> perturbation_rms;  // rms(f_perturbed - f_clean)
    double mean_feature_rms = 0.0;
    double mean_perturbation_rms = 0.0;
    /// Empty when the correlation is undefined (e.g. zero-variance series).
    std::optional<double> pearson_r;
};

PerturbationStats perturbation_stats(const FeatureDump& dump);

}  // namespace repspace
