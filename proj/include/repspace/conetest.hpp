#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "repspace/dumpfmt.hpp"

namespace repspace {

/// Outcome of sweeping each correctly classified feature toward the origin.
struct ConeTestResult {
    int steps = 100;
    /// First step i in [1, steps) at which the prediction of f * (steps - i) / steps
    /// differs from the prediction at f; `steps` when no evaluated point differs.
    std::vector<int> indices;
    std::vector<std::size_t> sample_rows;  // dump row of each index
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    double accuracy = 0.0;
    std::size_t num_samples = 0;

    /// counts[i - 1] = number of samples with index i, for i in [1, steps].
    std::vector<std::size_t> histogram() const;
};

struct SummaryStats {
    double mean = 0.0;
    double std = 0.0;
    double max = 0.0;
};

/// Per-class dependence of correct predictions on the head bias.
struct BiasDependence {
    std::vector<std::size_t> n_c;  // samples with prediction == label == c
    std::vector<std::size_t> n_prime_c;  // of those, predictions that change without bias
    std::vector<std::optional<double>> ratio;  // empty when n_c == 0
    SummaryStats bias_abs;
    SummaryStats ratio_summary;  // over classes with a defined ratio
};

ConeTestResult cone_test(const FeatureDump& dump, int steps = 100);
BiasDependence bias_dependence(const FeatureDump& dump);

SummaryStats summarize(const std::vector<double>& values);

}  // namespace repspace
