#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "repspace/dumpfmt.hpp"
#include "repspace/head.hpp"

namespace repspace {

struct CenterOptions {
    double smoothing = 0.001;  // label smoothing of the target used for the search
    int max_iters = 5000;
    double lr = 0.1;
    double loss_tol = 1e-6;
    /// Converged when |grad| <= grad_tol * (1 + |v|).
    double grad_tol = 1e-5;
};

struct CenterResult {
    std::vector<double> point;
    double final_loss = 0.0;
    double start_loss = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Gradient descent on the (smoothed) cross-entropy of `cls` over the
/// representation space. Steps that would increase the loss are retried
/// with half the step size, so the loss never increases.
CenterResult find_class_center(const ClassifierHead& head, std::size_t cls,
                               const CenterOptions& opts,
                               std::optional<std::span<const double>> start = std::nullopt);

/// Three candidate class centers per class plus the optimizer's bookkeeping.
struct ClassCenterSet {
    Matrix<double> min_loss_point;  // [C x D]
    Matrix<double> class_mean;  // [C x D], zero rows where has_class_mean is false
    Matrix<double> weight_vector;  // [C x D]
    std::vector<double> final_loss;
    std::vector<bool> converged;
    std::vector<bool> has_class_mean;
    std::vector<int> iterations;
    double smoothing = 0.001;

    std::size_t num_classes() const noexcept { return min_loss_point.rows(); }
};

/// The search starts from whichever of the class mean and the weight vector
/// (rescaled to the class-mean norm, or unit norm without a mean) has the
/// lower loss.
ClassCenterSet compute_class_centers(const FeatureDump& dump, const CenterOptions& opts = {});

/// Mean of correctly classified features per class.
Matrix<double> correct_class_means(const FeatureDump& dump, std::vector<bool>& has_mean);

/// Pearson r between per-sample confidence and cosine to each candidate of the
/// sample's true class, over correctly classified samples.
struct CenterCorrelation {
    double weight_vector = 0.0;
    double class_mean = 0.0;
    double min_loss_point = 0.0;
    std::size_t num_samples = 0;
};

CenterCorrelation compare_candidates(const FeatureDump& dump, const ClassCenterSet& centers);

}  // namespace repspace
