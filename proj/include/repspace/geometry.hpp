#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "repspace/head.hpp"

namespace repspace {

/// Logits split into the magnitude, angle and bias terms:
/// logit_c = |w_c| * |f| * cos(theta_c) + b_c.
struct LogitDecomposition {
    std::vector<double> weight_norm;
    double feature_norm = 0.0;
    std::vector<double> cos_theta;
    std::vector<double> bias;

    std::vector<double> recompose() const;
};

/// A probability vector over classes. Entries are non-negative and sum to one.
class SoftTarget {
public:
    SoftTarget() = default;
    explicit SoftTarget(std::vector<double> probabilities);

    static SoftTarget one_hot(std::size_t num_classes, std::size_t label);
    /// (1 - epsilon) * onehot + epsilon / C
    static SoftTarget smoothed(std::size_t num_classes, std::size_t label, double epsilon);

    std::size_t size() const noexcept { return p_.size(); }
    double operator[](std::size_t c) const { return p_[c]; }
    std::span<const double> probabilities() const noexcept { return p_; }

private:
    std::vector<double> p_;
};

struct Prediction {
    double confidence = 0.0;
    std::size_t label = 0;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);
/// Cosine similarity; a zero-norm argument is a degenerate-input error.
double cosine(std::span<const double> a, std::span<const double> b);
/// First index of the maximum.
std::size_t argmax(std::span<const double> v);
double log_sum_exp(std::span<const double> z);

std::vector<double> logits(const ClassifierHead& head, std::span<const double> f);
/// W f with the bias left out.
std::vector<double> logits_without_bias(const ClassifierHead& head, std::span<const double> f);
LogitDecomposition decompose(const ClassifierHead& head, std::span<const double> f);

SoftTarget softmax(std::span<const double> z);
double cross_entropy(std::span<const double> z, const SoftTarget& target);
/// d/df of cross_entropy(W f + b, target) = W^T (softmax(W f + b) - target).
std::vector<double> grad_wrt_feature(const ClassifierHead& head, std::span<const double> f,
                                     const SoftTarget& target);

Prediction predict_from_logits(std::span<const double> z);
Prediction confidence_and_prediction(const ClassifierHead& head, std::span<const double> f);

}  // namespace repspace
