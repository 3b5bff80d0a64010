#include "repspace/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace repspace {

void ClassifierHead::validate() const {
    require(weight.rows() >= 1 && weight.cols() >= 1, ErrorKind::dimension,
            "classifier head has an empty weight matrix");
    require(bias.size() == weight.rows(), ErrorKind::dimension,
            "head bias length " + std::to_string(bias.size()) + " != class count " +
                std::to_string(weight.rows()));
    for (double w : weight.values())
        require(std::isfinite(w), ErrorKind::invariant, "head weight contains NaN/Inf");
    for (double b : bias) require(std::isfinite(b), ErrorKind::invariant, "head bias contains NaN/Inf");
}

ClassifierHead ClassifierHead::without_bias() const {
    return {weight, std::vector<double>(bias.size(), 0.0)};
}

std::vector<double> LogitDecomposition::recompose() const {
    std::vector<double> out(weight_norm.size());
    for (std::size_t c = 0; c < out.size(); ++c)
        out[c] = weight_norm[c] * feature_norm * cos_theta[c] + bias[c];
    return out;
}

SoftTarget::SoftTarget(std::vector<double> probabilities) : p_(std::move(probabilities)) {
    require(!p_.empty(), ErrorKind::invariant, "soft target is empty");
    double sum = 0.0;
    for (double p : p_) {
        require(std::isfinite(p) && p >= 0.0, ErrorKind::invariant,
                "soft target entries must be finite and non-negative");
        sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::invariant,
            "soft target sums to " + std::to_string(sum) + ", not 1");
}

SoftTarget SoftTarget::one_hot(std::size_t num_classes, std::size_t label) {
    return smoothed(num_classes, label, 0.0);
}

SoftTarget SoftTarget::smoothed(std::size_t num_classes, std::size_t label, double epsilon) {
    require(label < num_classes, ErrorKind::usage, "label out of range");
    require(epsilon >= 0.0 && epsilon < 1.0, ErrorKind::usage, "smoothing must lie in [0, 1)");
    const double off = epsilon / static_cast<double>(num_classes);
    std::vector<double> p(num_classes, off);
    p[label] = 1.0 - epsilon + off;
    return SoftTarget(std::move(p));
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorKind::dimension, "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    require(na > 0.0 && nb > 0.0, ErrorKind::degenerate, "cosine of a zero-norm vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

double log_sum_exp(std::span<const double> z) {
    const double m = z[argmax(z)];
    double s = 0.0;
    for (double x : z) s += std::exp(x - m);
    return m + std::log(s);
}

std::vector<double> logits_without_bias(const ClassifierHead& head, std::span<const double> f) {
    require(f.size() == head.dim(), ErrorKind::dimension,
            "feature length " + std::to_string(f.size()) + " != head dim " +
                std::to_string(head.dim()));
    std::vector<double> out(head.num_classes());
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = dot(head.weight.row(c), f);
    return out;
}

std::vector<double> logits(const ClassifierHead& head, std::span<const double> f) {
    auto out = logits_without_bias(head, f);
    require(head.bias.size() == out.size(), ErrorKind::dimension, "head bias length mismatch");
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += head.bias[c];
    return out;
}

LogitDecomposition decompose(const ClassifierHead& head, std::span<const double> f) {
    require(f.size() == head.dim(), ErrorKind::dimension, "decompose: dimension mismatch");
    LogitDecomposition d;
    d.feature_norm = norm(f);
    require(d.feature_norm > 0.0, ErrorKind::degenerate, "decompose: zero-norm feature");
    const std::size_t num_classes = head.num_classes();
    d.weight_norm.resize(num_classes);
    d.cos_theta.resize(num_classes);
    d.bias = head.bias;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const auto w = head.weight.row(c);
        d.weight_norm[c] = norm(w);
        require(d.weight_norm[c] > 0.0, ErrorKind::degenerate,
                "decompose: zero-norm weight row for class " + std::to_string(c));
        // not clamped: clamping would break exact recomposition by ~1 ulp
        d.cos_theta[c] = dot(w, f) / (d.weight_norm[c] * d.feature_norm);
    }
    return d;
}

SoftTarget softmax(std::span<const double> z) {
    require(!z.empty(), ErrorKind::dimension, "softmax of an empty vector");
    for (double x : z) require(!std::isnan(x), ErrorKind::invariant, "softmax input contains NaN");
    const double m = z[argmax(z)];
    std::vector<double> p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        s += p[i];
    }
    for (double& x : p) x /= s;
    return SoftTarget(std::move(p));
}

double cross_entropy(std::span<const double> z, const SoftTarget& target) {
    require(z.size() == target.size(), ErrorKind::dimension, "cross_entropy: size mismatch");
    const double lse = log_sum_exp(z);
    double loss = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c)
        if (target[c] > 0.0) loss -= target[c] * (z[c] - lse);
    return loss;
}

std::vector<double> grad_wrt_feature(const ClassifierHead& head, std::span<const double> f,
                                     const SoftTarget& target) {
    require(target.size() == head.num_classes(), ErrorKind::dimension,
            "grad_wrt_feature: target size mismatch");
    const auto z = logits(head, f);
    const auto p = softmax(z);
    std::vector<double> g(head.dim(), 0.0);
    for (std::size_t c = 0; c < head.num_classes(); ++c) {
        const double delta = p[c] - target[c];
        const auto w = head.weight.row(c);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += delta * w[j];
    }
    return g;
}

Prediction predict_from_logits(std::span<const double> z) {
    const auto p = softmax(z);
    const std::size_t k = argmax(z);
    return {p[k], k};
}

Prediction confidence_and_prediction(const ClassifierHead& head, std::span<const double> f) {
    return predict_from_logits(logits(head, f));
}

}  // namespace repspace
