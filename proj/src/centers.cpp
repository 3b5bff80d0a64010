#include "repspace/centers.hpp"

#include <cmath>
#include <string>

#include "repspace/geometry.hpp"
#include "repspace/stats.hpp"

namespace repspace {

namespace {

double loss_at(const ClassifierHead& head, std::span<const double> v, const SoftTarget& target) {
    return cross_entropy(logits(head, v), target);
}

}  // namespace

CenterResult find_class_center(const ClassifierHead& head, std::size_t cls,
                               const CenterOptions& opts,
                               std::optional<std::span<const double>> start) {
    head.validate();
    require(cls < head.num_classes(), ErrorKind::usage, "class index out of range");
    require(opts.lr > 0.0 && opts.max_iters >= 0, ErrorKind::usage, "invalid optimizer options");
    const auto target = SoftTarget::smoothed(head.num_classes(), cls, opts.smoothing);

    CenterResult r;
    if (start) {
        require(start->size() == head.dim(), ErrorKind::dimension, "start point dimension mismatch");
        r.point.assign(start->begin(), start->end());
    } else {
        r.point = to_f64(head.weight.row(cls));
        const double n = norm(r.point);
        require(n > 0.0, ErrorKind::degenerate, "zero weight row for class " + std::to_string(cls));
        for (double& x : r.point) x /= n;
    }

    double loss = loss_at(head, r.point, target);
    r.start_loss = loss;
    std::vector<double> trial(r.point.size());
    double step = opts.lr;
    for (int it = 0; it < opts.max_iters; ++it) {
        if (loss < opts.loss_tol) {
            r.converged = true;
            break;
        }
        const auto g = grad_wrt_feature(head, r.point, target);
        if (norm(g) <= opts.grad_tol * (1.0 + norm(r.point))) {
            r.converged = true;
            break;
        }
        double next_loss = loss;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = r.point[j] - step * g[j];
            next_loss = loss_at(head, trial, target);
            if (std::isnan(next_loss))
                throw Error(ErrorKind::divergence, "class center search for class " +
                                                       std::to_string(cls) + " produced NaN at step " +
                                                       std::to_string(it));
            if (next_loss <= loss) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        r.iterations = it + 1;
        if (!accepted) break;  // no decrease at any representable step: stationary to precision
        r.point.swap(trial);
        loss = next_loss;
        step = std::min(opts.lr, step * 1.25);
    }
    r.final_loss = loss;
    if (!r.converged) {
        const auto g = grad_wrt_feature(head, r.point, target);
        r.converged = loss < opts.loss_tol || norm(g) <= opts.grad_tol * (1.0 + norm(r.point));
    }
    return r;
}

Matrix<double> correct_class_means(const FeatureDump& dump, std::vector<bool>& has_mean) {
    const auto head = dump.head();
    const std::size_t num_classes = dump.num_classes();
    Matrix<double> sums(num_classes, dump.dim(), 0.0);
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::size_t i = 0; i < dump.num_samples(); ++i) {
        const auto f = dump.feature(i);
        const std::size_t y = dump.labels[i];
        if (argmax(logits(head, f)) != y) continue;
        ++counts[y];
        for (std::size_t j = 0; j < f.size(); ++j) sums(y, j) += f[j];
    }
    has_mean.assign(num_classes, false);
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) continue;
        has_mean[c] = true;
        for (double& x : sums.row(c)) x /= static_cast<double>(counts[c]);
    }
    return sums;
}

ClassCenterSet compute_class_centers(const FeatureDump& dump, const CenterOptions& opts) {
    const auto head = dump.head();
    const std::size_t num_classes = dump.num_classes();
    const std::size_t d = dump.dim();

    ClassCenterSet set;
    set.smoothing = opts.smoothing;
    set.class_mean = correct_class_means(dump, set.has_class_mean);
    set.weight_vector = head.weight;
    set.min_loss_point = Matrix<double>(num_classes, d);
    set.final_loss.resize(num_classes);
    set.converged.resize(num_classes);
    set.iterations.resize(num_classes);

    for (std::size_t c = 0; c < num_classes; ++c) {
        const auto target = SoftTarget::smoothed(num_classes, c, opts.smoothing);
        auto w = to_f64(head.weight.row(c));
        const double wn = norm(w);
        require(wn > 0.0, ErrorKind::degenerate, "zero weight row for class " + std::to_string(c));
        const double scale = set.has_class_mean[c] ? norm(set.class_mean.row(c)) : 1.0;
        for (double& x : w) x *= scale / wn;

        std::vector<double> seed = w;
        if (set.has_class_mean[c]) {
            const auto mean = to_f64(set.class_mean.row(c));
            if (cross_entropy(logits(head, mean), target) <= cross_entropy(logits(head, w), target))
                seed = mean;
        }
        const auto r = find_class_center(head, c, opts, std::span<const double>(seed));
        for (std::size_t j = 0; j < d; ++j) set.min_loss_point(c, j) = r.point[j];
        set.final_loss[c] = r.final_loss;
        set.converged[c] = r.converged;
        set.iterations[c] = r.iterations;
    }
    return set;
}

CenterCorrelation compare_candidates(const FeatureDump& dump, const ClassCenterSet& centers) {
    const auto head = dump.head();
    require(centers.num_classes() == dump.num_classes() && centers.min_loss_point.cols() == dump.dim(),
            ErrorKind::dimension, "class centers do not match the dump's head");
    std::vector<double> confidence, cos_weight, cos_mean, cos_opt;
    for (std::size_t i = 0; i < dump.num_samples(); ++i) {
        const auto f = dump.feature(i);
        const auto pred = confidence_and_prediction(head, f);
        const std::size_t y = dump.labels[i];
        if (pred.label != y) continue;
        confidence.push_back(pred.confidence);
        cos_weight.push_back(cosine(f, centers.weight_vector.row(y)));
        cos_mean.push_back(cosine(f, centers.class_mean.row(y)));
        cos_opt.push_back(cosine(f, centers.min_loss_point.row(y)));
    }
    CenterCorrelation out;
    out.num_samples = confidence.size();
    out.weight_vector = pearson(confidence, cos_weight);
    out.class_mean = pearson(confidence, cos_mean);
    out.min_loss_point = pearson(confidence, cos_opt);
    return out;
}

}  // namespace repspace
