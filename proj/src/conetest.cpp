#include "repspace/conetest.hpp"

#include <algorithm>
#include <cmath>

#include "repspace/geometry.hpp"
#include "repspace/parallel.hpp"

namespace repspace {

std::vector<std::size_t> ConeTestResult::histogram() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(steps), 0);
    for (int idx : indices) ++counts[static_cast<std::size_t>(idx - 1)];
    return counts;
}

SummaryStats summarize(const std::vector<double>& values) {
    SummaryStats s;
    if (values.empty()) return s;
    double sum = 0.0;
    s.max = values.front();
    for (double v : values) {
        sum += v;
        s.max = std::max(s.max, v);
    }
    s.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size()));
    return s;
}

ConeTestResult cone_test(const FeatureDump& dump, int steps) {
    require(steps >= 2, ErrorKind::usage, "cone_test needs at least 2 steps");
    require(dump.num_samples() >= 1, ErrorKind::invariant, "cone_test on an empty dump");
    const auto head = dump.head();
    const std::size_t n = dump.num_samples();

    // -1 marks misclassified samples, which do not contribute
    std::vector<int> per_sample(n, -1);
    parallel_for(n, [&](std::size_t i) {
        const auto f = dump.feature(i);
        const std::size_t start = argmax(logits(head, f));
        if (start != dump.labels[i]) return;
        std::vector<double> moved(f.size());
        int index = steps;
        for (int step = 1; step < steps; ++step) {
            const double scale = static_cast<double>(steps - step) / static_cast<double>(steps);
            for (std::size_t j = 0; j < f.size(); ++j) moved[j] = f[j] * scale;
            if (argmax(logits(head, moved)) != start) {
                index = step;
                break;
            }
        }
        per_sample[i] = index;
    });

    ConeTestResult result;
    result.steps = steps;
    result.num_samples = n;
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) {
        if (per_sample[i] < 0) continue;
        result.indices.push_back(per_sample[i]);
        result.sample_rows.push_back(i);
        values.push_back(per_sample[i]);
    }
    result.accuracy = static_cast<double>(result.indices.size()) / static_cast<double>(n);
    const auto s = summarize(values);
    result.mean = s.mean;
    result.std = s.std;
    return result;
}

BiasDependence bias_dependence(const FeatureDump& dump) {
    const auto head = dump.head();
    const std::size_t num_classes = dump.num_classes();
    BiasDependence out;
    out.n_c.assign(num_classes, 0);
    out.n_prime_c.assign(num_classes, 0);

    for (std::size_t i = 0; i < dump.num_samples(); ++i) {
        const auto f = dump.feature(i);
        const auto plain = logits_without_bias(head, f);
        auto biased = plain;
        for (std::size_t c = 0; c < num_classes; ++c) biased[c] += head.bias[c];
        const std::size_t predicted = argmax(biased);
        if (predicted != dump.labels[i]) continue;
        ++out.n_c[predicted];
        if (argmax(plain) != predicted) ++out.n_prime_c[predicted];
    }

    std::vector<double> defined;
    out.ratio.resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (out.n_c[c] == 0) continue;
        const double r = static_cast<double>(out.n_prime_c[c]) / static_cast<double>(out.n_c[c]);
        out.ratio[c] = r;
        defined.push_back(r);
    }
    out.ratio_summary = summarize(defined);

    std::vector<double> abs_bias;
    for (double b : head.bias) abs_bias.push_back(std::abs(b));
    out.bias_abs = summarize(abs_bias);
    return out;
}

}  // namespace repspace
