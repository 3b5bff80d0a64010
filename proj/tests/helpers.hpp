#pragma once

#include <vector>

#include "repspace/dumpfmt.hpp"
#include "repspace/geometry.hpp"
#include "repspace/head.hpp"
#include "repspace/rng.hpp"

namespace testing {

inline repspace::ClassifierHead random_head(repspace::Rng& rng, std::size_t c, std::size_t d,
                                            double bias_scale = 1.0) {
    repspace::ClassifierHead h{repspace::Matrix<double>(c, d), std::vector<double>(c)};
    for (double& w : h.weight.values()) w = rng.normal();
    for (double& b : h.bias) b = bias_scale * rng.normal();
    return h;
}

inline std::vector<double> random_vector(repspace::Rng& rng, std::size_t d, double scale = 1.0) {
    std::vector<double> v(d);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

inline repspace::Matrix<double> random_features(repspace::Rng& rng, std::size_t n, std::size_t d,
                                                double scale = 1.0) {
    repspace::Matrix<double> m(n, d);
    for (double& x : m.values()) x = scale * rng.normal();
    return m;
}

/// Dump whose labels are the head's own predictions on the f32-rounded
/// features, so every sample is correctly classified.
inline repspace::FeatureDump self_labelled_dump(const repspace::Matrix<double>& features,
                                                const repspace::ClassifierHead& head) {
    auto dump = repspace::make_dump(features, std::vector<std::uint32_t>(features.rows(), 0), head);
    const auto h = dump.head();
    for (std::size_t i = 0; i < dump.num_samples(); ++i)
        dump.labels[i] = static_cast<std::uint32_t>(repspace::argmax(repspace::logits(h, dump.feature(i))));
    return dump;
}

}  // namespace testing
