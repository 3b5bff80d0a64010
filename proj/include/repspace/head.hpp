#pragma once

#include <cstddef>
#include <vector>

#include "repspace/matrix.hpp"

namespace repspace {

/// The final affine layer: logit_c = w_c . f + b_c. Row c of `weight` is w_c.
struct ClassifierHead {
    Matrix<double> weight;  // [C x D]
    std::vector<double> bias;  // [C]

    std::size_t num_classes() const noexcept { return weight.rows(); }
    std::size_t dim() const noexcept { return weight.cols(); }

    /// Throws on shape mismatch or non-finite entries.
    void validate() const;

    ClassifierHead without_bias() const;
};

}  // namespace repspace
