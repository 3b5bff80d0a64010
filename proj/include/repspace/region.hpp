#pragma once

namespace repspace {

/// Axis-aligned rectangle in a 2D representation space.
struct Region {
    double x_min = -1.0;
    double x_max = 1.0;
    double y_min = -1.0;
    double y_max = 1.0;

    void validate() const;
    Region scaled(double factor) const {
        return {x_min * factor, x_max * factor, y_min * factor, y_max * factor};
    }
};

}  // namespace repspace
