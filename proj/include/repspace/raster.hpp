#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "repspace/centers.hpp"
#include "repspace/dumpfmt.hpp"
#include "repspace/head.hpp"
#include "repspace/region.hpp"

namespace repspace {

/// Decision regions sampled on an R x R lattice. Sample (i, j) sits at the
/// lower-left corner of cell (i, j): (x_min + w * i / R, y_min + h * j / R),
/// so the lattice at resolution 2R contains the lattice at R exactly.
struct RasterGrid {
    Region region;
    int resolution = 0;
    std::size_t num_classes = 0;
    bool use_bias = true;
    std::vector<std::uint32_t> predicted_class;  // row-major, j (y) is the slow index
    std::vector<double> confidence;

    double x(int i) const;
    double y(int j) const;
    double cell_width() const;
    double cell_height() const;
    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(resolution) +
               static_cast<std::size_t>(i);
    }
};

RasterGrid rasterize(const ClassifierHead& head, const Region& region, int resolution,
                     bool use_bias = true);

/// Bounding box of a 2D dump's features padded by 10% of the extent per side.
Region default_region(const FeatureDump& dump);

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct Polyline {
    std::vector<Point2> points;
    bool closed = false;
};

/// Marching-squares isolines of the confidence grid; level must lie in (1/C, 1).
std::vector<Polyline> confidence_contour(const RasterGrid& grid, double level);

/// Marching squares over an arbitrary scalar lattice laid out like RasterGrid.
std::vector<Polyline> marching_squares(const RasterGrid& grid, const std::vector<double>& values,
                                       double level);

/// Extreme high-confidence features on either side of a class-center ray.
struct AlignmentExtremes {
    std::size_t cls = 0;
    std::size_t count_above = 0;  // features predicted as cls with confidence > threshold
    std::optional<std::size_t> ccw_row;  // counterclockwise side (cross product >= 0)
    std::optional<std::size_t> cw_row;  // clockwise side (cross product < 0)
    double ccw_angle = 0.0;  // radians from the center direction, >= 0
    double cw_angle = 0.0;
    /// ccw_angle + cw_angle; a missing side contributes zero.
    double spanned_angle = 0.0;

    bool present() const { return count_above > 0; }
};

/// For each class, among features predicted as that class with confidence
/// above `threshold`, the worst-aligned (minimal cosine) feature to the
/// min-loss center on each angular side.
std::vector<AlignmentExtremes> worst_aligned_high_confidence(const FeatureDump& dump,
                                                             const ClassCenterSet& centers,
                                                             double threshold = 0.99);

/// Distinct colors, one per class.
std::vector<std::string> palette(std::size_t num_classes);

struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
    std::size_t cls = 0;
};

std::string render_svg(const RasterGrid& grid, const std::vector<ScatterPoint>& features,
                       const std::vector<Point2>& centers);
void export_svg(const RasterGrid& grid, const std::vector<ScatterPoint>& features,
                const std::vector<Point2>& centers, const std::filesystem::path& path);

/// x,y,class,confidence per lattice point.
void export_grid_csv(const RasterGrid& grid, const std::filesystem::path& path);

struct Box3 {
    std::array<double, 3> lo{-1.0, -1.0, -1.0};
    std::array<double, 3> hi{1.0, 1.0, 1.0};
};

/// Classifies an R^3 lattice of a 3D head and writes x,y,z,class rows.
void export_cube_csv(const ClassifierHead& head, const Box3& box, int resolution, bool use_bias,
                     const std::filesystem::path& path);

}  // namespace repspace
