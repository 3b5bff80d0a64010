#include "repspace/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "repspace/geometry.hpp"
#include "repspace/parallel.hpp"

namespace repspace {

void Region::validate() const {
    require(std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) && std::isfinite(y_max),
            ErrorKind::usage, "region bounds must be finite");
    require(x_min < x_max && y_min < y_max, ErrorKind::usage, "region is degenerate");
}

double RasterGrid::x(int i) const {
    return region.x_min + (region.x_max - region.x_min) * static_cast<double>(i) / resolution;
}

double RasterGrid::y(int j) const {
    return region.y_min + (region.y_max - region.y_min) * static_cast<double>(j) / resolution;
}

double RasterGrid::cell_width() const { return (region.x_max - region.x_min) / resolution; }
double RasterGrid::cell_height() const { return (region.y_max - region.y_min) / resolution; }

RasterGrid rasterize(const ClassifierHead& head, const Region& region, int resolution, bool use_bias) {
    require(head.dim() == 2, ErrorKind::dimension,
            "rasterize needs a 2D representation space, got D = " + std::to_string(head.dim()));
    require(resolution >= 2 && resolution <= 4096, ErrorKind::usage, "resolution must lie in [2, 4096]");
    region.validate();
    head.validate();

    RasterGrid grid;
    grid.region = region;
    grid.resolution = resolution;
    grid.num_classes = head.num_classes();
    grid.use_bias = use_bias;
    const auto r = static_cast<std::size_t>(resolution);
    grid.predicted_class.resize(r * r);
    grid.confidence.resize(r * r);
    const ClassifierHead effective = use_bias ? head : head.without_bias();
    parallel_for(r, [&](std::size_t j) {
        std::vector<double> f(2);
        f[1] = grid.y(static_cast<int>(j));
        for (std::size_t i = 0; i < r; ++i) {
            f[0] = grid.x(static_cast<int>(i));
            const auto p = confidence_and_prediction(effective, f);
            grid.predicted_class[j * r + i] = static_cast<std::uint32_t>(p.label);
            grid.confidence[j * r + i] = p.confidence;
        }
    });
    return grid;
}

Region default_region(const FeatureDump& dump) {
    require(dump.dim() == 2, ErrorKind::dimension, "default region needs 2D features");
    double x0 = dump.features(0, 0), x1 = x0, y0 = dump.features(0, 1), y1 = y0;
    for (std::size_t i = 0; i < dump.num_samples(); ++i) {
        x0 = std::min<double>(x0, dump.features(i, 0));
        x1 = std::max<double>(x1, dump.features(i, 0));
        y0 = std::min<double>(y0, dump.features(i, 1));
        y1 = std::max<double>(y1, dump.features(i, 1));
    }
    const double px = x1 > x0 ? 0.1 * (x1 - x0) : 1.0;
    const double py = y1 > y0 ? 0.1 * (y1 - y0) : 1.0;
    return {x0 - px, x1 + px, y0 - py, y1 + py};
}

namespace {

// Edge keys: horizontal edge (i, j)-(i+1, j) and vertical edge (i, j)-(i, j+1).
std::uint64_t edge_key(bool vertical, int i, int j) {
    return (static_cast<std::uint64_t>(vertical) << 63) | (static_cast<std::uint64_t>(i) << 31) |
           static_cast<std::uint64_t>(j);
}

}  // namespace

std::vector<Polyline> marching_squares(const RasterGrid& grid, const std::vector<double>& values,
                                       double level) {
    const int r = grid.resolution;
    require(values.size() == static_cast<std::size_t>(r) * static_cast<std::size_t>(r),
            ErrorKind::dimension, "scalar field size does not match the grid");
    auto v = [&](int i, int j) { return values[grid.index(i, j)]; };

    std::map<std::uint64_t, Point2> crossing;
    auto cross = [&](bool vertical, int i, int j) {
        const auto key = edge_key(vertical, i, j);
        if (!crossing.count(key)) {
            const int i2 = vertical ? i : i + 1;
            const int j2 = vertical ? j + 1 : j;
            const double va = v(i, j), vb = v(i2, j2);
            const double t = (level - va) / (vb - va);
            crossing[key] = {grid.x(i) + t * (grid.x(i2) - grid.x(i)),
                             grid.y(j) + t * (grid.y(j2) - grid.y(j))};
        }
        return key;
    };

    std::vector<std::array<std::uint64_t, 2>> segments;
    for (int j = 0; j + 1 < r; ++j) {
        for (int i = 0; i + 1 < r; ++i) {
            const bool b0 = v(i, j) >= level, b1 = v(i + 1, j) >= level;
            const bool b2 = v(i + 1, j + 1) >= level, b3 = v(i, j + 1) >= level;
            std::vector<std::uint64_t> edges;
            std::optional<std::uint64_t> bottom, right, top, left;
            if (b0 != b1) bottom = cross(false, i, j);
            if (b1 != b2) right = cross(true, i + 1, j);
            if (b3 != b2) top = cross(false, i, j + 1);
            if (b0 != b3) left = cross(true, i, j);
            const int n = bottom.has_value() + right.has_value() + top.has_value() + left.has_value();
            if (n == 2) {
                for (auto e : {bottom, right, top, left})
                    if (e) edges.push_back(*e);
                segments.push_back({edges[0], edges[1]});
            } else if (n == 4) {
                // saddle: resolve with the cell-center average
                const double center = 0.25 * (v(i, j) + v(i + 1, j) + v(i + 1, j + 1) + v(i, j + 1));
                if (b0 == (center >= level)) {
                    segments.push_back({*bottom, *right});
                    segments.push_back({*top, *left});
                } else {
                    segments.push_back({*bottom, *left});
                    segments.push_back({*right, *top});
                }
            }
        }
    }

    std::map<std::uint64_t, std::vector<std::size_t>> by_edge;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        by_edge[segments[s][0]].push_back(s);
        by_edge[segments[s][1]].push_back(s);
    }
    std::vector<bool> used(segments.size(), false);
    auto next_segment = [&](std::uint64_t key) -> std::optional<std::size_t> {
        for (auto s : by_edge[key])
            if (!used[s]) return s;
        return std::nullopt;
    };

    std::vector<Polyline> lines;
    for (std::size_t s0 = 0; s0 < segments.size(); ++s0) {
        if (used[s0]) continue;
        used[s0] = true;
        std::vector<std::uint64_t> chain{segments[s0][0], segments[s0][1]};
        while (auto s = next_segment(chain.back())) {
            used[*s] = true;
            chain.push_back(segments[*s][0] == chain.back() ? segments[*s][1] : segments[*s][0]);
        }
        std::vector<std::uint64_t> head;
        while (auto s = next_segment(chain.front() == chain.back() ? ~0ULL : chain.front())) {
            used[*s] = true;
            const auto front = chain.front();
            chain.insert(chain.begin(), segments[*s][0] == front ? segments[*s][1] : segments[*s][0]);
        }
        Polyline line;
        line.closed = chain.size() > 2 && chain.front() == chain.back();
        for (std::size_t k = 0; k < chain.size(); ++k) {
            if (line.closed && k + 1 == chain.size()) break;
            line.points.push_back(crossing[chain[k]]);
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

std::vector<Polyline> confidence_contour(const RasterGrid& grid, double level) {
    require(grid.num_classes >= 2, ErrorKind::usage, "grid has fewer than two classes");
    const double lo = 1.0 / static_cast<double>(grid.num_classes);
    require(level > lo && level < 1.0, ErrorKind::usage,
            "contour level must lie in (1/C, 1) = (" + std::to_string(lo) + ", 1)");
    return marching_squares(grid, grid.confidence, level);
}

std::vector<AlignmentExtremes> worst_aligned_high_confidence(const FeatureDump& dump,
                                                             const ClassCenterSet& centers,
                                                             double threshold) {
    require(dump.dim() == 2, ErrorKind::dimension, "alignment extremes need a 2D dump");
    require(centers.num_classes() == dump.num_classes() && centers.min_loss_point.cols() == 2,
            ErrorKind::dimension, "class centers do not match the dump");
    const auto head = dump.head();
    std::vector<AlignmentExtremes> out(dump.num_classes());
    for (std::size_t c = 0; c < out.size(); ++c) out[c].cls = c;

    for (std::size_t i = 0; i < dump.num_samples(); ++i) {
        const auto f = dump.feature(i);
        const auto pred = confidence_and_prediction(head, f);
        if (!(pred.confidence > threshold)) continue;
        auto& ext = out[pred.label];
        ++ext.count_above;
        const auto center = centers.min_loss_point.row(pred.label);
        const double cross = center[0] * f[1] - center[1] * f[0];
        const double along = center[0] * f[0] + center[1] * f[1];
        const double angle = std::abs(std::atan2(cross, along));
        if (cross >= 0.0) {
            if (!ext.ccw_row || angle > ext.ccw_angle) {
                ext.ccw_row = i;
                ext.ccw_angle = angle;
            }
        } else if (!ext.cw_row || angle > ext.cw_angle) {
            ext.cw_row = i;
            ext.cw_angle = angle;
        }
    }
    for (auto& ext : out) ext.spanned_angle = ext.ccw_angle + ext.cw_angle;
    return out;
}

std::vector<std::string> palette(std::size_t num_classes) {
    static const std::vector<std::string> base = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                                  "#bcbd22", "#17becf"};
    std::vector<std::string> colors;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (c < base.size()) {
            colors.push_back(base[c]);
            continue;
        }
        // golden-angle hues, alternating lightness so neighbours differ
        const double hue = std::fmod(static_cast<double>(c) * 137.50776405, 360.0);
        const double light = (c % 2 == 0) ? 0.45 : 0.65;
        const double sat = 0.65;
        const double chroma = (1.0 - std::abs(2.0 * light - 1.0)) * sat;
        const double hp = hue / 60.0;
        const double xx = chroma * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
        double r = 0, g = 0, b = 0;
        if (hp < 1) { r = chroma; g = xx; }
        else if (hp < 2) { r = xx; g = chroma; }
        else if (hp < 3) { g = chroma; b = xx; }
        else if (hp < 4) { g = xx; b = chroma; }
        else if (hp < 5) { r = xx; b = chroma; }
        else { r = chroma; b = xx; }
        const double m = light - chroma / 2.0;
        char buf[8];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround((r + m) * 255)),
                      static_cast<int>(std::lround((g + m) * 255)), static_cast<int>(std::lround((b + m) * 255)));
        std::string color(buf);
        // a generated color must not repeat an earlier entry
        while (std::find(colors.begin(), colors.end(), color) != colors.end()) {
            unsigned value = std::stoul(color.substr(1), nullptr, 16);
            std::snprintf(buf, sizeof buf, "#%06x", (value + 1) & 0xFFFFFF);
            color = buf;
        }
        colors.push_back(color);
    }
    return colors;
}

std::string render_svg(const RasterGrid& grid, const std::vector<ScatterPoint>& features,
                       const std::vector<Point2>& centers) {
    constexpr double kSize = 640.0;
    const int r = grid.resolution;
    const double cell = kSize / r;
    auto px = [&](double x) { return (x - grid.region.x_min) / (grid.region.x_max - grid.region.x_min) * kSize; };
    auto py = [&](double y) { return kSize - (y - grid.region.y_min) / (grid.region.y_max - grid.region.y_min) * kSize; };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", v);
        return std::string(buf);
    };

    const auto colors = palette(grid.num_classes);
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
       << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n<style>\n";
    for (std::size_t c = 0; c < colors.size(); ++c)
        os << ".r" << c << "{fill:" << colors[c] << ";fill-opacity:0.35}"
           << " .p" << c << "{fill:" << colors[c] << ";stroke:#000;stroke-width:0.8}\n";
    os << "</style>\n<g id=\"regions\" shape-rendering=\"crispEdges\">\n";
    for (int j = 0; j < r; ++j) {
        int i = 0;
        while (i < r) {
            const auto cls = grid.predicted_class[grid.index(i, j)];
            int run = 1;
            while (i + run < r && grid.predicted_class[grid.index(i + run, j)] == cls) ++run;
            // cell (i, j) spans [x_i, x_{i+1}) x [y_j, y_{j+1}); SVG y grows downward
            os << "<rect class=\"r" << cls << "\" x=\"" << num(i * cell) << "\" y=\""
               << num(kSize - (j + 1) * cell) << "\" width=\"" << num(run * cell) << "\" height=\""
               << num(cell) << "\"/>\n";
            i += run;
        }
    }
    os << "</g>\n<g id=\"features\">\n";
    for (const auto& p : features)
        os << "<circle class=\"p" << p.cls << "\" cx=\"" << num(px(p.x)) << "\" cy=\"" << num(py(p.y))
           << "\" r=\"3\"/>\n";
    os << "</g>\n<g id=\"centers\" stroke=\"#000\" stroke-width=\"2\">\n";
    for (const auto& c : centers) {
        const double cx = px(c.x), cy = py(c.y);
        os << "<line x1=\"" << num(cx - 6) << "\" y1=\"" << num(cy - 6) << "\" x2=\"" << num(cx + 6)
           << "\" y2=\"" << num(cy + 6) << "\"/>\n"
           << "<line x1=\"" << num(cx - 6) << "\" y1=\"" << num(cy + 6) << "\" x2=\"" << num(cx + 6)
           << "\" y2=\"" << num(cy - 6) << "\"/>\n";
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

void export_svg(const RasterGrid& grid, const std::vector<ScatterPoint>& features,
                const std::vector<Point2>& centers, const std::filesystem::path& path) {
    require(grid.resolution >= 2 && grid.predicted_class.size() ==
                                        static_cast<std::size_t>(grid.resolution) * grid.resolution,
            ErrorKind::usage, "invalid raster grid");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::io, "cannot open " + path.string() + " for writing");
    out << render_svg(grid, features, centers);
    require(out.good(), ErrorKind::io, "write failed: " + path.string());
}

void export_grid_csv(const RasterGrid& grid, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::io, "cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "x,y,class,confidence\n";
    for (int j = 0; j < grid.resolution; ++j)
        for (int i = 0; i < grid.resolution; ++i)
            out << grid.x(i) << ',' << grid.y(j) << ',' << grid.predicted_class[grid.index(i, j)] << ','
                << grid.confidence[grid.index(i, j)] << '\n';
    require(out.good(), ErrorKind::io, "write failed: " + path.string());
}

void export_cube_csv(const ClassifierHead& head, const Box3& box, int resolution, bool use_bias,
                     const std::filesystem::path& path) {
    require(head.dim() == 3, ErrorKind::dimension,
            "cube export needs a 3D representation space, got D = " + std::to_string(head.dim()));
    require(resolution >= 2 && resolution <= 512, ErrorKind::usage, "cube resolution must lie in [2, 512]");
    for (int a = 0; a < 3; ++a)
        require(box.lo[a] < box.hi[a], ErrorKind::usage, "cube bounds are degenerate");
    const ClassifierHead effective = use_bias ? head : head.without_bias();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::io, "cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "x,y,z,class\n";
    std::vector<double> f(3);
    for (int k = 0; k < resolution; ++k)
        for (int j = 0; j < resolution; ++j)
            for (int i = 0; i < resolution; ++i) {
                const int idx[3] = {i, j, k};
                for (int a = 0; a < 3; ++a)
                    f[a] = box.lo[a] + (box.hi[a] - box.lo[a]) * idx[a] / resolution;
                out << f[0] << ',' << f[1] << ',' << f[2] << ',' << argmax(logits(effective, f)) << '\n';
            }
    require(out.good(), ErrorKind::io, "write failed: " + path.string());
}

}  // namespace repspace
