#pragma once

#include "endo/imgcore/raster.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace endo::post {

struct Pixel {
    int x = 0;
    int y = 0;
    bool operator==(const Pixel&) const = default;
    auto operator<=>(const Pixel&) const = default;
};

/// A branch point: an 8-connected cluster of ridge pixels with >= 3 ridge
/// neighbors (possibly fused with a short chain).
struct Vertex {
    std::vector<Pixel> pixels;
    int degree = 0;

    double cx() const {
        double s = 0.0;
        for (const auto& p : pixels) s += p.x;
        return pixels.empty() ? 0.0 : s / static_cast<double>(pixels.size());
    }
    double cy() const {
        double s = 0.0;
        for (const auto& p : pixels) s += p.y;
        return pixels.empty() ? 0.0 : s / static_cast<double>(pixels.size());
    }
};

/// A maximal 8-connected ridge chain between vertices. An end that does not
/// reach a vertex (image border, dangling spur, closed loop) is -1.
struct Edge {
    std::vector<Pixel> pixels;  ///< ordered from the v0 end to the v1 end
    int v0 = -1;
    int v1 = -1;
    double mean_intensity = 0.0;  ///< mean of the raw edge map over `pixels`
    std::vector<std::int32_t> sides;  ///< superpixel labels 4-adjacent to the chain, ascending
};

struct CellGraph {
    std::vector<Vertex> vertices;
    std::vector<Edge> edges;
    /// vertex id + 1 at vertex pixels, 0 elsewhere
    img::LabelMap vertex_map;
};

/// Output of the postprocessing pipeline.
struct Segmentation {
    img::LabelMap labels;
    CellGraph graph;
    /// kept label -> mean selector intensity over the superpixel
    std::map<std::int32_t, double> kept_cells;
    img::BinaryMask non_roi;
};

}  // namespace endo::post
