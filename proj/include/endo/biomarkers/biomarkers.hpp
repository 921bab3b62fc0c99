#pragma once

#include "endo/postproc/cell_graph.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace endo::bio {

struct CellMeasure {
    std::int32_t label = 0;
    double area_um2 = 0.0;
    int vertices = 0;
    int neighbors = 0;
    bool inner = false;
    double mean_body = 0.0;
};

/// Cell count, density, polymegethism and hexagonality of one image.
///
/// `cv` needs at least two cells and `hex_neighbor` at least one inner cell;
/// either is left empty otherwise. Areas exclude ridge pixels.
struct BiomarkerReport {
    std::size_t n_cells = 0;
    double ecd = 0.0;         ///< cells/mm^2
    std::optional<double> cv;  ///< percent, sample standard deviation
    double hex_vertex = 0.0;  ///< percent of cells with exactly six vertices
    std::optional<double> hex_neighbor;  ///< percent of inner cells with six neighbors
    std::size_t n_inner = 0;
    double pixel_pitch = 0.0;  ///< um/px
    std::string cv_estimator = "sample-sd";
    std::vector<CellMeasure> per_cell;
};

/// n / sum(area mm^2). Empty for zero cells.
std::optional<double> compute_ecd(std::span<const double> areas_px, double pitch_um);
/// 100 * sample SD / mean. Empty for fewer than two cells.
std::optional<double> compute_cv(std::span<const double> areas);
/// 100 * |{count == 6}| / n. Empty for zero cells.
std::optional<double> compute_hex_vertex(std::span<const int> vertex_counts);
/// Neighbor-method HEX over inner cells of a segmentation. Empty without inner cells.
std::optional<double> compute_hex_neighbor(const post::Segmentation& segmentation);

/// Number of distinct vertex clusters 8-adjacent to each superpixel.
std::map<std::int32_t, int> assign_vertices_to_cells(const post::CellGraph& graph, const img::LabelMap& labels);

/// Superpixel adjacency through graph edges: label -> sorted neighbor labels.
std::map<std::int32_t, std::vector<std::int32_t>> cell_neighbors(const post::CellGraph& graph);

/// Full report for the kept cells of a segmentation. Empty when nothing is kept.
std::optional<BiomarkerReport> estimate_biomarkers(const post::Segmentation& segmentation, double pitch_um);

}  // namespace endo::bio
