#pragma once

#include "endo/biomarkers/biomarkers.hpp"
#include "endo/imgcore/raster.hpp"
#include "endo/postproc/cell_graph.hpp"

#include <optional>
#include <string>
#include <utility>

namespace endo::post {

enum class SelectionMode { body, blob, roi };

std::string to_string(SelectionMode mode);
/// Parses "body", "blob" or "roi"; throws std::invalid_argument otherwise.
SelectionMode parse_selection_mode(const std::string& name);

struct PipelineConfig {
    double k_sigma = 0.2;
    double edge_threshold = 0.1;
    double body_threshold = 0.5;
    double roi_area_fraction = 0.85;
    SelectionMode selection_mode = SelectionMode::body;
    int min_edge_length = 2;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

/// Step I: dominant cell spacing l = 1 / f* from the radial spectrum, with
/// parabolic refinement of the peak. Throws endo::Fault("no periodicity")
/// when no peak stands out from the spectrum floor.
double estimate_cell_size(const img::ProbMap& edge);

/// Step II: border pixels become max(value, 0.5).
img::ProbMap add_perimeter(const img::ProbMap& edge);

/// Step III: normalized Gaussian with sigma = max(k_sigma * l, 0.3) and
/// size 2 * ceil(3 sigma) + 1.
img::ProbMap smooth_edges(const img::ProbMap& edge, double cell_size, double k_sigma);

/// Step IV: priority-flood watershed from 8-connected regional minima
/// (4-connected flooding, ties by insertion order). Ridge pixels are 0 and thinned to
/// 8-connected 1-px lines; basins are labeled 1..K in raster order.
img::LabelMap watershed(const img::ProbMap& smoothed);

/// Step V (part 1): vertices, edges and per-edge mean intensity sampled from
/// the raw edge map. Chains shorter than min_edge_length that join two
/// vertices are fused with both into one vertex.
CellGraph extract_graph(const img::LabelMap& labels, const img::ProbMap& edge, int min_edge_length = 2);

/// Step V (part 2): removes edges whose mean intensity is below the
/// threshold. Interior edges are deleted entirely; edges touching non-ROI
/// pixels lose only their central min(3, len - 2) pixels so both end vertices
/// survive. Basins joined by a removal merge into the lower label, labels
/// are compacted and the graph is re-extracted.
std::pair<CellGraph, img::LabelMap> prune_weak_edges(const CellGraph& graph, const img::LabelMap& labels,
                                                     const img::ProbMap& edge, double edge_threshold,
                                                     const img::BinaryMask& non_roi, int min_edge_length = 2);

/// Step VI: drops superpixels touching the image border, then keeps those
/// whose selector passes the mode's rule (mean strictly above
/// body_threshold for body/blob, at least roi_area_fraction of pixels >= 0.5
/// for roi). The returned graph is empty; run_pipeline fills it.
Segmentation filter_superpixels(const img::LabelMap& labels, const img::ProbMap& selector,
                                const PipelineConfig& config);

struct PipelineResult {
    Segmentation segmentation;
    std::optional<bio::BiomarkerReport> report;
    double cell_size = 0.0;
};

/// Steps I-VII. Throws std::invalid_argument for mismatched inputs and
/// endo::Fault when the cell size cannot be estimated.
PipelineResult run_pipeline(const img::ProbMap& edge, const img::ProbMap& selector, const PipelineConfig& config);

}  // namespace endo::post
