#include "endo/biomarkers/biomarkers.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace endo::bio {

std::optional<double> compute_ecd(std::span<const double> areas_px, double pitch_um) {
    if (areas_px.empty()) return std::nullopt;
    const double mm_per_px = pitch_um * 1e-3;
    double total_mm2 = 0.0;
    for (double a : areas_px) total_mm2 += a * mm_per_px * mm_per_px;
    if (!(total_mm2 > 0.0)) return std::nullopt;
    return static_cast<double>(areas_px.size()) / total_mm2;
}

std::optional<double> compute_cv(std::span<const double> areas) {
    if (areas.size() < 2) return std::nullopt;
    double mean = 0.0;
    for (double a : areas) mean += a;
    mean /= static_cast<double>(areas.size());
    if (!(mean > 0.0)) return std::nullopt;
    double ss = 0.0;
    for (double a : areas) ss += (a - mean) * (a - mean);
    const double sd = std::sqrt(ss / static_cast<double>(areas.size() - 1));
    return 100.0 * sd / mean;
}

std::optional<double> compute_hex_vertex(std::span<const int> vertex_counts) {
    if (vertex_counts.empty()) return std::nullopt;
    const auto six = std::count(vertex_counts.begin(), vertex_counts.end(), 6);
    return 100.0 * static_cast<double>(six) / static_cast<double>(vertex_counts.size());
}

std::map<std::int32_t, int> assign_vertices_to_cells(const post::CellGraph& graph, const img::LabelMap& labels) {
    std::map<std::int32_t, int> counts;
    for (const auto& v : graph.vertices) {
        std::set<std::int32_t> touching;
        for (const auto& p : v.pixels) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int x = p.x + dx;
                    const int y = p.y + dy;
                    if (!labels.contains(x, y)) continue;
                    if (const auto l = labels(x, y); l > 0) touching.insert(l);
                }
            }
        }
        for (auto l : touching) ++counts[l];
    }
    return counts;
}

std::map<std::int32_t, std::vector<std::int32_t>> cell_neighbors(const post::CellGraph& graph) {
    std::map<std::int32_t, std::set<std::int32_t>> adj;
    for (const auto& e : graph.edges) {
        for (std::size_t i = 0; i < e.sides.size(); ++i) {
            for (std::size_t j = 0; j < e.sides.size(); ++j) {
                if (i != j) adj[e.sides[i]].insert(e.sides[j]);
            }
        }
    }
    std::map<std::int32_t, std::vector<std::int32_t>> out;
    for (auto& [label, set] : adj) out[label] = std::vector<std::int32_t>(set.begin(), set.end());
    return out;
}

namespace {

struct InnerStats {
    std::size_t inner = 0;
    std::size_t hexagonal = 0;
};

InnerStats inner_stats(const post::Segmentation& seg, const std::map<std::int32_t, std::vector<std::int32_t>>& adj,
                       std::map<std::int32_t, bool>* inner_flags) {
    InnerStats s;
    for (const auto& [label, mean] : seg.kept_cells) {
        const auto it = adj.find(label);
        bool inner = it != adj.end() && !it->second.empty();
        if (inner) {
            for (auto n : it->second) {
                if (!seg.kept_cells.contains(n)) {
                    inner = false;
                    break;
                }
            }
        }
        if (inner_flags) (*inner_flags)[label] = inner;
        if (!inner) continue;
        ++s.inner;
        if (it->second.size() == 6) ++s.hexagonal;
    }
    return s;
}

}  // namespace

std::optional<double> compute_hex_neighbor(const post::Segmentation& segmentation) {
    const auto adj = cell_neighbors(segmentation.graph);
    const InnerStats s = inner_stats(segmentation, adj, nullptr);
    if (s.inner == 0) return std::nullopt;
    return 100.0 * static_cast<double>(s.hexagonal) / static_cast<double>(s.inner);
}

std::optional<BiomarkerReport> estimate_biomarkers(const post::Segmentation& segmentation, double pitch_um) {
    if (segmentation.kept_cells.empty()) return std::nullopt;

    std::map<std::int32_t, std::size_t> area;
    for (auto l : segmentation.labels.data()) {
        if (l > 0 && segmentation.kept_cells.contains(l)) ++area[l];
    }
    const auto vertex_counts = assign_vertices_to_cells(segmentation.graph, segmentation.labels);
    const auto adj = cell_neighbors(segmentation.graph);
    std::map<std::int32_t, bool> inner;
    const InnerStats stats = inner_stats(segmentation, adj, &inner);

    BiomarkerReport report;
    report.pixel_pitch = pitch_um;
    std::vector<double> areas_px;
    std::vector<int> vertices;
    const double um2_per_px = pitch_um * pitch_um;
    for (const auto& [label, mean] : segmentation.kept_cells) {
        CellMeasure m;
        m.label = label;
        const auto a = area.contains(label) ? area.at(label) : 0;
        m.area_um2 = static_cast<double>(a) * um2_per_px;
        m.vertices = vertex_counts.contains(label) ? vertex_counts.at(label) : 0;
        m.neighbors = adj.contains(label) ? static_cast<int>(adj.at(label).size()) : 0;
        m.inner = inner[label];
        m.mean_body = mean;
        report.per_cell.push_back(m);
        areas_px.push_back(static_cast<double>(a));
        vertices.push_back(m.vertices);
    }
    report.n_cells = report.per_cell.size();
    const auto ecd = compute_ecd(areas_px, pitch_um);
    if (!ecd) return std::nullopt;
    report.ecd = *ecd;
    report.cv = compute_cv(areas_px);
    report.hex_vertex = *compute_hex_vertex(vertices);
    report.n_inner = stats.inner;
    if (stats.inner > 0) report.hex_neighbor = 100.0 * static_cast<double>(stats.hexagonal) / stats.inner;
    return report;
}

}  // namespace endo::bio
