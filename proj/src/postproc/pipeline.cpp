#include "endo/postproc/pipeline.hpp"

#include "endo/imgcore/error.hpp"
#include "endo/imgcore/filters.hpp"
#include "endo/imgcore/morphology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <tuple>

namespace endo::post {

namespace {

constexpr std::array<int, 4> kDx4 = {1, 0, -1, 0};
constexpr std::array<int, 4> kDy4 = {0, 1, 0, -1};
constexpr std::array<int, 8> kDx8 = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr std::array<int, 8> kDy8 = {0, 1, 1, 1, 0, -1, -1, -1};

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

std::string to_string(SelectionMode mode) {
    switch (mode) {
        case SelectionMode::body: return "body";
        case SelectionMode::blob: return "blob";
        case SelectionMode::roi: return "roi";
    }
    return "body";
}

SelectionMode parse_selection_mode(const std::string& name) {
    if (name == "body") return SelectionMode::body;
    if (name == "blob") return SelectionMode::blob;
    if (name == "roi") return SelectionMode::roi;
    throw std::invalid_argument("unknown selection mode: " + name);
}

void PipelineConfig::validate() const {
    if (!(k_sigma > 0.0)) throw std::invalid_argument("k_sigma must be positive");
    if (!in_unit(edge_threshold)) throw std::invalid_argument("edge_threshold must lie in [0, 1]");
    if (!in_unit(body_threshold)) throw std::invalid_argument("body_threshold must lie in [0, 1]");
    if (!in_unit(roi_area_fraction)) throw std::invalid_argument("roi_area_fraction must lie in [0, 1]");
    if (min_edge_length < 1) throw std::invalid_argument("min_edge_length must be >= 1");
}

double estimate_cell_size(const img::ProbMap& edge) {
    const auto spectrum = img::radial_power_spectrum(edge);
    const auto& mag = spectrum.magnitude;
    // Periods between 3 px and half the short side.
    const double f_max = 1.0 / 3.0;
    const double f_min = 2.0 / static_cast<double>(std::min(edge.width(), edge.height()));
    std::size_t lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(f_min / spectrum.bin_width)));
    std::size_t hi = std::min(mag.size() - 1, static_cast<std::size_t>(std::floor(f_max / spectrum.bin_width)));
    if (mag.size() < 3 || lo >= hi) throw Fault("no periodicity");

    std::size_t best = lo;
    for (std::size_t k = lo; k <= hi; ++k) {
        if (mag[k] > mag[best]) best = k;
    }
    std::vector<double> band(mag.begin() + static_cast<long>(lo), mag.begin() + static_cast<long>(hi) + 1);
    std::nth_element(band.begin(), band.begin() + static_cast<long>(band.size() / 2), band.end());
    const double floor = band[band.size() / 2];
    if (!(mag[best] > 1e-9) || mag[best] < 2.0 * floor) throw Fault("no periodicity");

    double offset = 0.0;
    if (best > 1 && best + 1 < mag.size()) {
        const double a = mag[best - 1];
        const double b = mag[best];
        const double c = mag[best + 1];
        const double denom = a - 2.0 * b + c;
        if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    return 1.0 / ((static_cast<double>(best) + offset) * spectrum.bin_width);
}

img::ProbMap add_perimeter(const img::ProbMap& edge) {
    img::ProbMap out = edge;
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            if (out.on_border(x, y)) out(x, y) = std::max(out(x, y), 0.5);
        }
    }
    return out;
}

img::ProbMap smooth_edges(const img::ProbMap& edge, double cell_size, double k_sigma) {
    if (!(cell_size > 0.0)) throw std::invalid_argument("cell size must be positive");
    const double sigma = std::max(k_sigma * cell_size, 0.3);
    const int size = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
    return img::gaussian_blur(edge, sigma, size);
}

img::LabelMap watershed(const img::ProbMap& smoothed) {
    const int w = smoothed.width();
    const int h = smoothed.height();
    constexpr std::int32_t kRidge = -1;
    constexpr std::int32_t kNone = 0;
    img::LabelMap lab(w, h, kNone);
    std::vector<std::uint8_t> queued(smoothed.size(), 0);

    using Entry = std::tuple<double, std::uint64_t, int, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
    std::uint64_t counter = 0;
    std::int32_t next_label = 0;

    auto push_neighbors = [&](int x, int y) {
        for (int k = 0; k < 4; ++k) {
            const int nx = x + kDx4[k];
            const int ny = y + kDy4[k];
            if (!smoothed.contains(nx, ny)) continue;
            const auto i = smoothed.index(nx, ny);
            if (queued[i] || lab[i] != kNone) continue;
            queued[i] = 1;
            pq.emplace(smoothed[i], counter++, nx, ny);
        }
    };

    auto seed_plateau = [&](std::vector<std::pair<int, int>> members) {
        const std::int32_t id = ++next_label;
        for (auto [x, y] : members) lab(x, y) = id;
        std::sort(members.begin(), members.end(),
                  [](const auto& a, const auto& b) { return std::tie(a.second, a.first) < std::tie(b.second, b.first); });
        for (auto [x, y] : members) push_neighbors(x, y);
    };

    // Regional minima: 8-connected plateaus with no strictly lower
    // 8-neighbor. With 4-neighbors only, a valley running diagonally leaves a
    // string of spurious minima along it.
    {
        std::vector<std::uint8_t> visited(smoothed.size(), 0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (visited[smoothed.index(x, y)]) continue;
                const double v = smoothed(x, y);
                std::vector<std::pair<int, int>> stack{{x, y}};
                std::vector<std::pair<int, int>> members;
                visited[smoothed.index(x, y)] = 1;
                bool minimum = true;
                while (!stack.empty()) {
                    auto [cx, cy] = stack.back();
                    stack.pop_back();
                    members.emplace_back(cx, cy);
                    for (int k = 0; k < 8; ++k) {
                        const int nx = cx + kDx8[k];
                        const int ny = cy + kDy8[k];
                        if (!smoothed.contains(nx, ny)) continue;
                        const double nv = smoothed(nx, ny);
                        if (nv < v) minimum = false;
                        const auto ni = smoothed.index(nx, ny);
                        if (nv == v && !visited[ni]) {
                            visited[ni] = 1;
                            stack.emplace_back(nx, ny);
                        }
                    }
                }
                if (minimum) seed_plateau(members);
            }
        }
    }

    {
        while (!pq.empty()) {
            auto [v, order, x, y] = pq.top();
            pq.pop();
            std::int32_t found = kNone;
            bool conflict = false;
            for (int k = 0; k < 4; ++k) {
                const int nx = x + kDx4[k];
                const int ny = y + kDy4[k];
                if (!smoothed.contains(nx, ny)) continue;
                const auto l = lab(nx, ny);
                if (l <= 0) continue;
                if (found == kNone) {
                    found = l;
                } else if (l != found) {
                    conflict = true;
                }
            }
            if (conflict || found == kNone) {
                lab(x, y) = kRidge;
                continue;
            }
            lab(x, y) = found;
            push_neighbors(x, y);
        }
    }
    // Pixels walled off by ridge pixels (crests around a vertex) were never
    // reached; they join the ridge and thinning decides what survives.
    for (auto& l : lab.data()) {
        if (l == kNone) l = kRidge;
    }

    // Thin the ridge to 1 px. A deleted ridge pixel joins the basin it
    // touches, and only when it touches exactly one, so basins never meet.
    img::BinaryMask ridge(w, h);
    for (std::size_t i = 0; i < lab.size(); ++i) ridge[i] = lab[i] == kRidge ? 1 : 0;
    auto absorb = [&](int x, int y) {
        std::int32_t found = kNone;
        for (int k = 0; k < 4; ++k) {
            const int nx = x + kDx4[k];
            const int ny = y + kDy4[k];
            if (!lab.contains(nx, ny)) continue;
            const auto l = lab(nx, ny);
            if (l <= 0) continue;
            if (found != kNone && l != found) return false;
            found = l;
        }
        if (found == kNone) return false;
        lab(x, y) = found;
        return true;
    };
    img::thin(ridge, absorb);

    // Contiguous ids in raster order of first appearance.
    std::vector<std::int32_t> remap(static_cast<std::size_t>(next_label) + 1, 0);
    std::int32_t k = 0;
    img::LabelMap out(w, h, 0);
    for (std::size_t i = 0; i < lab.size(); ++i) {
        const auto l = lab[i];
        if (l <= 0) continue;
        if (remap[l] == 0) remap[l] = ++k;
        out[i] = remap[l];
    }
    return out;
}

Segmentation filter_superpixels(const img::LabelMap& labels, const img::ProbMap& selector,
                                const PipelineConfig& config) {
    if (!labels.same_shape(selector)) throw std::invalid_argument("filter_superpixels: shape mismatch");
    const auto n = static_cast<std::size_t>(labels.max_label());
    std::vector<double> sum(n + 1, 0.0);
    std::vector<std::size_t> count(n + 1, 0);
    std::vector<std::size_t> inside(n + 1, 0);
    std::vector<bool> border(n + 1, false);
    for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) {
            const auto l = labels(x, y);
            if (l <= 0) continue;
            sum[l] += selector(x, y);
            ++count[l];
            if (selector(x, y) >= 0.5) ++inside[l];
            if (labels.on_border(x, y)) border[l] = true;
        }
    }

    Segmentation seg;
    seg.labels = labels;
    std::vector<bool> kept(n + 1, false);
    for (std::size_t l = 1; l <= n; ++l) {
        if (border[l] || count[l] == 0) continue;
        const double mean = sum[l] / static_cast<double>(count[l]);
        bool pass = false;
        if (config.selection_mode == SelectionMode::roi) {
            pass = static_cast<double>(inside[l]) >= config.roi_area_fraction * static_cast<double>(count[l]);
        } else {
            pass = mean > config.body_threshold;
        }
        if (pass) {
            kept[l] = true;
            seg.kept_cells[static_cast<std::int32_t>(l)] = mean;
        }
    }

    seg.non_roi = img::BinaryMask(labels.width(), labels.height());
    for (int y = 0; y < labels.height(); ++y) {
        for (int x = 0; x < labels.width(); ++x) {
            const auto l = labels(x, y);
            if (l > 0) {
                seg.non_roi(x, y) = kept[l] ? 0 : 1;
                continue;
            }
            bool next_to_kept = false;
            for (int dy = -1; dy <= 1 && !next_to_kept; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!labels.contains(x + dx, y + dy)) continue;
                    const auto m = labels(x + dx, y + dy);
                    if (m > 0 && kept[m]) {
                        next_to_kept = true;
                        break;
                    }
                }
            }
            seg.non_roi(x, y) = next_to_kept ? 0 : 1;
        }
    }
    return seg;
}

PipelineResult run_pipeline(const img::ProbMap& edge, const img::ProbMap& selector, const PipelineConfig& config) {
    config.validate();
    if (!edge.same_shape(selector)) throw std::invalid_argument("edge and selector maps differ in shape");
    if (std::abs(edge.pixel_pitch() - selector.pixel_pitch()) > 1e-12) {
        throw std::invalid_argument("edge and selector maps differ in pixel pitch");
    }
    PipelineResult result;
    result.cell_size = estimate_cell_size(edge);
    const auto smoothed = smooth_edges(add_perimeter(edge), result.cell_size, config.k_sigma);
    const auto labels = watershed(smoothed);
    const auto graph = extract_graph(labels, edge, config.min_edge_length);
    const auto preliminary = filter_superpixels(labels, selector, config);
    auto [pruned_graph, pruned_labels] =
        prune_weak_edges(graph, labels, edge, config.edge_threshold, preliminary.non_roi, config.min_edge_length);
    result.segmentation = filter_superpixels(pruned_labels, selector, config);
    result.segmentation.graph = std::move(pruned_graph);
    result.report = bio::estimate_biomarkers(result.segmentation, edge.pixel_pitch());
    return result;
}

}  // namespace endo::post
