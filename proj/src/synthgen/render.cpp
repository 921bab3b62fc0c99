#include "endo/synthgen/synthgen.hpp"

#include "annotate.hpp"
#include "endo/imgcore/filters.hpp"
#include "endo/postproc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace endo::synth {

namespace {

constexpr std::uint64_t kGuttaeStream = 0x6077AE0000000002ULL;
constexpr std::uint64_t kRenderStream = 0x4E4DE40000000003ULL;

img::ProbMap to_map(const img::BinaryMask& mask, double pitch) {
    img::ProbMap m(mask.width(), mask.height(), 0.0, pitch);
    for (std::size_t i = 0; i < mask.size(); ++i) m[i] = mask[i] ? 1.0 : 0.0;
    return m;
}

}  // namespace

GoldStandard apply_guttae(const GoldStandard& gold, const img::BinaryMask& mask) {
    if (!gold.cells_map.same_shape(mask)) throw std::invalid_argument("guttae mask shape mismatch");
    GoldStandard out = gold;
    if (out.guttae.empty()) out.guttae = img::BinaryMask(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i) out.guttae[i] = (out.guttae[i] || mask[i]) ? 1 : 0;

    const auto k = out.status.size() - 1;
    std::vector<std::size_t> area(k + 1, 0);
    std::vector<std::size_t> covered(k + 1, 0);
    for (std::size_t i = 0; i < out.cells_map.size(); ++i) {
        const auto c = out.cells_map[i];
        if (c == 0) continue;
        ++area[c];
        if (out.guttae[i]) ++covered[c];
    }
    for (std::size_t c = 1; c <= k; ++c) {
        if (out.status[c] != CellStatus::full || area[c] == 0) continue;
        if (static_cast<double>(covered[c]) > kOcclusionThreshold * static_cast<double>(area[c])) {
            out.status[c] = CellStatus::occluded;
        }
    }
    detail::annotate(out);
    return out;
}

GoldStandard insert_guttae(const GoldStandard& gold, const MosaicSpec& spec) {
    spec.validate();
    const int w = gold.cells_map.width();
    const int h = gold.cells_map.height();
    img::BinaryMask mask(w, h);
    if (spec.guttae_fraction <= 0.0) return gold;

    std::mt19937_64 rng(spec.seed ^ kGuttaeStream);
    std::uniform_real_distribution<double> ux(0.0, w);
    std::uniform_real_distribution<double> uy(0.0, h);
    std::uniform_real_distribution<double> size(0.6, 1.4);
    std::uniform_real_distribution<double> aspect(0.6, 1.0);
    std::uniform_real_distribution<double> angle(0.0, M_PI);
    const auto target = static_cast<std::size_t>(std::ceil(spec.guttae_fraction * w * h));
    std::size_t covered = 0;
    // Bounded so a tiny mean radius cannot loop forever.
    for (int n = 0; covered < target && n < 1000000; ++n) {
        const double cx = ux(rng);
        const double cy = uy(rng);
        const double a = spec.guttae_size_px * size(rng);
        const double b = a * aspect(rng);
        const double t = angle(rng);
        const double ct = std::cos(t);
        const double st = std::sin(t);
        const int r = static_cast<int>(std::ceil(a)) + 1;
        for (int y = std::max(0, static_cast<int>(cy) - r); y <= std::min(h - 1, static_cast<int>(cy) + r); ++y) {
            for (int x = std::max(0, static_cast<int>(cx) - r); x <= std::min(w - 1, static_cast<int>(cx) + r); ++x) {
                const double dx = x - cx;
                const double dy = y - cy;
                const double u = (dx * ct + dy * st) / a;
                const double v = (-dx * st + dy * ct) / b;
                if (u * u + v * v <= 1.0 && !mask(x, y)) {
                    mask(x, y) = 1;
                    ++covered;
                }
            }
        }
    }
    return apply_guttae(gold, mask);
}

int guttae_grade(double guttae_fraction) {
    if (guttae_fraction < 0.02) return 1;
    if (guttae_fraction <= 0.08) return 2;
    return 3;
}

int blur_grade(double blur_sigma) {
    if (blur_sigma < 1.0) return 1;
    if (blur_sigma <= 2.5) return 2;
    return 3;
}

GradedImage render_specular(const GoldStandard& gold, const MosaicSpec& spec) {
    spec.validate();
    const int w = gold.cells_map.width();
    const int h = gold.cells_map.height();
    std::mt19937_64 rng(spec.seed ^ kRenderStream);
    std::normal_distribution<double> body_level(175.0, 12.0);

    std::vector<double> level(gold.status.size(), 175.0);
    for (std::size_t c = 1; c < level.size(); ++c) level[c] = std::clamp(body_level(rng), 110.0, 235.0);

    constexpr double kEdge = 45.0;
    constexpr double kGutta = 12.0;
    img::ProbMap canvas(w, h, 0.0, gold.pixel_pitch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto c = gold.cells_map(x, y);
            if (c == 0) {
                canvas(x, y) = kEdge;
                continue;
            }
            // Pixels touching the skeleton are half darkened.
            bool near_edge = false;
            for (int dy = -1; dy <= 1 && !near_edge; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (gold.skeleton.contains(x + dx, y + dy) && gold.skeleton(x + dx, y + dy)) {
                        near_edge = true;
                        break;
                    }
                }
            }
            canvas(x, y) = near_edge ? 0.5 * (level[c] + kEdge) : level[c];
        }
    }
    if (!gold.guttae.empty()) {
        for (std::size_t i = 0; i < canvas.size(); ++i) {
            if (gold.guttae[i]) canvas[i] = kGutta;
        }
    }
    for (auto& v : canvas.data()) v /= 255.0;
    if (spec.blur_sigma > 0.0) {
        canvas = img::gaussian_blur(canvas, spec.blur_sigma, 2 * static_cast<int>(std::ceil(3.0 * spec.blur_sigma)) + 1);
    }

    GradedImage out;
    out.image = img::Image2D(w, h, 0, gold.pixel_pitch);
    std::normal_distribution<double> noise(0.0, spec.noise_sd > 0.0 ? spec.noise_sd : 1.0);
    for (std::size_t i = 0; i < canvas.size(); ++i) {
        double v = canvas[i] * 255.0;
        if (spec.noise_sd > 0.0) v += noise(rng);
        out.image[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
    out.guttae_grade = guttae_grade(spec.guttae_fraction);
    out.blur_grade = blur_grade(spec.blur_sigma);
    out.total_grade = out.guttae_grade + out.blur_grade;
    return out;
}

TargetSupports target_supports(const GoldStandard& gold) {
    const int w = gold.cells_map.width();
    const int h = gold.cells_map.height();
    TargetSupports s{img::BinaryMask(w, h), img::BinaryMask(w, h), img::BinaryMask(w, h), img::BinaryMask(w, h)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto c = gold.cells_map(x, y);
            if (c > 0) {
                switch (gold.status[c]) {
                    case CellStatus::full: s.body(x, y) = 1; break;
                    case CellStatus::occluded: s.discard(x, y) = 1; break;
                    case CellStatus::partial: s.partial(x, y) = 1; break;
                }
                continue;
            }
            bool any_full = false;
            bool all_full = true;
            bool any_occluded = false;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!gold.cells_map.contains(x + dx, y + dy)) continue;
                    const auto n = gold.cells_map(x + dx, y + dy);
                    if (n == 0) continue;
                    any_full |= gold.status[n] == CellStatus::full;
                    all_full &= gold.status[n] == CellStatus::full;
                    any_occluded |= gold.status[n] == CellStatus::occluded;
                }
            }
            if (any_full && all_full) {
                s.blob_edge(x, y) = 1;
            } else if (!any_full && any_occluded) {
                s.discard(x, y) = 1;
            } else {
                s.partial(x, y) = 1;
            }
        }
    }
    return s;
}

TargetSet make_targets(const GoldStandard& gold) {
    const auto kernel = img::gaussian_kernel(7, 1.0, false);
    const double pitch = gold.pixel_pitch;
    const auto supports = target_supports(gold);
    const int w = gold.annotation.width();
    const int h = gold.annotation.height();

    img::BinaryMask edges(w, h);
    img::BinaryMask roi(w, h);
    img::BinaryMask blob(w, h);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = gold.annotation[i] == 1.0 ? 1 : 0;
        roi[i] = gold.annotation[i] != 0.5 ? 1 : 0;
        blob[i] = (supports.body[i] || supports.blob_edge[i]) ? 1 : 0;
    }
    TargetSet t;
    t.edge = img::convolve2d(to_map(edges, pitch), kernel);
    t.body = img::convolve2d(to_map(supports.body, pitch), kernel);
    t.blob = img::convolve2d(to_map(blob, pitch), kernel);
    t.roi = to_map(roi, pitch);
    return t;
}

std::optional<bio::BiomarkerReport> true_biomarkers(const GoldStandard& gold) {
    if (gold.cells.empty()) return std::nullopt;
    post::Segmentation seg;
    seg.labels = gold.cells_map;
    seg.graph = post::extract_graph(gold.cells_map, {});
    for (const auto& c : gold.cells) seg.kept_cells[c.id] = 1.0;
    return bio::estimate_biomarkers(seg, gold.pixel_pitch);
}

Sample generate_sample(const MosaicSpec& spec) {
    Sample s;
    s.spec = spec;
    s.mosaic = generate_mosaic(spec);
    s.mosaic.gold = insert_guttae(s.mosaic.gold, spec);
    s.image = render_specular(s.mosaic.gold, spec);
    s.targets = make_targets(s.mosaic.gold);
    s.truth = true_biomarkers(s.mosaic.gold);
    return s;
}

}  // namespace endo::synth
