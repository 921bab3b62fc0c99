#include "endo/synthgen/synthgen.hpp"

#include "annotate.hpp"

#include "endo/imgcore/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

namespace endo::synth {

namespace {

// Independent RNG streams per purpose, all derived from the spec seed.
constexpr std::uint64_t kSeedStream = 0x5EED5EED5EED0001ULL;
// Shortest Voronoi edge (px) kept between two junctions.
constexpr double kMinEdgeLength = 5.0;

// Uniform bucket grid for nearest-seed queries.
class SeedIndex {
public:
    SeedIndex(const std::vector<Point2>& seeds, double x0, double y0, double x1, double y1, double bucket)
        : seeds_(seeds), x0_(x0), y0_(y0), bucket_(bucket) {
        nx_ = std::max(1, static_cast<int>(std::ceil((x1 - x0) / bucket)));
        ny_ = std::max(1, static_cast<int>(std::ceil((y1 - y0) / bucket)));
        cells_.resize(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_));
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            cells_[cell_of(seeds[i][0], seeds[i][1])].push_back(static_cast<int>(i));
        }
    }

    /// Nearest seed; ties go to the lower index.
    int nearest(double x, double y) const {
        const int cx = std::clamp(static_cast<int>(std::floor((x - x0_) / bucket_)), 0, nx_ - 1);
        const int cy = std::clamp(static_cast<int>(std::floor((y - y0_) / bucket_)), 0, ny_ - 1);
        double best = std::numeric_limits<double>::max();
        int best_i = -1;
        const int max_ring = std::max(nx_, ny_);
        for (int r = 0; r <= max_ring; ++r) {
            for (int by = cy - r; by <= cy + r; ++by) {
                if (by < 0 || by >= ny_) continue;
                for (int bx = cx - r; bx <= cx + r; ++bx) {
                    if (bx < 0 || bx >= nx_) continue;
                    if (std::max(std::abs(bx - cx), std::abs(by - cy)) != r) continue;
                    for (int i : cells_[static_cast<std::size_t>(by) * nx_ + bx]) {
                        const double dx = seeds_[i][0] - x;
                        const double dy = seeds_[i][1] - y;
                        const double d = dx * dx + dy * dy;
                        if (d < best || (d == best && i < best_i)) {
                            best = d;
                            best_i = i;
                        }
                    }
                }
            }
            // Anything in ring r + 1 or beyond is at least r buckets away.
            const double bound = r * bucket_;
            if (best_i >= 0 && best < bound * bound) break;
        }
        return best_i;
    }

private:
    std::size_t cell_of(double x, double y) const {
        const int cx = std::clamp(static_cast<int>(std::floor((x - x0_) / bucket_)), 0, nx_ - 1);
        const int cy = std::clamp(static_cast<int>(std::floor((y - y0_) / bucket_)), 0, ny_ - 1);
        return static_cast<std::size_t>(cy) * nx_ + cx;
    }

    const std::vector<Point2>& seeds_;
    double x0_, y0_, bucket_;
    int nx_ = 1, ny_ = 1;
    std::vector<std::vector<int>> cells_;
};

struct Domain {
    double x0, y0, x1, y1;
};

std::vector<Point2> random_seeds(const MosaicSpec& spec, const Domain& dom, double spacing) {
    std::mt19937_64 rng(spec.seed ^ kSeedStream);
    std::uniform_real_distribution<double> ux(dom.x0, dom.x1);
    std::uniform_real_distribution<double> uy(dom.y0, dom.y1);
    const double density = static_cast<double>(spec.target_cell_count) / (static_cast<double>(spec.width) * spec.height);
    const auto n = std::max<long>(1, std::lround(density * (dom.x1 - dom.x0) * (dom.y1 - dom.y0)));
    std::vector<Point2> seeds(static_cast<std::size_t>(n));
    for (auto& s : seeds) {
        s[0] = ux(rng);
        s[1] = uy(rng);
    }
    // Lloyd relaxation with centroids taken over the pixel grid of the domain.
    for (int it = 0; it < spec.lloyd_iterations; ++it) {
        SeedIndex index(seeds, dom.x0, dom.y0, dom.x1, dom.y1, spacing);
        std::vector<double> sx(seeds.size(), 0.0), sy(seeds.size(), 0.0), cnt(seeds.size(), 0.0);
        for (double y = std::ceil(dom.y0); y < dom.y1; y += 1.0) {
            for (double x = std::ceil(dom.x0); x < dom.x1; x += 1.0) {
                const int i = index.nearest(x, y);
                sx[i] += x;
                sy[i] += y;
                cnt[i] += 1.0;
            }
        }
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            if (cnt[i] > 0.0) seeds[i] = {sx[i] / cnt[i], sy[i] / cnt[i]};
        }
    }
    return seeds;
}

std::vector<Point2> hex_seeds(const MosaicSpec& spec, const Domain& dom) {
    // A random sub-pixel shift avoids exact three-way distance ties.
    std::mt19937_64 rng(spec.seed ^ kSeedStream);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    const double s = spec.hex_spacing;
    const double a = 2.0 * s / std::sqrt(3.0);
    const double ox = u(rng) * a;
    const double oy = u(rng) * s;
    std::vector<Point2> seeds;
    const int j0 = static_cast<int>(std::floor((dom.y0 - oy) / s)) - 1;
    const int j1 = static_cast<int>(std::ceil((dom.y1 - oy) / s)) + 1;
    const int i0 = static_cast<int>(std::floor((dom.x0 - ox) / a)) - 1;
    const int i1 = static_cast<int>(std::ceil((dom.x1 - ox) / a)) + 1;
    for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
            const double x = ox + i * a + ((j & 1) ? a / 2.0 : 0.0);
            const double y = oy + j * s;
            if (x >= dom.x0 && x < dom.x1 && y >= dom.y0 && y < dom.y1) seeds.push_back({x, y});
        }
    }
    return seeds;
}

// Polygon corner plus the seed whose bisector carries the edge leaving it
// (-1 for the clipping rectangle).
struct Corner {
    Point2 p;
    int edge_seed = -1;
};

// Voronoi cell of seeds[k] by half-plane clipping of the rectangle.
std::vector<Corner> voronoi_polygon(const std::vector<Point2>& seeds, std::size_t k, const Domain& rect) {
    const Point2 p = seeds[k];
    std::vector<int> order(seeds.size());
    for (std::size_t j = 0; j < seeds.size(); ++j) order[j] = static_cast<int>(j);
    auto dist2 = [&](int j) {
        return (seeds[j][0] - p[0]) * (seeds[j][0] - p[0]) + (seeds[j][1] - p[1]) * (seeds[j][1] - p[1]);
    };
    auto closer = [&](int a, int b) {
        const double da = dist2(a);
        const double db = dist2(b);
        return da < db || (da == db && a < b);
    };
    // Only the nearest few seeds ever cut a cell; the tail is sorted on demand.
    const std::size_t head = std::min<std::size_t>(order.size(), 32);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(head), order.end(), closer);

    std::vector<Corner> poly = {{{rect.x0, rect.y0}, -1}, {{rect.x1, rect.y0}, -1}, {{rect.x1, rect.y1}, -1},
                                {{rect.x0, rect.y1}, -1}};
    for (std::size_t n = 0; n < order.size(); ++n) {
        if (n == head) std::sort(order.begin() + static_cast<std::ptrdiff_t>(head), order.end(), closer);
        const int j = order[n];
        if (static_cast<std::size_t>(j) == k) continue;
        const Point2 q = seeds[j];
        // Seeds beyond twice the farthest corner cannot cut the cell.
        double r2 = 0.0;
        for (const auto& v : poly) {
            r2 = std::max(r2, (v.p[0] - p[0]) * (v.p[0] - p[0]) + (v.p[1] - p[1]) * (v.p[1] - p[1]));
        }
        if (dist2(j) > 4.0 * r2) break;
        // Keep points closer to p than to q: n . x <= c.
        const double nx = q[0] - p[0];
        const double ny = q[1] - p[1];
        const double c = (q[0] * q[0] + q[1] * q[1] - p[0] * p[0] - p[1] * p[1]) / 2.0;
        std::vector<Corner> out;
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Corner& a = poly[i];
            const Corner& b = poly[(i + 1) % poly.size()];
            const double fa = nx * a.p[0] + ny * a.p[1] - c;
            const double fb = nx * b.p[0] + ny * b.p[1] - c;
            auto cut = [&] {
                const double t = fa / (fa - fb);
                return Point2{a.p[0] + t * (b.p[0] - a.p[0]), a.p[1] + t * (b.p[1] - a.p[1])};
            };
            if (fa <= 0.0) {
                out.push_back(a);
                if (fb > 0.0) {
                    if (fa < 0.0) {
                        out.push_back({cut(), j});
                    } else {
                        out.back().edge_seed = j;
                    }
                }
            } else if (fb < 0.0) {
                out.push_back({cut(), a.edge_seed});
            }
        }
        poly = std::move(out);
        if (poly.size() < 3) break;
    }
    return poly;
}

bool on_rect(const Point2& v, const Domain& rect) {
    constexpr double eps = 1e-9;
    return v[0] <= rect.x0 + eps || v[0] >= rect.x1 - eps || v[1] <= rect.y0 + eps || v[1] >= rect.y1 - eps;
}

// A Voronoi edge much shorter than a few pixels cannot be told apart from a
// four-way junction once rasterized. Pull the two seeds that share such an
// edge towards each other until the edge is long enough.
void lengthen_short_edges(std::vector<Point2>& seeds, const Domain& rect, double min_length) {
    for (int pass = 0; pass < 200; ++pass) {
        std::vector<std::pair<int, int>> short_pairs;
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const auto poly = voronoi_polygon(seeds, k, rect);
            for (std::size_t i = 0; i < poly.size(); ++i) {
                const auto& a = poly[i];
                const auto& b = poly[(i + 1) % poly.size()];
                if (a.edge_seed <= static_cast<int>(k)) continue;
                if (on_rect(a.p, rect) || on_rect(b.p, rect)) continue;
                if (std::hypot(a.p[0] - b.p[0], a.p[1] - b.p[1]) < min_length) {
                    short_pairs.emplace_back(static_cast<int>(k), a.edge_seed);
                }
            }
        }
        if (short_pairs.empty()) return;
        for (auto [i, j] : short_pairs) {
            const double dx = seeds[j][0] - seeds[i][0];
            const double dy = seeds[j][1] - seeds[i][1];
            const double d = std::hypot(dx, dy);
            if (d < 1e-9) continue;
            constexpr double kStep = 0.25;
            auto clamp_x = [&](double x) { return std::clamp(x, rect.x0, rect.x1 - 1e-6); };
            auto clamp_y = [&](double y) { return std::clamp(y, rect.y0, rect.y1 - 1e-6); };
            seeds[i] = {clamp_x(seeds[i][0] + kStep * dx / d), clamp_y(seeds[i][1] + kStep * dy / d)};
            seeds[j] = {clamp_x(seeds[j][0] - kStep * dx / d), clamp_y(seeds[j][1] - kStep * dy / d)};
        }
    }
}

}  // namespace

void MosaicSpec::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("mosaic must have positive width and height");
    if (target_cell_count < 1) throw std::invalid_argument("target_cell_count must be >= 1");
    if (lloyd_iterations < 0) throw std::invalid_argument("lloyd_iterations must be >= 0");
    if (!(guttae_fraction >= 0.0 && guttae_fraction <= 1.0)) {
        throw std::invalid_argument("guttae_fraction must lie in [0, 1]");
    }
    if (!(guttae_size_px > 0.0)) throw std::invalid_argument("guttae_size_px must be positive");
    if (!(blur_sigma >= 0.0)) throw std::invalid_argument("blur_sigma must be >= 0");
    if (!(noise_sd >= 0.0)) throw std::invalid_argument("noise_sd must be >= 0");
    if (!(hex_spacing >= 0.0)) throw std::invalid_argument("hex_spacing must be >= 0");
    if (!(pixel_pitch > 0.0)) throw std::invalid_argument("pixel_pitch must be positive");
}

Mosaic generate_mosaic(const MosaicSpec& spec) {
    spec.validate();
    const int w = spec.width;
    const int h = spec.height;
    const double spacing = spec.hex_spacing > 0.0
                               ? spec.hex_spacing
                               : std::sqrt(static_cast<double>(w) * h / spec.target_cell_count);
    // Random seeds live inside the image, so every border cell keeps its seed
    // and no partial cell degenerates into a thin sliver along the edge. The
    // honeycomb extends past the border like a real field of view.
    const double margin = spec.hex_spacing > 0.0 ? 2.0 * spacing : 0.0;
    const Domain dom{-margin - 0.5, -margin - 0.5, w - 0.5 + margin, h - 0.5 + margin};
    // Pixel centers sit on integer coordinates; the image covers [-0.5, w - 0.5).
    const Domain rect{-0.5, -0.5, w - 0.5, h - 0.5};
    std::vector<Point2> seeds;
    if (spec.hex_spacing > 0.0) {
        seeds = hex_seeds(spec, dom);
    } else {
        seeds = random_seeds(spec, dom, spacing);
        lengthen_short_edges(seeds, rect, kMinEdgeLength);
    }

    SeedIndex index(seeds, dom.x0, dom.y0, dom.x1, dom.y1, spacing);
    img::LabelMap nearest(w, h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) nearest(x, y) = index.nearest(x, y);
    }
    img::BinaryMask band(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto l = nearest(x, y);
            const bool right = x + 1 < w && nearest(x + 1, y) != l;
            const bool down = y + 1 < h && nearest(x, y + 1) != l;
            band(x, y) = (right || down) ? 1 : 0;
        }
    }

    Mosaic mosaic;
    GoldStandard& gold = mosaic.gold;
    gold.pixel_pitch = spec.pixel_pitch;
    gold.skeleton = img::thin(band);
    img::BinaryMask open(w, h);
    for (std::size_t i = 0; i < open.size(); ++i) open[i] = gold.skeleton[i] ? 0 : 1;
    gold.cells_map = img::connected_components(open, 4);
    const auto k = static_cast<std::size_t>(gold.cells_map.max_label());

    // Each region belongs to the seed owning most of its pixels.
    std::vector<std::map<int, std::size_t>> votes(k + 1);
    gold.status.assign(k + 1, CellStatus::full);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto c = gold.cells_map(x, y);
            if (c == 0) continue;
            ++votes[c][nearest(x, y)];
            if (gold.cells_map.on_border(x, y)) gold.status[c] = CellStatus::partial;
        }
    }
    std::vector<int> seed_of_cell(k + 1, -1);
    for (std::size_t c = 1; c <= k; ++c) {
        std::size_t best = 0;
        for (auto [s, n] : votes[c]) {
            if (n > best) {
                best = n;
                seed_of_cell[c] = s;
            }
        }
    }

    // Polygons of every seed whose region reaches into the image.
    std::vector<int> in_image;
    for (std::size_t c = 1; c <= k; ++c) in_image.push_back(seed_of_cell[c]);
    std::sort(in_image.begin(), in_image.end());
    in_image.erase(std::unique(in_image.begin(), in_image.end()), in_image.end());
    std::vector<CellPolygon> by_seed(seeds.size());
    for (int s : in_image) {
        CellPolygon poly;
        poly.seed = s;
        for (const auto& corner : voronoi_polygon(seeds, static_cast<std::size_t>(s), rect)) {
            poly.vertices.push_back(corner.p);
            poly.clipped = poly.clipped || on_rect(corner.p, rect);
        }
        by_seed[s] = poly;
        mosaic.polygons.push_back(std::move(poly));
    }
    detail::annotate(gold, &by_seed, &seed_of_cell);
    gold.guttae = img::BinaryMask(w, h);
    return mosaic;
}

}  // namespace endo::synth

namespace endo::synth::detail {

void annotate(GoldStandard& gold, const std::vector<CellPolygon>* polygons, const std::vector<int>* seed_of_cell) {
    const int w = gold.cells_map.width();
    const int h = gold.cells_map.height();
    const auto k = gold.status.size() - 1;
    std::vector<std::size_t> area(k + 1, 0);
    for (auto c : gold.cells_map.data()) ++area[c];

    gold.annotation = img::ProbMap(w, h, 0.5, gold.pixel_pitch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto c = gold.cells_map(x, y);
            if (c > 0) {
                gold.annotation(x, y) = gold.status[c] == CellStatus::full ? 0.0 : 0.5;
                continue;
            }
            // Skeleton: an edge when it borders at least one full cell.
            bool full_nearby = false;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!gold.cells_map.contains(x + dx, y + dy)) continue;
                    const auto n = gold.cells_map(x + dx, y + dy);
                    if (n > 0 && gold.status[n] == CellStatus::full) full_nearby = true;
                }
            }
            gold.annotation(x, y) = full_nearby ? 1.0 : 0.5;
        }
    }

    // Keep the vertex lists of surviving cells when re-annotating.
    std::map<std::int32_t, std::vector<Point2>> previous;
    for (auto& c : gold.cells) previous[c.id] = std::move(c.vertices);
    gold.cells.clear();
    for (std::size_t c = 1; c <= k; ++c) {
        if (gold.status[c] != CellStatus::full) continue;
        GoldCell cell;
        cell.id = static_cast<std::int32_t>(c);
        cell.area_px = area[c];
        if (polygons && seed_of_cell) {
            const int s = (*seed_of_cell)[c];
            if (s >= 0) cell.vertices = (*polygons)[s].vertices;
        } else if (auto it = previous.find(cell.id); it != previous.end()) {
            cell.vertices = std::move(it->second);
        }
        gold.cells.push_back(std::move(cell));
    }
}

}  // namespace endo::synth::detail
