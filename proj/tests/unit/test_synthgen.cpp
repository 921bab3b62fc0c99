#include "endo/imgcore/filters.hpp"
#include "endo/imgcore/morphology.hpp"
#include "endo/synthgen/synthgen.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace endo;
using namespace endo::synth;

namespace {

MosaicSpec small_spec(std::uint64_t seed = 7) {
    MosaicSpec spec;
    spec.width = 160;
    spec.height = 120;
    spec.target_cell_count = 60;
    spec.seed = seed;
    return spec;
}

// Distinct nonzero labels 8-adjacent to the skeleton pixel (x, y).
std::set<std::int32_t> labels_around(const img::LabelMap& cells, int x, int y) {
    std::set<std::int32_t> out;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            if (cells.contains(x + dx, y + dy) && cells(x + dx, y + dy) > 0) out.insert(cells(x + dx, y + dy));
        }
    }
    return out;
}

// Full cell with the largest area, away from the border.
const GoldCell& big_cell(const GoldStandard& gold) {
    const GoldCell* best = &gold.cells.front();
    for (const auto& c : gold.cells) {
        if (c.area_px > best->area_px) best = &c;
    }
    return *best;
}

// Gold standard made of rectangles separated by 1-px lines; every rectangle is full.
GoldStandard rect_gold(const std::vector<int>& col_widths, const std::vector<int>& row_heights) {
    int w = 1;
    for (int cw : col_widths) w += cw + 1;
    int h = 1;
    for (int rh : row_heights) h += rh + 1;
    GoldStandard g;
    g.cells_map = img::LabelMap(w, h);
    g.skeleton = img::BinaryMask(w, h, 1);
    g.status.push_back(CellStatus::partial);
    std::int32_t id = 0;
    int y0 = 1;
    for (int rh : row_heights) {
        int x0 = 1;
        for (int cw : col_widths) {
            ++id;
            for (int y = y0; y < y0 + rh; ++y) {
                for (int x = x0; x < x0 + cw; ++x) {
                    g.cells_map(x, y) = id;
                    g.skeleton(x, y) = 0;
                }
            }
            g.status.push_back(CellStatus::full);
            g.cells.push_back({id, {}, static_cast<std::size_t>(rh * cw)});
            x0 += cw + 1;
        }
        y0 += rh + 1;
    }
    return g;
}

}  // namespace

TEST_CASE("spec validation") {
    MosaicSpec spec;
    CHECK_NOTHROW(spec.validate());
    spec.width = 0;
    CHECK_THROWS_AS(generate_mosaic(spec), std::invalid_argument);
    spec = MosaicSpec{};
    spec.target_cell_count = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = MosaicSpec{};
    spec.guttae_fraction = 1.5;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("generate_mosaic is deterministic and seed-dependent") {
    const auto a = generate_mosaic(small_spec(3));
    const auto b = generate_mosaic(small_spec(3));
    const auto c = generate_mosaic(small_spec(4));
    CHECK(a.gold.annotation.data() == b.gold.annotation.data());
    CHECK(a.gold.cells_map.data() == b.gold.cells_map.data());
    CHECK(a.gold.cells.size() == b.gold.cells.size());
    CHECK(a.gold.cells_map.data() != c.gold.cells_map.data());
}

TEST_CASE("single seed gives one cell and no interior edges") {
    auto spec = small_spec();
    spec.target_cell_count = 1;
    const auto m = generate_mosaic(spec);
    CHECK(m.polygons.size() == 1);
    for (auto v : m.gold.skeleton.data()) CHECK(v == 0);
    for (auto v : m.gold.cells_map.data()) CHECK(v == 1);
    // It touches the border, so it is partial and annotated 0.5 throughout.
    CHECK(m.gold.status[1] == CellStatus::partial);
    CHECK(m.gold.cells.empty());
}

TEST_CASE("skeleton is 1-px wide, 8-connected and partitions the cells") {
    const auto m = generate_mosaic(small_spec());
    const auto& g = m.gold;
    // No 2x2 block of skeleton pixels.
    for (int y = 0; y + 1 < g.skeleton.height(); ++y) {
        for (int x = 0; x + 1 < g.skeleton.width(); ++x) {
            CHECK_FALSE((g.skeleton(x, y) && g.skeleton(x + 1, y) && g.skeleton(x, y + 1) && g.skeleton(x + 1, y + 1)));
        }
    }
    // One 8-connected skeleton component.
    const auto cc = img::connected_components(g.skeleton, 8);
    std::int32_t max_label = 0;
    for (auto v : cc.data()) max_label = std::max(max_label, v);
    CHECK(max_label == 1);
    // Every non-skeleton pixel is in a cell, and skeleton pixels are not.
    for (std::size_t i = 0; i < g.skeleton.size(); ++i) CHECK((g.skeleton[i] != 0) == (g.cells_map[i] == 0));
    // Annotation values and their meaning.
    for (int y = 0; y < g.annotation.height(); ++y) {
        for (int x = 0; x < g.annotation.width(); ++x) {
            const double a = g.annotation(x, y);
            const auto c = g.cells_map(x, y);
            if (c > 0) {
                CHECK(a == (g.status[c] == CellStatus::full ? 0.0 : 0.5));
            } else {
                bool near_full = false;
                for (auto n : labels_around(g.cells_map, x, y)) near_full |= g.status[n] == CellStatus::full;
                CHECK(a == (near_full ? 1.0 : 0.5));
            }
        }
    }
    // Border cells are partial and not listed.
    for (const auto& c : g.cells) CHECK(g.status[c.id] == CellStatus::full);
    for (int x = 0; x < g.cells_map.width(); ++x) {
        const auto c = g.cells_map(x, 0);
        if (c > 0) CHECK(g.status[c] == CellStatus::partial);
    }
}

TEST_CASE("honeycomb override: interior cells have 6 vertices and 6 neighbours") {
    auto spec = small_spec();
    spec.width = 240;
    spec.height = 200;
    spec.hex_spacing = 24.0;
    const auto m = generate_mosaic(spec);
    const auto& g = m.gold;
    REQUIRE(g.cells.size() >= 20);
    for (const auto& c : g.cells) CHECK(c.vertices.size() == 6);
    const auto truth = true_biomarkers(g);
    REQUIRE(truth);
    int inner = 0;
    for (const auto& pc : truth->per_cell) {
        if (!pc.inner) continue;
        ++inner;
        CHECK(pc.vertices == 6);
        CHECK(pc.neighbors == 6);
    }
    CHECK(inner >= 10);
    CHECK(truth->hex_vertex == doctest::Approx(100.0));
    REQUIRE(truth->cv);
    // Congruent up to rasterization.
    CHECK(*truth->cv < 3.0);
}

TEST_CASE("polygon and raster vertex counts agree") {
    auto spec = MosaicSpec{};
    spec.seed = 11;
    const auto m = generate_mosaic(spec);
    const auto truth = true_biomarkers(m.gold);
    REQUIRE(truth);
    std::map<std::int32_t, int> raster;
    for (const auto& pc : truth->per_cell) raster[pc.label] = pc.vertices;
    int six = 0;
    for (const auto& c : m.gold.cells) {
        CHECK(raster.at(c.id) == static_cast<int>(c.vertices.size()));
        six += c.vertices.size() == 6 ? 1 : 0;
    }
    CHECK(truth->hex_vertex == doctest::Approx(100.0 * six / static_cast<double>(m.gold.cells.size())));
}

TEST_CASE("guttae: zero fraction is the identity") {
    const auto spec = small_spec();
    const auto m = generate_mosaic(spec);
    const auto g = insert_guttae(m.gold, spec);
    CHECK(g.annotation.data() == m.gold.annotation.data());
    CHECK(g.cells.size() == m.gold.cells.size());
}

TEST_CASE("guttae: a small gutta inside a cell keeps the cell") {
    const auto m = generate_mosaic(small_spec());
    const auto& cell = big_cell(m.gold);
    img::BinaryMask mask(m.gold.cells_map.width(), m.gold.cells_map.height());
    std::size_t marked = 0;
    for (std::size_t i = 0; i < mask.size() && marked < cell.area_px / 5; ++i) {
        if (m.gold.cells_map[i] == cell.id) {
            mask[i] = 1;
            ++marked;
        }
    }
    const auto g = apply_guttae(m.gold, mask);
    CHECK(g.annotation.data() == m.gold.annotation.data());
    CHECK(g.cells.size() == m.gold.cells.size());
    CHECK(g.status[cell.id] == CellStatus::full);
}

TEST_CASE("guttae: three covered cells merge into one discard region") {
    const auto m = generate_mosaic(small_spec());
    const auto& g0 = m.gold;
    // The biggest full cell and two full neighbours of it that also touch each other.
    const auto& a = big_cell(g0);
    const auto truth = true_biomarkers(g0);
    REQUIRE(truth);
    std::map<std::int32_t, std::set<std::int32_t>> adj;
    for (int y = 0; y < g0.cells_map.height(); ++y) {
        for (int x = 0; x < g0.cells_map.width(); ++x) {
            if (g0.cells_map(x, y) != 0) continue;
            const auto around = labels_around(g0.cells_map, x, y);
            for (auto p : around) {
                for (auto q : around) {
                    if (p != q) adj[p].insert(q);
                }
            }
        }
    }
    std::int32_t b = 0;
    std::int32_t c = 0;
    for (auto p : adj[a.id]) {
        if (g0.status[p] != CellStatus::full) continue;
        for (auto q : adj[p]) {
            if (q != a.id && g0.status[q] == CellStatus::full && adj[a.id].count(q)) {
                b = p;
                c = q;
                break;
            }
        }
        if (b) break;
    }
    REQUIRE(b != 0);
    img::BinaryMask mask(g0.cells_map.width(), g0.cells_map.height());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const auto l = g0.cells_map[i];
        mask[i] = (l == a.id || l == b || l == c) ? 1 : 0;
    }
    const auto g = apply_guttae(g0, mask);
    CHECK(g.cells.size() + 3 == g0.cells.size());
    // The three interiors lie in one 4-connected 0.5 region.
    img::BinaryMask discard(mask.width(), mask.height());
    for (std::size_t i = 0; i < discard.size(); ++i) discard[i] = g.annotation[i] == 0.5 ? 1 : 0;
    const auto cc = img::connected_components(discard, 4);
    std::set<std::int32_t> regions;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) regions.insert(cc[i]);
    }
    CHECK(regions.size() == 1);
    CHECK(*regions.begin() != 0);
}

TEST_CASE("insert_guttae covers about the requested fraction") {
    auto spec = small_spec();
    spec.guttae_fraction = 0.1;
    const auto m = generate_mosaic(spec);
    const auto g = insert_guttae(m.gold, spec);
    std::size_t covered = 0;
    for (auto v : g.guttae.data()) covered += v ? 1 : 0;
    const double frac = static_cast<double>(covered) / static_cast<double>(g.guttae.size());
    CHECK(frac >= 0.1);
    CHECK(frac < 0.14);
    CHECK(g.cells.size() < m.gold.cells.size());
}

TEST_CASE("grades follow the breakpoints") {
    CHECK(guttae_grade(0.0) == 1);
    CHECK(guttae_grade(0.0199) == 1);
    CHECK(guttae_grade(0.02) == 2);
    CHECK(guttae_grade(0.08) == 2);
    CHECK(guttae_grade(0.081) == 3);
    CHECK(blur_grade(0.5) == 1);
    CHECK(blur_grade(1.0) == 2);
    CHECK(blur_grade(2.5) == 2);
    CHECK(blur_grade(3.0) == 3);
}

TEST_CASE("render_specular") {
    auto spec = small_spec();
    spec.blur_sigma = 0.0;
    spec.noise_sd = 0.0;
    const auto m = generate_mosaic(spec);
    const auto r = render_specular(m.gold, spec);
    CHECK(r.guttae_grade == 1);
    CHECK(r.blur_grade == 1);
    CHECK(r.total_grade == 2);
    const auto& sk = m.gold.skeleton;
    for (int y = 0; y < sk.height(); ++y) {
        for (int x = 0; x < sk.width(); ++x) {
            if (!sk(x, y)) continue;
            for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
                if (sk.contains(x + dx, y + dy) && !sk(x + dx, y + dy)) CHECK(r.image(x, y) < r.image(x + dx, y + dy));
            }
        }
    }
    auto noisy = small_spec();
    noisy.guttae_fraction = 0.05;
    const auto s1 = generate_sample(noisy);
    const auto s2 = generate_sample(noisy);
    CHECK(s1.image.image.data() == s2.image.image.data());
    CHECK(s1.image.guttae_grade == 2);
}

TEST_CASE("make_targets: impulse stamps the unnormalized kernel") {
    GoldStandard g;
    g.annotation = img::ProbMap(15, 15, 0.0);
    g.annotation(7, 7) = 1.0;
    g.cells_map = img::LabelMap(15, 15, 1);
    g.cells_map(7, 7) = 0;
    g.status = {CellStatus::partial, CellStatus::full};
    const auto t = make_targets(g);
    const auto k = img::gaussian_kernel(7, 1.0, false);
    for (int y = 0; y < 15; ++y) {
        for (int x = 0; x < 15; ++x) {
            const int dx = x - 7;
            const int dy = y - 7;
            const double expect = (std::abs(dx) <= 3 && std::abs(dy) <= 3) ? k(dx + 3, dy + 3) : 0.0;
            CHECK(t.edge(x, y) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    CHECK(t.edge(7, 7) == doctest::Approx(1.0));
    CHECK(t.edge(8, 7) == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("targets: supports tile the image and respect discards") {
    auto spec = small_spec();
    spec.guttae_fraction = 0.08;
    const auto s = generate_sample(spec);
    const auto& g = s.mosaic.gold;
    const auto sup = target_supports(g);
    for (std::size_t i = 0; i < g.annotation.size(); ++i) {
        CHECK(sup.body[i] + sup.blob_edge[i] + sup.discard[i] + sup.partial[i] == 1);
        if (g.cells_map[i] > 0 && g.status[g.cells_map[i]] != CellStatus::full) CHECK(sup.body[i] == 0);
    }
    for (std::size_t i = 0; i < g.annotation.size(); ++i) {
        CHECK(s.targets.edge[i] >= 0.0);
        CHECK(s.targets.edge[i] <= 1.0);
        CHECK(s.targets.blob[i] >= s.targets.body[i]);
        CHECK((s.targets.roi[i] == 0.0 || s.targets.roi[i] == 1.0));
    }
}

TEST_CASE("targets: roi without discards is everything except partial cells") {
    const auto m = generate_mosaic(small_spec());
    const auto& g = m.gold;
    const auto t = make_targets(g);
    for (std::size_t i = 0; i < g.annotation.size(); ++i) {
        const auto c = g.cells_map[i];
        if (c > 0) CHECK(t.roi[i] == (g.status[c] == CellStatus::partial ? 0.0 : 1.0));
    }
}

// Thresholding the clamped, blurred raster gives a band about 3 px wide, so
// thinning lands on the gold line only up to one pixel.
TEST_CASE("targets: thresholding and thinning the edge target tracks the edge raster") {
    const auto m = generate_mosaic(small_spec());
    const auto& g = m.gold;
    const auto t = make_targets(g);
    const auto band = img::threshold(t.edge, 0.5);
    const auto thinned = img::thin(band);
    img::BinaryMask gold_edge(band.width(), band.height());
    for (std::size_t i = 0; i < gold_edge.size(); ++i) gold_edge[i] = g.annotation[i] == 1.0 ? 1 : 0;
    const auto near_gold = img::dilate(gold_edge, 1);
    const auto near_thin = img::dilate(thinned, 1);
    for (std::size_t i = 0; i < gold_edge.size(); ++i) {
        if (gold_edge[i]) CHECK(band[i] == 1);
        if (thinned[i]) CHECK(near_gold[i] == 1);
        if (gold_edge[i]) CHECK(near_thin[i] == 1);
    }
}

TEST_CASE("true_biomarkers") {
    SUBCASE("no full cells") {
        GoldStandard g;
        CHECK_FALSE(true_biomarkers(g));
    }
    SUBCASE("100 squares of 24x24 px") {
        const auto g = rect_gold(std::vector<int>(10, 24), std::vector<int>(10, 24));
        const auto r = true_biomarkers(g);
        REQUIRE(r);
        CHECK(r->n_cells == 100);
        CHECK(r->ecd == doctest::Approx(1600.0).epsilon(1e-3));
        CHECK(*r->cv == doctest::Approx(0.0));
    }
    SUBCASE("areas 80, 100, 120") {
        const auto g = rect_gold({8, 10, 12}, {10});
        const auto r = true_biomarkers(g);
        REQUIRE(r);
        CHECK(r->n_cells == 3);
        CHECK(*r->cv == doctest::Approx(20.0));
    }
    SUBCASE("honeycomb of row period 24") {
        MosaicSpec spec;
        spec.hex_spacing = 24.0;
        const auto r = true_biomarkers(generate_mosaic(spec).gold);
        REQUIRE(r);
        CHECK(r->hex_vertex == doctest::Approx(100.0));
    }
}
