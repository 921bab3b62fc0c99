#include "endo/postproc/pipeline.hpp"

#include "endo/imgcore/morphology.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <set>

namespace endo::post {

namespace {

constexpr std::array<int, 8> kDx8 = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr std::array<int, 8> kDy8 = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 4> kDx4 = {1, 0, -1, 0};
constexpr std::array<int, 4> kDy4 = {0, 1, 0, -1};

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        // Lower index wins so roots are deterministic.
        if (a < b) {
            parent[b] = a;
        } else {
            parent[a] = b;
        }
    }
};

bool is_ridge(const img::LabelMap& labels, int x, int y) { return labels.contains(x, y) && labels(x, y) == 0; }

int ridge_neighbors(const img::LabelMap& labels, int x, int y) {
    int n = 0;
    for (int k = 0; k < 8; ++k) n += is_ridge(labels, x + kDx8[k], y + kDy8[k]) ? 1 : 0;
    return n;
}

// Orders the pixels of a simple 8-connected path (or cycle) from one end to
// the other, preferring an end that touches a vertex cluster.
std::vector<Pixel> order_chain(const std::vector<Pixel>& pixels, const img::LabelMap& chain_id, std::int32_t id,
                               const img::LabelMap& cluster) {
    if (pixels.size() <= 1) return pixels;
    auto in_chain = [&](int x, int y) { return chain_id.contains(x, y) && chain_id(x, y) == id; };
    auto chain_degree = [&](const Pixel& p) {
        int n = 0;
        for (int k = 0; k < 8; ++k) n += in_chain(p.x + kDx8[k], p.y + kDy8[k]) ? 1 : 0;
        return n;
    };
    auto touches_cluster = [&](const Pixel& p) {
        for (int k = 0; k < 8; ++k) {
            const int x = p.x + kDx8[k];
            const int y = p.y + kDy8[k];
            if (cluster.contains(x, y) && cluster(x, y) > 0) return true;
        }
        return false;
    };
    std::size_t start = 0;
    bool found_end = false;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        if (chain_degree(pixels[i]) <= 1) {
            if (!found_end || touches_cluster(pixels[i])) {
                start = i;
                if (found_end) break;
                found_end = true;
            }
        }
    }
    std::vector<Pixel> ordered;
    ordered.reserve(pixels.size());
    std::set<Pixel> visited;
    Pixel cur = pixels[start];
    while (true) {
        ordered.push_back(cur);
        visited.insert(cur);
        bool advanced = false;
        // 4-neighbors first keeps the walk on the thin path.
        for (int pass = 0; pass < 2 && !advanced; ++pass) {
            for (int k = pass; k < 8; k += 2) {
                const Pixel next{cur.x + kDx8[k], cur.y + kDy8[k]};
                if (in_chain(next.x, next.y) && !visited.contains(next)) {
                    cur = next;
                    advanced = true;
                    break;
                }
            }
        }
        if (!advanced) break;
    }
    // A path with a side branch cannot be walked end to end; append leftovers.
    if (ordered.size() < pixels.size()) {
        for (const auto& p : pixels) {
            if (!visited.contains(p)) ordered.push_back(p);
        }
    }
    return ordered;
}

}  // namespace

CellGraph extract_graph(const img::LabelMap& labels, const img::ProbMap& edge, int min_edge_length) {
    if (!edge.empty() && !labels.same_shape(edge)) throw std::invalid_argument("extract_graph: shape mismatch");
    const int w = labels.width();
    const int h = labels.height();

    // Branch pixels and their 8-connected clusters.
    img::BinaryMask branch(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (labels(x, y) == 0 && ridge_neighbors(labels, x, y) >= 3) branch(x, y) = 1;
        }
    }
    const img::LabelMap cluster = img::connected_components(branch, 8);
    const int n_clusters = cluster.max_label();

    img::BinaryMask chain_mask(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) chain_mask(x, y) = (labels(x, y) == 0 && !branch(x, y)) ? 1 : 0;
    }
    const img::LabelMap chain_id = img::connected_components(chain_mask, 8);
    const int n_chains = chain_id.max_label();

    std::vector<std::vector<Pixel>> chain_pixels(static_cast<std::size_t>(n_chains) + 1);
    std::vector<std::vector<Pixel>> cluster_pixels(static_cast<std::size_t>(n_clusters) + 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (chain_id(x, y) > 0) chain_pixels[chain_id(x, y)].push_back({x, y});
            if (cluster(x, y) > 0) cluster_pixels[cluster(x, y)].push_back({x, y});
        }
    }

    auto clusters_near = [&](const Pixel& p) {
        std::vector<int> ids;
        for (int k = 0; k < 8; ++k) {
            const int x = p.x + kDx8[k];
            const int y = p.y + kDy8[k];
            if (cluster.contains(x, y) && cluster(x, y) > 0) {
                const int c = cluster(x, y);
                if (std::find(ids.begin(), ids.end(), c) == ids.end()) ids.push_back(c);
            }
        }
        return ids;
    };

    struct RawChain {
        std::vector<Pixel> pixels;
        int a = 0;  // cluster id at the first pixel, 0 if none
        int b = 0;  // cluster id at the last pixel
        bool fused = false;
    };
    std::vector<RawChain> chains;
    chains.reserve(static_cast<std::size_t>(n_chains));
    for (int c = 1; c <= n_chains; ++c) {
        RawChain rc;
        rc.pixels = order_chain(chain_pixels[c], chain_id, c, cluster);
        const auto first = clusters_near(rc.pixels.front());
        const auto last = clusters_near(rc.pixels.back());
        if (rc.pixels.size() == 1) {
            if (!first.empty()) rc.a = first[0];
            if (first.size() >= 2) rc.b = first[1];
        } else {
            if (!first.empty()) rc.a = first[0];
            if (!last.empty()) rc.b = last[0];
            // A chain that loops back onto one vertex from both ends.
            if (rc.b == 0 && first.size() >= 2) rc.b = first[1];
        }
        chains.push_back(std::move(rc));
    }

    // Fuse short vertex-to-vertex chains into their end vertices.
    UnionFind uf(static_cast<std::size_t>(n_clusters) + 1);
    for (auto& rc : chains) {
        if (rc.a > 0 && rc.b > 0 && static_cast<int>(rc.pixels.size()) < min_edge_length) {
            uf.unite(rc.a, rc.b);
            rc.fused = true;
        }
    }

    // Vertex ids follow the raster order of each fused cluster's first pixel.
    std::vector<int> vertex_of_root(static_cast<std::size_t>(n_clusters) + 1, -1);
    CellGraph graph;
    graph.vertex_map = img::LabelMap(w, h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int c = cluster(x, y);
            if (c == 0) continue;
            const int r = uf.find(c);
            if (vertex_of_root[r] < 0) {
                vertex_of_root[r] = static_cast<int>(graph.vertices.size());
                graph.vertices.emplace_back();
            }
        }
    }
    auto vertex_id = [&](int c) { return c > 0 ? vertex_of_root[uf.find(c)] : -1; };
    for (int c = 1; c <= n_clusters; ++c) {
        auto& v = graph.vertices[vertex_id(c)];
        v.pixels.insert(v.pixels.end(), cluster_pixels[c].begin(), cluster_pixels[c].end());
    }
    for (const auto& rc : chains) {
        if (!rc.fused) continue;
        auto& v = graph.vertices[vertex_id(rc.a)];
        v.pixels.insert(v.pixels.end(), rc.pixels.begin(), rc.pixels.end());
    }
    for (std::size_t i = 0; i < graph.vertices.size(); ++i) {
        auto& v = graph.vertices[i];
        std::sort(v.pixels.begin(), v.pixels.end(),
                  [](const Pixel& p, const Pixel& q) { return std::tie(p.y, p.x) < std::tie(q.y, q.x); });
        for (const auto& p : v.pixels) graph.vertex_map(p.x, p.y) = static_cast<std::int32_t>(i) + 1;
    }

    for (const auto& rc : chains) {
        if (rc.fused) continue;
        Edge e;
        e.pixels = rc.pixels;
        e.v0 = vertex_id(rc.a);
        e.v1 = vertex_id(rc.b);
        double sum = 0.0;
        std::set<std::int32_t> sides;
        for (const auto& p : e.pixels) {
            if (!edge.empty()) sum += edge(p.x, p.y);
            for (int k = 0; k < 4; ++k) {
                const int x = p.x + kDx4[k];
                const int y = p.y + kDy4[k];
                if (labels.contains(x, y) && labels(x, y) > 0) sides.insert(labels(x, y));
            }
        }
        e.mean_intensity = e.pixels.empty() ? 0.0 : sum / static_cast<double>(e.pixels.size());
        e.sides.assign(sides.begin(), sides.end());
        if (e.v0 >= 0) ++graph.vertices[e.v0].degree;
        if (e.v1 >= 0) ++graph.vertices[e.v1].degree;
        graph.edges.push_back(std::move(e));
    }
    return graph;
}

std::pair<CellGraph, img::LabelMap> prune_weak_edges(const CellGraph& graph, const img::LabelMap& labels,
                                                     const img::ProbMap& edge, double edge_threshold,
                                                     const img::BinaryMask& non_roi, int min_edge_length) {
    if (!non_roi.empty() && !labels.same_shape(non_roi)) throw std::invalid_argument("prune_weak_edges: shape mismatch");
    const int w = labels.width();
    const int h = labels.height();
    img::LabelMap out = labels;
    img::BinaryMask removed(w, h);
    bool any_removed = false;

    auto touches_non_roi = [&](const Edge& e) {
        if (non_roi.empty()) return false;
        for (const auto& p : e.pixels) {
            for (int k = 0; k < 4; ++k) {
                const int x = p.x + kDx4[k];
                const int y = p.y + kDy4[k];
                if (labels.contains(x, y) && labels(x, y) > 0 && non_roi(x, y)) return true;
            }
        }
        return false;
    };

    for (const auto& e : graph.edges) {
        if (e.mean_intensity >= edge_threshold) continue;
        std::size_t begin = 0;
        std::size_t end = e.pixels.size();
        if (touches_non_roi(e)) {
            const long len = static_cast<long>(e.pixels.size());
            const long k = std::min(3L, len - 2);
            if (k <= 0) continue;
            begin = static_cast<std::size_t>((len - k) / 2);
            end = begin + static_cast<std::size_t>(k);
        }
        for (std::size_t i = begin; i < end; ++i) {
            removed(e.pixels[i].x, e.pixels[i].y) = 1;
            any_removed = true;
        }
    }
    if (!any_removed) return {graph, labels};

    // Merge every pair of basins that a removed run now connects.
    const std::int32_t max_label = labels.max_label();
    UnionFind uf(static_cast<std::size_t>(max_label) + 1);
    const img::LabelMap runs = img::connected_components(removed, 4);
    std::vector<std::int32_t> run_label(static_cast<std::size_t>(runs.max_label()) + 1, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto r = runs(x, y);
            if (r == 0) continue;
            for (int k = 0; k < 4; ++k) {
                const int nx = x + kDx4[k];
                const int ny = y + kDy4[k];
                if (!labels.contains(nx, ny) || removed(nx, ny)) continue;
                const auto l = labels(nx, ny);
                if (l == 0) continue;
                if (run_label[r] == 0) {
                    run_label[r] = l;
                } else {
                    uf.unite(run_label[r], l);
                }
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (const auto r = runs(x, y); r > 0 && run_label[r] > 0) out(x, y) = run_label[r];
        }
    }
    // Lower label id survives each merge, then ids are compacted in order.
    std::vector<std::int32_t> compact(static_cast<std::size_t>(max_label) + 1, 0);
    std::int32_t next = 0;
    for (std::int32_t l = 1; l <= max_label; ++l) {
        if (uf.find(l) == l) compact[l] = ++next;
    }
    std::vector<bool> present(static_cast<std::size_t>(max_label) + 1, false);
    for (auto& v : out.data()) {
        if (v > 0) {
            v = compact[uf.find(v)];
        }
    }
    // Drop ids that vanished entirely so the label set stays contiguous.
    for (auto v : out.data()) present[v] = true;
    std::vector<std::int32_t> remap(static_cast<std::size_t>(next) + 1, 0);
    std::int32_t k = 0;
    for (std::int32_t l = 1; l <= next; ++l) {
        if (present[l]) remap[l] = ++k;
    }
    for (auto& v : out.data()) v = remap[v];

    return {extract_graph(out, edge, min_edge_length), out};
}

}  // namespace endo::post
