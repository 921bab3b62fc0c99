#include "endo/imgcore/morphology.hpp"

#include <array>
#include <stdexcept>
#include <vector>

namespace endo::img {

namespace {

// Clockwise from east.
constexpr std::array<int, 8> kDx = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr std::array<int, 8> kDy = {0, 1, 1, 1, 0, -1, -1, -1};

bool fg(const BinaryMask& m, int x, int y) { return m.contains(x, y) && m(x, y) != 0; }

int find(std::array<int, 8>& parent, int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
}

bool adjacent8(int a, int b) {
    return std::abs(kDx[a] - kDx[b]) <= 1 && std::abs(kDy[a] - kDy[b]) <= 1;
}
bool adjacent4(int a, int b) {
    return std::abs(kDx[a] - kDx[b]) + std::abs(kDy[a] - kDy[b]) == 1;
}

}  // namespace

LabelMap connected_components(const BinaryMask& mask, int connectivity) {
    if (connectivity != 4 && connectivity != 8) throw std::invalid_argument("connectivity must be 4 or 8");
    LabelMap labels(mask.width(), mask.height(), 0);
    std::int32_t next = 0;
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y) == 0 || labels(x, y) != 0) continue;
            ++next;
            labels(x, y) = next;
            stack.emplace_back(x, y);
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                for (int k = 0; k < 8; ++k) {
                    if (connectivity == 4 && (k % 2) == 1) continue;
                    const int nx = cx + kDx[k];
                    const int ny = cy + kDy[k];
                    if (!fg(mask, nx, ny) || labels(nx, ny) != 0) continue;
                    labels(nx, ny) = next;
                    stack.emplace_back(nx, ny);
                }
            }
        }
    }
    return labels;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    if (radius < 0) throw std::invalid_argument("dilation radius must be non-negative");
    if (radius == 0) return mask;
    const int w = mask.width();
    const int h = mask.height();
    // Separable: square structuring element = row pass then column pass.
    BinaryMask rows(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask(x, y) == 0) continue;
            for (int d = std::max(0, x - radius); d <= std::min(w - 1, x + radius); ++d) rows(d, y) = 1;
        }
    }
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (rows(x, y) == 0) continue;
            for (int d = std::max(0, y - radius); d <= std::min(h - 1, y + radius); ++d) out(x, d) = 1;
        }
    }
    return out;
}

int foreground_neighbors(const BinaryMask& mask, int x, int y) {
    int n = 0;
    for (int k = 0; k < 8; ++k) n += fg(mask, x + kDx[k], y + kDy[k]) ? 1 : 0;
    return n;
}

bool is_simple(const BinaryMask& mask, int x, int y) {
    std::array<bool, 8> on{};
    for (int k = 0; k < 8; ++k) on[k] = fg(mask, x + kDx[k], y + kDy[k]);

    // 8-components of foreground among the neighbors.
    std::array<int, 8> parent{};
    for (int i = 0; i < 8; ++i) parent[i] = i;
    for (int a = 0; a < 8; ++a) {
        for (int b = a + 1; b < 8; ++b) {
            if (on[a] && on[b] && adjacent8(a, b)) parent[find(parent, a)] = find(parent, b);
            if (!on[a] && !on[b] && adjacent4(a, b)) parent[find(parent, a)] = find(parent, b);
        }
    }
    int fg_components = 0;
    std::array<bool, 8> seen{};
    for (int i = 0; i < 8; ++i) {
        if (!on[i]) continue;
        const int r = find(parent, i);
        if (!seen[r]) {
            seen[r] = true;
            ++fg_components;
        }
    }
    // 4-components of background that touch a 4-neighbor of the center.
    int bg_components = 0;
    seen.fill(false);
    for (int i = 0; i < 8; i += 2) {
        if (on[i]) continue;
        const int r = find(parent, i);
        if (!seen[r]) {
            seen[r] = true;
            ++bg_components;
        }
    }
    return fg_components == 1 && bg_components == 1;
}

BinaryMask thin(const BinaryMask& mask, const std::function<bool(int, int)>& may_remove) {
    BinaryMask out = mask;
    // Directional sub-iterations (N, S, E, W border pixels) keep the skeleton
    // centered; candidates are re-checked one at a time so topology is kept.
    constexpr std::array<std::pair<int, int>, 4> kDirs = {{{0, -1}, {0, 1}, {1, 0}, {-1, 0}}};
    bool changed = true;
    std::vector<std::pair<int, int>> candidates;
    while (changed) {
        changed = false;
        for (auto [dx, dy] : kDirs) {
            candidates.clear();
            for (int y = 0; y < out.height(); ++y) {
                for (int x = 0; x < out.width(); ++x) {
                    if (out(x, y) == 0 || fg(out, x + dx, y + dy)) continue;
                    if (foreground_neighbors(out, x, y) <= 1) continue;
                    if (is_simple(out, x, y)) candidates.emplace_back(x, y);
                }
            }
            for (auto [x, y] : candidates) {
                if (foreground_neighbors(out, x, y) <= 1 || !is_simple(out, x, y)) continue;
                if (may_remove && !may_remove(x, y)) continue;
                out(x, y) = 0;
                changed = true;
            }
        }
    }
    return out;
}

}  // namespace endo::img
