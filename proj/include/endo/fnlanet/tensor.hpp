#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace endo::nn {

/// NHWC tensor of doubles; element (n, y, x, c) lives at
/// ((n * h + y) * w + x) * c.
struct Tensor4 {
    int n = 0;
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int n_, int h_, int w_, int c_, double fill = 0.0) : n(n_), h(h_), w(w_), c(c_) {
        if (n_ < 0 || h_ < 0 || w_ < 0 || c_ < 0) throw std::invalid_argument("negative tensor dimension");
        data.assign(static_cast<std::size_t>(n_) * h_ * w_ * c_, fill);
    }

    std::size_t size() const noexcept { return data.size(); }
    std::size_t pixels() const noexcept { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    std::size_t sample_size() const noexcept { return pixels() * static_cast<std::size_t>(c); }
    std::size_t index(int in, int y, int x, int ic) const noexcept {
        return ((static_cast<std::size_t>(in) * h + y) * w + x) * c + ic;
    }
    double& operator()(int in, int y, int x, int ic) noexcept { return data[index(in, y, x, ic)]; }
    double operator()(int in, int y, int x, int ic) const noexcept { return data[index(in, y, x, ic)]; }
    double* sample(int in) noexcept { return data.data() + static_cast<std::size_t>(in) * sample_size(); }
    const double* sample(int in) const noexcept { return data.data() + static_cast<std::size_t>(in) * sample_size(); }

    bool same_shape(const Tensor4& o) const noexcept { return n == o.n && h == o.h && w == o.w && c == o.c; }
    std::string shape_string() const {
        return "(" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," + std::to_string(c) + ")";
    }
};

}  // namespace endo::nn
