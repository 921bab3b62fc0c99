#include "endo/imgcore/filters.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace endo::img {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<double> hann(int n) {
    std::vector<double> w(static_cast<std::size_t>(n), 1.0);
    if (n < 2) return w;
    for (int i = 0; i < n; ++i) {
        w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / (n - 1)));
    }
    return w;
}

}  // namespace

double Kernel::sum() const {
    double s = 0.0;
    for (double v : data()) s += v;
    return s;
}

Kernel gaussian_kernel(int size, double sigma, bool normalized) {
    if (size < 1 || size % 2 == 0) throw std::invalid_argument("gaussian kernel size must be odd and positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be positive");
    Kernel k(size, size);
    const int r = size / 2;
    const double denom = 2.0 * sigma * sigma;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            k(dx + r, dy + r) = std::exp(-(dx * dx + dy * dy) / denom);
        }
    }
    if (normalized) {
        const double s = k.sum();
        for (double& v : k.data()) v /= s;
    }
    return k;
}

ProbMap convolve2d(const ProbMap& input, const Kernel& kernel) {
    if (kernel.width() != kernel.height() || kernel.width() % 2 == 0) {
        throw std::invalid_argument("kernel must be square and odd-sized");
    }
    ProbMap out(input.width(), input.height(), 0.0, input.pixel_pitch());
    const int r = kernel.radius();
    for (int y = 0; y < input.height(); ++y) {
        for (int x = 0; x < input.width(); ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    acc += kernel.tap(dx, dy) * input.clamped(x + dx, y + dy);
                }
            }
            out(x, y) = acc;
        }
    }
    out.clamp();
    return out;
}

ProbMap gaussian_blur(const ProbMap& input, double sigma, int size) {
    if (size < 1 || size % 2 == 0) throw std::invalid_argument("gaussian kernel size must be odd and positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be positive");
    const int r = size / 2;
    std::vector<double> taps(static_cast<std::size_t>(size));
    double total = 0.0;
    for (int d = -r; d <= r; ++d) {
        taps[d + r] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        total += taps[d + r];
    }
    for (double& t : taps) t /= total;

    const int w = input.width();
    const int h = input.height();
    ProbMap horizontal(w, h, 0.0, input.pixel_pitch());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int d = -r; d <= r; ++d) acc += taps[d + r] * input.clamped(x + d, y);
            horizontal(x, y) = acc;
        }
    }
    ProbMap out(w, h, 0.0, input.pixel_pitch());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int d = -r; d <= r; ++d) acc += taps[d + r] * horizontal.clamped(x, y + d);
            out(x, y) = acc;
        }
    }
    out.clamp();
    return out;
}

RadialSpectrum radial_power_spectrum(const ProbMap& map, const SpectrumOptions& options) {
    if (map.empty()) throw std::invalid_argument("radial_power_spectrum: empty map");
    const int w = map.width();
    const int h = map.height();
    const int wc = w / 2 + 1;

    double mean = 0.0;
    for (double v : map.data()) mean += v;
    RadialSpectrum result;
    result.dc = std::abs(mean);
    mean /= static_cast<double>(map.size());

    const std::vector<double> wx = options.hann_window ? hann(w) : std::vector<double>(w, 1.0);
    const std::vector<double> wy = options.hann_window ? hann(h) : std::vector<double>(h, 1.0);

    double* in = fftw_alloc_real(static_cast<std::size_t>(w) * h);
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(wc) * h);
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_2d(h, w, in, out, FFTW_ESTIMATE);
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = options.subtract_mean ? map(x, y) - mean : map(x, y);
            in[static_cast<std::size_t>(y) * w + x] = v * wx[x] * wy[y];
        }
    }
    fftw_execute(plan);

    result.bin_width = 1.0 / static_cast<double>(std::max(w, h));
    const double max_radius = std::sqrt(0.5);
    const std::size_t bins = static_cast<std::size_t>(std::ceil(max_radius / result.bin_width)) + 2;
    std::vector<double> sum(bins, 0.0);
    std::vector<double> weight(bins, 0.0);
    for (int ky = 0; ky < h; ++ky) {
        const double fy = (ky <= h / 2 ? ky : ky - h) / static_cast<double>(h);
        for (int kx = 0; kx < wc; ++kx) {
            if (kx == 0 && ky == 0) continue;
            const double fx = kx / static_cast<double>(w);
            // Columns other than 0 and the Nyquist column stand in for their
            // conjugate mirror in the other half-plane.
            const bool self_mirrored = kx == 0 || (w % 2 == 0 && kx == w / 2);
            const double mult = self_mirrored ? 1.0 : 2.0;
            const std::size_t idx = static_cast<std::size_t>(ky) * wc + kx;
            const double mag = std::hypot(out[idx][0], out[idx][1]);
            const auto bin = static_cast<std::size_t>(std::lround(std::hypot(fx, fy) / result.bin_width));
            if (bin == 0 || bin >= bins) continue;
            sum[bin] += mult * mag;
            weight[bin] += mult;
        }
    }
    result.magnitude.assign(bins, 0.0);
    for (std::size_t b = 1; b < bins; ++b) {
        if (weight[b] > 0.0) result.magnitude[b] = sum[b] / weight[b];
    }
    // Trim empty tail bins.
    while (result.magnitude.size() > 1 && weight[result.magnitude.size() - 1] == 0.0) result.magnitude.pop_back();

    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return result;
}

}  // namespace endo::img
