#pragma once

#include "endo/imgcore/raster.hpp"

#include <vector>

namespace endo::img {

/// Square odd-sized filter kernel; (0, 0) is the top-left tap.
class Kernel : public Raster<double> {
public:
    using Raster::Raster;
    int radius() const noexcept { return width() / 2; }
    /// Tap at offset (dx, dy) from the center.
    double tap(int dx, int dy) const noexcept { return (*this)(dx + radius(), dy + radius()); }
    double sum() const;
};

/// Isotropic Gaussian. Unnormalized kernels have a center tap of exactly 1.
/// Throws std::invalid_argument for an even or non-positive size or sigma <= 0.
Kernel gaussian_kernel(int size, double sigma, bool normalized);

/// 2-D filtering with replicate borders (kernel is centered; symmetric
/// kernels make this identical to convolution). Output is clamped to [0, 1].
ProbMap convolve2d(const ProbMap& input, const Kernel& kernel);

/// Same as convolve2d with a normalized Gaussian of the given size, computed
/// separably.
ProbMap gaussian_blur(const ProbMap& input, double sigma, int size);

/// Mean-magnitude radial profile of the 2-D DFT.
struct RadialSpectrum {
    double dc = 0.0;           ///< |F(0,0)|
    double bin_width = 0.0;    ///< cycles/pixel per bin
    std::vector<double> magnitude;  ///< magnitude[0] is unused (DC is separate)

    double frequency(std::size_t bin) const noexcept { return bin_width * static_cast<double>(bin); }
};

struct SpectrumOptions {
    bool hann_window = true;
    bool subtract_mean = true;
};

/// Radial profile of |DFT| binned by radius in units of 1/max(width, height).
/// Throws std::invalid_argument for an empty map.
RadialSpectrum radial_power_spectrum(const ProbMap& map, const SpectrumOptions& options = {});

}  // namespace endo::img
