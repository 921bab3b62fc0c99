#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace endo::img {

/// 0.25 mm over 240 rows of the reference microscope field.
inline constexpr double kDefaultPixelPitchUm = 250.0 / 240.0;

/// Row-major 2-D array. Pixel (x, y) lives at index y * width + x.
template <typename T>
class Raster {
public:
    using value_type = T;

    Raster() = default;
    Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
        if (width < 0 || height < 0) {
            throw std::invalid_argument("raster dimensions must be non-negative");
        }
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }
    Raster(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data)) {
        if (width < 0 || height < 0 ||
            data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw std::invalid_argument("raster data length does not match width*height");
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    bool on_border(int x, int y) const noexcept {
        return x == 0 || y == 0 || x == width_ - 1 || y == height_ - 1;
    }
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    T& at(int x, int y) {
        if (!contains(x, y)) throw std::out_of_range("raster coordinate out of range");
        return data_[index(x, y)];
    }
    const T& at(int x, int y) const {
        if (!contains(x, y)) throw std::out_of_range("raster coordinate out of range");
        return data_[index(x, y)];
    }

    /// Value at (x, y) with coordinates clamped into the raster (replicate border).
    const T& clamped(int x, int y) const noexcept {
        x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
        y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
        return data_[index(x, y)];
    }

    std::span<T> pixels() noexcept { return data_; }
    std::span<const T> pixels() const noexcept { return data_; }
    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool same_shape(int width, int height) const noexcept { return width_ == width && height_ == height; }
    template <typename U>
    bool same_shape(const Raster<U>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    bool operator==(const Raster&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// 8-bit grayscale image with isotropic pixel pitch in micrometers.
class Image2D : public Raster<std::uint8_t> {
public:
    Image2D() = default;
    Image2D(int width, int height, std::uint8_t fill = 0, double pixel_pitch_um = kDefaultPixelPitchUm)
        : Raster(width, height, fill) {
        set_pixel_pitch(pixel_pitch_um);
    }

    double pixel_pitch() const noexcept { return pixel_pitch_; }
    void set_pixel_pitch(double pitch_um) {
        if (!(pitch_um > 0.0)) throw std::invalid_argument("pixel pitch must be positive");
        pixel_pitch_ = pitch_um;
    }

    bool operator==(const Image2D&) const = default;

private:
    double pixel_pitch_ = kDefaultPixelPitchUm;
};

/// Per-pixel probability in [0, 1].
class ProbMap : public Raster<double> {
public:
    ProbMap() = default;
    ProbMap(int width, int height, double fill = 0.0, double pixel_pitch_um = kDefaultPixelPitchUm)
        : Raster(width, height, fill) {
        set_pixel_pitch(pixel_pitch_um);
    }
    ProbMap(int width, int height, std::vector<double> data, double pixel_pitch_um = kDefaultPixelPitchUm)
        : Raster(width, height, std::move(data)) {
        set_pixel_pitch(pixel_pitch_um);
    }

    double pixel_pitch() const noexcept { return pixel_pitch_; }
    void set_pixel_pitch(double pitch_um) {
        if (!(pitch_um > 0.0)) throw std::invalid_argument("pixel pitch must be positive");
        pixel_pitch_ = pitch_um;
    }

    /// Clamp every value into [0, 1]; NaN becomes 0.
    void clamp();
    /// True when every value lies in [0, 1].
    bool in_range() const;

    bool operator==(const ProbMap&) const = default;

private:
    double pixel_pitch_ = kDefaultPixelPitchUm;
};

class BinaryMask : public Raster<std::uint8_t> {
public:
    using Raster::Raster;
    std::size_t count() const;
    bool operator==(const BinaryMask&) const = default;
};

/// 0 marks ridge/background, k >= 1 marks superpixel k.
class LabelMap : public Raster<std::int32_t> {
public:
    using Raster::Raster;
    /// Largest label present (0 when there are no regions).
    std::int32_t max_label() const;
    bool operator==(const LabelMap&) const = default;
};

/// Scales an 8-bit image into [0, 1].
ProbMap to_probmap(const Image2D& image);
/// Rounds a probability map to 8 bits.
Image2D to_image(const ProbMap& map);
/// Mask of pixels >= threshold.
BinaryMask threshold(const ProbMap& map, double level);

}  // namespace endo::img
