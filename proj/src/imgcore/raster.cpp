#include "endo/imgcore/raster.hpp"

#include <algorithm>
#include <cmath>

namespace endo::img {

void ProbMap::clamp() {
    for (double& v : data()) {
        if (std::isnan(v)) v = 0.0;
        v = std::clamp(v, 0.0, 1.0);
    }
}

bool ProbMap::in_range() const {
    return std::all_of(data().begin(), data().end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count_if(data().begin(), data().end(), [](auto v) { return v != 0; }));
}

std::int32_t LabelMap::max_label() const {
    std::int32_t m = 0;
    for (auto v : data()) m = std::max(m, v);
    return m;
}

ProbMap to_probmap(const Image2D& image) {
    ProbMap out(image.width(), image.height(), 0.0, image.pixel_pitch());
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i] / 255.0;
    return out;
}

Image2D to_image(const ProbMap& map) {
    Image2D out(map.width(), map.height(), 0, map.pixel_pitch());
    for (std::size_t i = 0; i < map.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(map[i], 0.0, 1.0) * 255.0));
    }
    return out;
}

BinaryMask threshold(const ProbMap& map, double level) {
    BinaryMask out(map.width(), map.height());
    for (std::size_t i = 0; i < map.size(); ++i) out[i] = map[i] >= level ? 1 : 0;
    return out;
}

}  // namespace endo::img
