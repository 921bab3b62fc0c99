#pragma once

#include "endo/imgcore/raster.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace endo::img {

/// Failure reading or writing a raster file.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// 8-bit binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const Image2D& image);
Image2D read_pgm(const std::filesystem::path& path);

/// 8-bit grayscale PNG.
void write_png(const std::filesystem::path& path, const Image2D& image);
Image2D read_png(const std::filesystem::path& path);

/// Reads PNG or PGM by extension.
Image2D read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image2D& image);

/// Interleaved 8-bit RGB raster for overlays.
class RgbImage : public Raster<std::array<std::uint8_t, 3>> {
public:
    using Raster::Raster;
};
void write_png(const std::filesystem::path& path, const RgbImage& image);

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples).
void write_pgm16(const std::filesystem::path& path, const Raster<std::uint16_t>& raster);
Raster<std::uint16_t> read_pgm16(const std::filesystem::path& path);

/// Free-form provenance strings written to the sidecar.
using Provenance = std::map<std::string, std::string>;

/// Sidecar path for a probability map: "<path>.json".
std::filesystem::path sidecar_path(const std::filesystem::path& map_path);

/// Stores round(p * 65535) as 16-bit PGM and writes a JSON sidecar with
/// width, height, pixel_pitch_um and provenance.
void write_probmap(const std::filesystem::path& path, const ProbMap& map, const Provenance& provenance = {});
/// Reads a map written by write_probmap. The sidecar is optional; without it
/// the default pitch is used.
ProbMap read_probmap(const std::filesystem::path& path, Provenance* provenance = nullptr);

/// Label maps as 16-bit PGM. Labels above 65535 are rejected.
void write_labelmap(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_labelmap(const std::filesystem::path& path);

}  // namespace endo::img
