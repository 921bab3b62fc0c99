#pragma once

#include "endo/biomarkers/biomarkers.hpp"
#include "endo/imgcore/raster.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace endo::synth {

struct MosaicSpec {
    int width = 528;
    int height = 240;
    int target_cell_count = 300;  ///< expected cells inside the image
    int lloyd_iterations = 8;
    double guttae_fraction = 0.0;  ///< fraction of the image area
    double guttae_size_px = 6.0;   ///< mean gutta radius
    double blur_sigma = 0.8;
    double noise_sd = 6.0;         ///< 8-bit intensity units
    std::uint64_t seed = 0;
    /// Regular honeycomb with this row period instead of random seeds; 0 disables.
    double hex_spacing = 0.0;
    double pixel_pitch = img::kDefaultPixelPitchUm;

    /// Throws std::invalid_argument on a degenerate spec.
    void validate() const;
};

using Point2 = std::array<double, 2>;

enum class CellStatus : std::uint8_t { full, partial, occluded };

/// A fully visible cell of the gold standard.
struct GoldCell {
    std::int32_t id = 0;            ///< label in GoldStandard::cells_map
    std::vector<Point2> vertices;   ///< Voronoi polygon corners, counter-clockwise
    std::size_t area_px = 0;        ///< pixels of the cell, skeleton excluded
};

struct GoldStandard {
    /// 0 full-cell body, 0.5 discard, 1 edge.
    img::ProbMap annotation;
    /// 1-px 8-connected Voronoi skeleton.
    img::BinaryMask skeleton;
    /// 4-connected regions between skeleton pixels, labeled 1..K; 0 on the skeleton.
    img::LabelMap cells_map;
    /// status[k] for region k (index 0 unused).
    std::vector<CellStatus> status;
    std::vector<GoldCell> cells;
    img::BinaryMask guttae;
    double pixel_pitch = img::kDefaultPixelPitchUm;
};

struct CellPolygon {
    int seed = 0;
    std::vector<Point2> vertices;  ///< clipped to the image rectangle
    bool clipped = false;          ///< touches the image rectangle
};

struct Mosaic {
    GoldStandard gold;
    std::vector<CellPolygon> polygons;
};

/// Voronoi mosaic with random (Lloyd-relaxed) or honeycomb seeds.
Mosaic generate_mosaic(const MosaicSpec& spec);

/// Random elliptical guttae until spec.guttae_fraction of the image is covered.
GoldStandard insert_guttae(const GoldStandard& gold, const MosaicSpec& spec);
/// Marks `mask` as guttae: a cell more than 30% covered becomes discard area.
GoldStandard apply_guttae(const GoldStandard& gold, const img::BinaryMask& mask);

inline constexpr double kOcclusionThreshold = 0.30;

struct GradedImage {
    img::Image2D image;
    int guttae_grade = 1;
    int blur_grade = 1;
    int total_grade = 2;
};

int guttae_grade(double guttae_fraction);
int blur_grade(double blur_sigma);

/// Bright cell bodies, dark edges, near-black guttae, blur and noise.
GradedImage render_specular(const GoldStandard& gold, const MosaicSpec& spec);

struct TargetSet {
    img::ProbMap edge;
    img::ProbMap body;
    img::ProbMap blob;
    img::ProbMap roi;
};

/// The four supports the targets are built from. Each pixel belongs to
/// exactly one of them.
struct TargetSupports {
    img::BinaryMask body;       ///< full-cell interiors
    img::BinaryMask blob_edge;  ///< edges whose adjacent cells are all full
    img::BinaryMask discard;    ///< occluded cells and the skeleton between them
    img::BinaryMask partial;    ///< everything else (border cells, outer edges)
};
TargetSupports target_supports(const GoldStandard& gold);

TargetSet make_targets(const GoldStandard& gold);

/// Ground-truth biomarkers of the full cells. Empty without full cells.
std::optional<bio::BiomarkerReport> true_biomarkers(const GoldStandard& gold);

/// Everything generated for one image.
struct Sample {
    MosaicSpec spec;
    Mosaic mosaic;  ///< gold includes guttae
    GradedImage image;
    TargetSet targets;
    std::optional<bio::BiomarkerReport> truth;
};

Sample generate_sample(const MosaicSpec& spec);

}  // namespace endo::synth
