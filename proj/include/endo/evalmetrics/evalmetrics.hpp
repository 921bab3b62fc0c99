#pragma once

#include "endo/biomarkers/biomarkers.hpp"
#include "endo/imgcore/raster.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace endo::eval {

inline constexpr double kBinarizeThreshold = 0.5;

/// Percent of pixels whose binarized values agree. Throws
/// std::invalid_argument on a shape mismatch.
double pixel_accuracy(const img::ProbMap& pred, const img::ProbMap& target, double threshold = kBinarizeThreshold);

/// Sorensen-Dice of the binarized foregrounds, in percent; 100 when both are empty.
double dice(const img::ProbMap& pred, const img::ProbMap& target, double threshold = kBinarizeThreshold);

using Point = std::array<double, 2>;
using PointSet = std::vector<Point>;

/// Pixel centers (x, y) with value >= threshold, in raster order.
PointSet foreground_points(const img::ProbMap& map, double threshold = kBinarizeThreshold);

/// Modified Hausdorff distance: the larger of the two mean nearest-neighbor
/// distances. Throws std::invalid_argument when either set is empty.
double mhd(const PointSet& a, const PointSet& b);

struct MetricRecord {
    double accuracy = 0.0;
    double dice = 0.0;
    /// Empty when either map has no edge pixels.
    std::optional<double> mhd;
};

MetricRecord evaluate_maps(const img::ProbMap& pred, const img::ProbMap& target);

struct MaeMape {
    double mae = 0.0;   ///< over present estimates only; 0 if none
    double mape = 0.0;  ///< percent; a missing estimate counts as 100%
    std::size_t n_present = 0;
    std::size_t n_missing = 0;
};

/// Throws std::invalid_argument for unequal lengths or a zero truth.
MaeMape mae_mape(std::span<const std::optional<double>> estimates, std::span<const double> truths);
MaeMape mae_mape(std::span<const double> estimates, std::span<const double> truths);

struct BlandAltman {
    std::size_t n = 0;
    double bias = 0.0;  ///< mean of estimate - truth
    double sd = 0.0;    ///< sample SD of the differences
    double lower = 0.0;
    double upper = 0.0;
    double within_fraction = 0.0;
    bool degenerate = false;  ///< sd == 0: the limits collapse onto the bias
};

/// Needs at least three pairs; throws std::invalid_argument otherwise.
BlandAltman bland_altman(std::span<const double> estimates, std::span<const double> truths);

/// mean(n) = mean_a * exp(mean_b * n) + mean_c, sd(n) = sd_a * exp(sd_b * n).
struct ErrorModel {
    double mean_a = 0.0, mean_b = 0.0, mean_c = 0.0;
    double sd_a = 0.0, sd_b = 0.0;
    double mean_rss = 0.0;
    double sd_rss = 0.0;
    std::size_t n_bins = 0;

    double mean_at(double n) const;
    double sd_at(double n) const;
};

struct ErrorModelOptions {
    double bin_width = 25.0;       ///< cells
    double bin_step = 5.0;         ///< sliding step between bins
    std::size_t min_bin_samples = 8;
};

/// Least-squares exponential fits (grid over the rate, linear solve for the
/// rest, then Gauss-Newton). The SD curve is fitted to the sample SD of the
/// errors in sliding cell-count bins. Throws std::invalid_argument for fewer
/// than 10 points or a non-positive count, and endo::Fault when too few bins
/// qualify or the solver diverges.
ErrorModel fit_error_model(std::span<const double> errors, std::span<const double> cell_counts,
                           const ErrorModelOptions& options = {});

/// CSV with columns n,mean,lower,upper (mean -/+ 2 SD) over [n_min, n_max].
std::string error_model_plot_csv(const ErrorModel& model, double n_min, double n_max, int steps);

/// Percent of present reports.
double success_rate(std::span<const std::optional<bio::BiomarkerReport>> reports);

}  // namespace endo::eval
