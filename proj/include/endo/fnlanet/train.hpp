#pragma once

#include "endo/fnlanet/network.hpp"
#include "endo/imgcore/raster.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace endo::nn {

struct TrainConfig {
    double initial_lr = 1e-3;
    double lr_decay = 0.99;
    int epochs = 200;
    int batch_size = 15;
    int guttae_per_batch = 6;  ///< split evenly over the three complexity levels
    bool augment = true;
    int elastic_grid = 4;         ///< control points per side
    double elastic_sigma = 6.0;  ///< displacement SD in pixels
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    /// Paper schedule for a target role: edge 0.99 over 200 epochs, the
    /// others 0.97 over 100. Throws std::invalid_argument for unknown roles.
    static TrainConfig for_role(const std::string& role);
    void validate() const;
};

/// lr at epoch i (0-based) = initial_lr * lr_decay^i.
double learning_rate(const TrainConfig& cfg, int epoch);

struct TrainingSample {
    img::ProbMap image;   ///< intensities in [0, 1]
    img::ProbMap target;  ///< soft target in [0, 1]
    bool has_guttae = false;
    int total_grade = 2;
};

/// 0 low (total grade <= 2), 1 medium (3-4), 2 high (5-6).
int complexity_level(int total_grade);

/// Sample indices for one batch: the guttae quota first (per level, topped up
/// from other guttae images when a level runs short), the rest uniformly
/// without replacement. Throws std::invalid_argument for an empty dataset.
std::vector<std::size_t> make_batch_indices(const std::vector<TrainingSample>& data, const TrainConfig& cfg,
                                            std::mt19937_64& rng);

img::ProbMap flip_lr(const img::ProbMap& m);
img::ProbMap flip_ud(const img::ProbMap& m);

/// Displacements on a grid x grid lattice of control points spanning the image.
struct ElasticField {
    int grid = 0;
    std::vector<double> dx;
    std::vector<double> dy;
};
ElasticField random_elastic_field(int grid, double sigma, std::mt19937_64& rng);
/// Bilinear resampling at (x + dx, y + dy) with replicated borders.
img::ProbMap elastic_deform(const img::ProbMap& m, const ElasticField& field);

struct Batch {
    Tensor4 images;
    Tensor4 targets;
    std::vector<std::size_t> indices;
};

/// Draws a batch and applies the same random flips and deformation to each
/// image and its target.
Batch make_batch(const std::vector<TrainingSample>& data, const TrainConfig& cfg, std::mt19937_64& rng);

/// One Nadam update of every trainable parameter from its accumulated gradient.
void nadam_step(ParamStore& store, double lr, const TrainConfig& cfg);

/// Forward in training mode, softmax cross-entropy, backward, one Nadam step.
/// Returns the loss; a non-finite loss throws endo::Fault before any update.
double backward_and_step(Network& net, const Tensor4& images, const Tensor4& targets, double lr, const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double learning_rate = 0.0;
    double loss = 0.0;
    int batches = 0;
    double seconds = 0.0;
};

/// Runs cfg.epochs epochs of ceil(N / batch_size) batches. `on_epoch` may
/// return false to stop early. A non-finite loss throws endo::Fault naming
/// the epoch.
std::vector<EpochRecord> train(Network& net, const std::vector<TrainingSample>& data, const TrainConfig& cfg,
                               const std::function<bool(const EpochRecord&)>& on_epoch = {});

}  // namespace endo::nn
