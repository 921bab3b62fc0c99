#pragma once

#include "endo/fnlanet/params.hpp"
#include "endo/fnlanet/tape.hpp"
#include "endo/fnlanet/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace endo::nn {

enum class Attention { none, fnla_mul, fnla_add, fnla_concat, snla_only };
enum class Normalization { batch_norm, batch_renorm };
enum class Aggregation { mul, add, concat };

std::string to_string(Attention a);
std::string to_string(Normalization n);
Attention attention_from_string(const std::string& s);          ///< throws std::invalid_argument
Normalization normalization_from_string(const std::string& s);  ///< throws std::invalid_argument

struct NetConfig {
    int resolution_stages = 5;
    std::vector<int> blocks_per_stage{4, 8, 12, 16, 20};
    int growth_rate = 5;
    Attention attention = Attention::none;
    double dropout_rate = 0.2;
    Normalization normalization = Normalization::batch_norm;
    double bn_momentum = 0.9;
    double bn_eps = 1e-3;
    double renorm_r_max = 3.0;
    double renorm_d_max = 5.0;
    /// Multiply attention logits by 1/sqrt(head width).
    bool attention_scale = false;
    // Per-node attention toggles. Empty means the default placement: every
    // encoder node and every decoder node when attention is on.
    std::vector<bool> encoder_attention;  ///< one per stage
    std::vector<bool> decoder_attention;  ///< one per decoder stage, index = stage (last entry unused)

    void validate() const;  ///< throws std::invalid_argument
    bool encoder_attends(int stage) const;
    bool decoder_attends(int stage) const;
    Aggregation aggregation() const;
};

/// Attention head width for a C-channel input.
inline int head_width(int channels) { return channels / 8 > 1 ? channels / 8 : 1; }

/// A tensor on a tape together with its channel count. When the context has
/// no tape only the channel arithmetic runs (v stays -1).
struct Feat {
    Var v = -1;
    int c = 0;
};

/// State shared by the layer functions. Parameters are found by path or
/// created (He-uniform weights, zero biases, unit gamma) on first use.
struct LayerContext {
    ParamStore* store = nullptr;
    Tape* tape = nullptr;
    std::mt19937_64* init_rng = nullptr;
    std::mt19937_64* dropout_rng = nullptr;
    bool training = false;
    BatchNormOptions bn;
    double dropout_rate = 0.0;
    bool attention_scale = false;

    int param(const std::string& path, std::vector<int> shape, int fan_in, bool trainable = true, double fill = 0.0);
};

Feat conv_layer(LayerContext& ctx, const std::string& path, Feat x, int cout, int k, int stride);
Feat conv_transpose_layer(LayerContext& ctx, const std::string& path, Feat x, int cout);
Feat batch_norm_layer(LayerContext& ctx, const std::string& path, Feat x);
/// conv + normalization + ELU.
Feat conv_bn_elu(LayerContext& ctx, const std::string& path, Feat x, int cout, int k, int stride);

/// n_blocks x [compression 1x1 (4 GR) + growth 3x3 (GR) + dropout + concat].
Feat dense_block(LayerContext& ctx, const std::string& path, Feat x, int n_blocks, int growth_rate, bool compression,
                 bool dropout);
/// Feedback attention: query from x, key and value upsampled from y (half x's size).
Feat fnla_block(LayerContext& ctx, const std::string& path, Feat x, Feat y, Aggregation mode);
/// Self attention: query, key and value all from x.
Feat snla_block(LayerContext& ctx, const std::string& path, Feat x, Aggregation mode);

class Network {
public:
    Network(NetConfig config, std::uint64_t seed);

    const NetConfig& config() const noexcept { return config_; }
    ParamStore& params() noexcept { return store_; }
    const ParamStore& params() const noexcept { return store_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t count_params() const { return store_.count_trainable(); }
    /// Channel count leaving each encoder dense block, for structural checks.
    const std::vector<int>& encoder_channels() const noexcept { return encoder_channels_; }

    /// Pre-softmax 2-channel map. Input is (n, h, w, 1) with h, w divisible
    /// by 2^(stages-1).
    Var logits(Tape& tape, Var input, bool training);
    /// Per-pixel 2-class probabilities in inference mode.
    Tensor4 predict(const Tensor4& input);

    std::mt19937_64& dropout_rng() noexcept { return dropout_rng_; }

private:
    Feat run(LayerContext& ctx, Feat input);

    NetConfig config_;
    std::uint64_t seed_;
    ParamStore store_;
    std::mt19937_64 dropout_rng_;
    std::vector<int> encoder_channels_;
};

/// Input tensor from a batch of equally sized rasters (one channel).
template <class Range>
Tensor4 stack_maps(const Range& maps) {
    const auto count = static_cast<int>(std::size(maps));
    if (count == 0) return {};
    const auto& first = *std::begin(maps);
    Tensor4 t(count, first.height(), first.width(), 1);
    int n = 0;
    for (const auto& m : maps) {
        if (m.width() != first.width() || m.height() != first.height()) {
            throw std::invalid_argument("stack_maps: images differ in size");
        }
        for (std::size_t i = 0; i < m.size(); ++i) t.sample(n)[i] = static_cast<double>(m[i]);
        ++n;
    }
    return t;
}

}  // namespace endo::nn
