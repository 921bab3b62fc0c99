#include "endo/fnlanet/network.hpp"

#include <cmath>
#include <stdexcept>

namespace endo::nn {

std::string to_string(Attention a) {
    switch (a) {
        case Attention::none: return "none";
        case Attention::fnla_mul: return "fnla_mul";
        case Attention::fnla_add: return "fnla_add";
        case Attention::fnla_concat: return "fnla_concat";
        case Attention::snla_only: return "snla_only";
    }
    return "none";
}

std::string to_string(Normalization n) { return n == Normalization::batch_renorm ? "batch_renorm" : "batch_norm"; }

Attention attention_from_string(const std::string& s) {
    for (Attention a : {Attention::none, Attention::fnla_mul, Attention::fnla_add, Attention::fnla_concat, Attention::snla_only}) {
        if (to_string(a) == s) return a;
    }
    throw std::invalid_argument("unknown attention mode '" + s + "'");
}

Normalization normalization_from_string(const std::string& s) {
    if (s == "batch_norm") return Normalization::batch_norm;
    if (s == "batch_renorm") return Normalization::batch_renorm;
    throw std::invalid_argument("unknown normalization '" + s + "'");
}

void NetConfig::validate() const {
    if (resolution_stages < 1) throw std::invalid_argument("resolution_stages must be at least 1");
    if (static_cast<int>(blocks_per_stage.size()) != resolution_stages) {
        throw std::invalid_argument("blocks_per_stage needs one entry per resolution stage");
    }
    for (int b : blocks_per_stage) {
        if (b < 1) throw std::invalid_argument("every stage needs at least one block");
    }
    if (growth_rate < 1) throw std::invalid_argument("growth_rate must be at least 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("dropout_rate must be in [0, 1)");
    if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0) || !(bn_eps > 0.0)) throw std::invalid_argument("bad normalization constants");
    if (!(renorm_r_max >= 1.0) || !(renorm_d_max >= 0.0)) throw std::invalid_argument("bad renormalization limits");
    if (!encoder_attention.empty() && static_cast<int>(encoder_attention.size()) != resolution_stages) {
        throw std::invalid_argument("encoder_attention needs one entry per stage");
    }
    if (!decoder_attention.empty() && static_cast<int>(decoder_attention.size()) != resolution_stages) {
        throw std::invalid_argument("decoder_attention needs one entry per stage");
    }
    for (int s = 0; s + 1 < resolution_stages; ++s) {
        if (blocks_per_stage[static_cast<std::size_t>(s)] * growth_rate / 2 < 1) {
            throw std::invalid_argument("transition width rounds to zero at stage " + std::to_string(s));
        }
    }
}

bool NetConfig::encoder_attends(int stage) const {
    if (attention == Attention::none) return false;
    return encoder_attention.empty() || encoder_attention.at(static_cast<std::size_t>(stage));
}

bool NetConfig::decoder_attends(int stage) const {
    if (attention == Attention::none) return false;
    return decoder_attention.empty() || decoder_attention.at(static_cast<std::size_t>(stage));
}

Aggregation NetConfig::aggregation() const {
    switch (attention) {
        case Attention::fnla_add: return Aggregation::add;
        case Attention::fnla_concat: return Aggregation::concat;
        default: return Aggregation::mul;
    }
}

int LayerContext::param(const std::string& path, std::vector<int> shape, int fan_in, bool trainable, double fill) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    const int found = store->find(path);
    if (found >= 0) {
        if (store->at(found).size() != count) throw std::invalid_argument("parameter " + path + " reused with another shape");
        return found;
    }
    std::vector<double> value(count, fill);
    if (fan_in > 0) {
        if (!init_rng) throw std::logic_error("no initialization generator for " + path);
        const double limit = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> u(-limit, limit);
        for (auto& v : value) v = u(*init_rng);
    }
    return store->add(path, std::move(shape), std::move(value), trainable);
}

Feat conv_layer(LayerContext& ctx, const std::string& path, Feat x, int cout, int k, int stride) {
    const int w = ctx.param(path + "/w", {k, k, x.c, cout}, k * k * x.c);
    const int b = ctx.param(path + "/b", {cout}, 0);
    if (!ctx.tape) return {-1, cout};
    ctx.tape->set_scope(path);
    return {ctx.tape->conv2d(x.v, w, b, k, stride), cout};
}

Feat conv_transpose_layer(LayerContext& ctx, const std::string& path, Feat x, int cout) {
    const int w = ctx.param(path + "/w", {2, 2, cout, x.c}, x.c);
    const int b = ctx.param(path + "/b", {cout}, 0);
    if (!ctx.tape) return {-1, cout};
    ctx.tape->set_scope(path);
    return {ctx.tape->conv_transpose2d(x.v, w, b), cout};
}

Feat batch_norm_layer(LayerContext& ctx, const std::string& path, Feat x) {
    const int g = ctx.param(path + "/gamma", {x.c}, 0, true, 1.0);
    const int b = ctx.param(path + "/beta", {x.c}, 0);
    const int m = ctx.param(path + "/mean", {x.c}, 0, false);
    const int v = ctx.param(path + "/var", {x.c}, 0, false, 1.0);
    if (!ctx.tape) return x;
    ctx.tape->set_scope(path);
    BatchNormOptions opt = ctx.bn;
    opt.training = ctx.training;
    return {ctx.tape->batch_norm(x.v, g, b, m, v, opt), x.c};
}

Feat conv_bn_elu(LayerContext& ctx, const std::string& path, Feat x, int cout, int k, int stride) {
    Feat y = batch_norm_layer(ctx, path + "/bn", conv_layer(ctx, path + "/conv", x, cout, k, stride));
    if (ctx.tape) y.v = ctx.tape->elu(y.v);
    return y;
}

namespace {

Feat convt_bn_elu(LayerContext& ctx, const std::string& path, Feat x, int cout) {
    Feat y = batch_norm_layer(ctx, path + "/bn", conv_transpose_layer(ctx, path + "/convt", x, cout));
    if (ctx.tape) y.v = ctx.tape->elu(y.v);
    return y;
}

Feat aggregate(LayerContext& ctx, const std::string& path, Feat x, Feat o, Aggregation mode) {
    switch (mode) {
        case Aggregation::mul: {
            Feat s = conv_layer(ctx, path + "/omega", o, 1, 1, 1);
            if (!ctx.tape) return x;
            return {ctx.tape->scale_by_map(x.v, ctx.tape->sigmoid(s.v)), x.c};
        }
        case Aggregation::add: {
            Feat s = conv_layer(ctx, path + "/omega", o, x.c, 1, 1);
            if (!ctx.tape) return x;
            return {ctx.tape->add(x.v, ctx.tape->relu(s.v)), x.c};
        }
        case Aggregation::concat:
            if (!ctx.tape) return {-1, x.c + o.c};
            return {ctx.tape->concat({x.v, ctx.tape->elu(o.v)}), x.c + o.c};
    }
    return x;
}

Feat attend(LayerContext& ctx, const std::string& path, Feat x, Feat q, Feat k, Feat v, Aggregation mode) {
    Feat o{-1, q.c};
    if (ctx.tape) {
        ctx.tape->set_scope(path + "/attention");
        const double scale = ctx.attention_scale ? 1.0 / std::sqrt(static_cast<double>(q.c)) : 1.0;
        o.v = ctx.tape->attention(q.v, k.v, v.v, scale);
    }
    return aggregate(ctx, path, x, o, mode);
}

}  // namespace

Feat dense_block(LayerContext& ctx, const std::string& path, Feat x, int n_blocks, int growth_rate, bool compression,
                 bool dropout) {
    if (n_blocks < 1) throw std::invalid_argument("dense_block needs at least one block");
    for (int i = 0; i < n_blocks; ++i) {
        const std::string p = path + "/b" + std::to_string(i);
        Feat h = x;
        if (compression) h = conv_bn_elu(ctx, p + "/compress", h, 4 * growth_rate, 1, 1);
        h = conv_bn_elu(ctx, p + "/grow", h, growth_rate, 3, 1);
        if (!ctx.tape) {
            x.c += growth_rate;
            continue;
        }
        if (dropout && ctx.training && ctx.dropout_rate > 0.0) {
            if (!ctx.dropout_rng) throw std::logic_error("dropout needs a generator");
            h.v = ctx.tape->dropout(h.v, ctx.dropout_rate, *ctx.dropout_rng);
        }
        x = {ctx.tape->concat({x.v, h.v}), x.c + growth_rate};
    }
    return x;
}

Feat fnla_block(LayerContext& ctx, const std::string& path, Feat x, Feat y, Aggregation mode) {
    if (ctx.tape) {
        const Tensor4& vx = ctx.tape->value(x.v);
        const Tensor4& vy = ctx.tape->value(y.v);
        if (vy.h * 2 != vx.h || vy.w * 2 != vx.w || vy.n != vx.n) {
            throw std::invalid_argument("fnla_block: y " + vy.shape_string() + " is not half of x " + vx.shape_string());
        }
    }
    const int h = head_width(x.c);
    Feat q = conv_layer(ctx, path + "/theta", x, h, 1, 1);
    Feat k = conv_transpose_layer(ctx, path + "/phi", y, h);
    Feat v = conv_transpose_layer(ctx, path + "/g", y, h);
    return attend(ctx, path, x, q, k, v, mode);
}

Feat snla_block(LayerContext& ctx, const std::string& path, Feat x, Aggregation mode) {
    const int h = head_width(x.c);
    Feat q = conv_layer(ctx, path + "/theta", x, h, 1, 1);
    Feat k = conv_layer(ctx, path + "/phi", x, h, 1, 1);
    Feat v = conv_layer(ctx, path + "/g", x, h, 1, 1);
    return attend(ctx, path, x, q, k, v, mode);
}

Network::Network(NetConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
    config_.validate();
    std::mt19937_64 init(seed);
    LayerContext ctx;
    ctx.store = &store_;
    ctx.init_rng = &init;
    run(ctx, Feat{-1, 1});
}

Feat Network::run(LayerContext& ctx, Feat input) {
    const int S = config_.resolution_stages;
    const int gr = config_.growth_rate;
    const auto& nb = config_.blocks_per_stage;
    const Aggregation mode = config_.aggregation();
    const auto alpha = [&](int s) { return nb[static_cast<std::size_t>(s)] * gr / 2; };

    std::vector<Feat> enc(static_cast<std::size_t>(S));
    std::vector<int> channels;
    Feat x = input;
    for (int s = 0; s < S; ++s) {
        const std::string p = "enc" + std::to_string(s);
        x = dense_block(ctx, p + "/dense", x, nb[static_cast<std::size_t>(s)], gr, s > 0, s > 0);
        enc[static_cast<std::size_t>(s)] = x;
        channels.push_back(x.c);
        if (s + 1 < S) x = conv_bn_elu(ctx, p + "/down", x, alpha(s), 2, 2);
    }
    if (!ctx.tape) encoder_channels_ = channels;

    // Attention runs deepest first so each fNLA sees the attended deeper node.
    for (int s = S - 1; s >= 0; --s) {
        if (!config_.encoder_attends(s)) continue;
        const std::string p = "enc" + std::to_string(s);
        Feat& node = enc[static_cast<std::size_t>(s)];
        if (s == S - 1 || config_.attention == Attention::snla_only) {
            node = snla_block(ctx, p + "/snla", node, mode);
        } else {
            node = fnla_block(ctx, p + "/fnla", node, enc[static_cast<std::size_t>(s + 1)], mode);
        }
    }

    Feat d = enc[static_cast<std::size_t>(S - 1)];
    for (int s = S - 2; s >= 0; --s) {
        const std::string p = "dec" + std::to_string(s);
        Feat skip = conv_bn_elu(ctx, "enc" + std::to_string(s) + "/skip", enc[static_cast<std::size_t>(s)], alpha(s), 1, 1);
        Feat up = convt_bn_elu(ctx, p + "/up", d, alpha(s + 1));
        Feat cat{-1, skip.c + up.c};
        if (ctx.tape) cat.v = ctx.tape->concat({up.v, skip.v});
        d = dense_block(ctx, p + "/dense", cat, nb[static_cast<std::size_t>(s)], gr, true, s > 0);
        if (config_.decoder_attends(s)) d = snla_block(ctx, p + "/snla", d, mode);
    }
    return conv_bn_elu(ctx, "head", d, 2, 1, 1);
}

Var Network::logits(Tape& tape, Var input, bool training) {
    const Tensor4& in = tape.value(input);
    const int div = 1 << (config_.resolution_stages - 1);
    if (in.c != 1 || in.h % div != 0 || in.w % div != 0 || in.h == 0 || in.w == 0) {
        throw std::invalid_argument("network input " + in.shape_string() + " needs one channel and sides divisible by " +
                                    std::to_string(div));
    }
    LayerContext ctx;
    ctx.store = &store_;
    ctx.tape = &tape;
    ctx.dropout_rng = &dropout_rng_;
    ctx.training = training;
    ctx.dropout_rate = config_.dropout_rate;
    ctx.attention_scale = config_.attention_scale;
    ctx.bn.momentum = config_.bn_momentum;
    ctx.bn.eps = config_.bn_eps;
    ctx.bn.renorm = config_.normalization == Normalization::batch_renorm;
    ctx.bn.r_max = config_.renorm_r_max;
    ctx.bn.d_max = config_.renorm_d_max;
    const std::size_t before = store_.size();
    Feat out = run(ctx, Feat{input, 1});
    if (store_.size() != before) throw std::logic_error("forward pass created parameters");
    return out.v;
}

Tensor4 Network::predict(const Tensor4& input) {
    Tape tape(&store_);
    const Var x = tape.constant(input);
    const Var p = tape.softmax(logits(tape, x, false));
    return tape.value(p);
}

}  // namespace endo::nn
