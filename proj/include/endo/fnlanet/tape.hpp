#pragma once

#include "endo/fnlanet/params.hpp"
#include "endo/fnlanet/tensor.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace endo::nn {

/// Handle to a node on a Tape.
using Var = int;

struct BatchNormOptions {
    bool training = false;
    double momentum = 0.9;  ///< running = momentum * running + (1 - momentum) * batch
    double eps = 1e-3;
    bool renorm = false;
    double r_max = 3.0;
    double d_max = 5.0;
};

/// Reverse-mode tape. Every op appends a node holding its value and a
/// closure that pushes the node's gradient to its inputs; backward() runs
/// the closures newest first. Parameter gradients accumulate into the
/// ParamStore.
class Tape {
public:
    explicit Tape(ParamStore* store = nullptr) : store_(store) {}

    Var constant(Tensor4 value, bool requires_grad = false);

    const Tensor4& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v)).value; }
    /// Gradient of the last backward() pass; zeros if none reached the node.
    const Tensor4& grad(Var v);
    bool requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v)).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Label for the non-finite check; empty disables the check.
    void set_scope(std::string scope) { scope_ = std::move(scope); }
    const std::string& scope() const noexcept { return scope_; }

    /// Seeds d(loss)/d(loss) = 1 for a single-element node and back-propagates.
    void backward(Var loss);

    // Convolutions. Weights are row-major (k*k*cin) x cout with rows ordered
    // (ky, kx, cin). Stride 1 uses same padding and needs an odd k; any other
    // stride uses no padding.
    Var conv2d(Var x, int weight, int bias, int k, int stride);
    /// 2x2 stride-2 transpose convolution, the adjoint of conv2d(k=2, stride=2)
    /// with the same weight layout: rows (ky, kx, cout), columns cin.
    Var conv_transpose2d(Var x, int weight, int bias);

    Var batch_norm(Var x, int gamma, int beta, int running_mean, int running_var, const BatchNormOptions& opt);

    Var elu(Var x);
    Var relu(Var x);
    Var sigmoid(Var x);
    /// Inverted dropout; identity when rate == 0.
    Var dropout(Var x, double rate, std::mt19937_64& rng);

    Var concat(const std::vector<Var>& parts);
    Var add(Var a, Var b);
    /// x * s with s broadcast over channels (s has one channel).
    Var scale_by_map(Var x, Var s);

    /// Row-softmax(scale * Q K^T) V over flattened spatial positions, per
    /// sample. q, k, v share their shape.
    Var attention(Var q, Var k, Var v, double scale = 1.0);
    /// Attention matrix of the last attention() call on this tape, sample `n`.
    const std::vector<double>& last_attention(int n) const { return last_attention_.at(static_cast<std::size_t>(n)); }

    /// Softmax over channels at every pixel.
    Var softmax(Var x);
    /// Mean over pixels of the cross-entropy between softmax(logits) and the
    /// two-class distribution (1 - t, t); logits have 2 channels, t has 1.
    Var softmax_cross_entropy(Var logits, const Tensor4& target);
    /// sum(x * weights); weights share x's shape.
    Var weighted_sum(Var x, const Tensor4& weights);

private:
    struct Node {
        Tensor4 value;
        Tensor4 grad;
        bool requires_grad = false;
        std::function<void()> backward;
    };

    Var push(Tensor4 value, bool requires_grad, std::function<void()> backward = {});
    Tensor4& grad_ref(Var v);
    Param& param(int id);
    bool trainable(int id) const;

    ParamStore* store_;
    std::vector<Node> nodes_;
    std::string scope_;
    std::vector<std::vector<double>> last_attention_;
};

}  // namespace endo::nn
