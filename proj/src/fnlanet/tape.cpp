#include "endo/fnlanet/tape.hpp"

#include "endo/imgcore/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>

namespace endo::nn {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using CMapM = Eigen::Map<const Mat>;
using Idx = Eigen::Index;

struct ConvGeom {
    int k, stride, pad, in_h, in_w, cin, out_h, out_w;
};

// Patch matrix of one sample: rows are output pixels, columns (ky, kx, cin).
void im2col(const double* x, const ConvGeom& g, Mat& cols) {
    cols.setZero(static_cast<Idx>(g.out_h) * g.out_w, static_cast<Idx>(g.k) * g.k * g.cin);
    for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
            double* row = cols.data() + (static_cast<Idx>(oy) * g.out_w + ox) * cols.cols();
            for (int ky = 0; ky < g.k; ++ky) {
                const int iy = oy * g.stride + ky - g.pad;
                if (iy < 0 || iy >= g.in_h) continue;
                for (int kx = 0; kx < g.k; ++kx) {
                    const int ix = ox * g.stride + kx - g.pad;
                    if (ix < 0 || ix >= g.in_w) continue;
                    const double* src = x + (static_cast<std::size_t>(iy) * g.in_w + ix) * g.cin;
                    std::copy(src, src + g.cin, row + (ky * g.k + kx) * g.cin);
                }
            }
        }
    }
}

void col2im_add(const Mat& cols, const ConvGeom& g, double* dx) {
    for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
            const double* row = cols.data() + (static_cast<Idx>(oy) * g.out_w + ox) * cols.cols();
            for (int ky = 0; ky < g.k; ++ky) {
                const int iy = oy * g.stride + ky - g.pad;
                if (iy < 0 || iy >= g.in_h) continue;
                for (int kx = 0; kx < g.k; ++kx) {
                    const int ix = ox * g.stride + kx - g.pad;
                    if (ix < 0 || ix >= g.in_w) continue;
                    double* dst = dx + (static_cast<std::size_t>(iy) * g.in_w + ix) * g.cin;
                    const double* src = row + (ky * g.k + kx) * g.cin;
                    for (int c = 0; c < g.cin; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

bool all_finite(const Tensor4& t) {
    return std::all_of(t.data.begin(), t.data.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

Var Tape::push(Tensor4 value, bool requires_grad, std::function<void()> backward) {
    if (!scope_.empty() && !all_finite(value)) throw Fault("non-finite activation in " + scope_);
    nodes_.push_back(Node{std::move(value), Tensor4{}, requires_grad, std::move(backward)});
    return static_cast<Var>(nodes_.size() - 1);
}

Var Tape::constant(Tensor4 value, bool requires_grad) { return push(std::move(value), requires_grad); }

Tensor4& Tape::grad_ref(Var v) {
    Node& node = nodes_.at(static_cast<std::size_t>(v));
    if (node.grad.size() != node.value.size()) {
        node.grad = Tensor4(node.value.n, node.value.h, node.value.w, node.value.c);
    }
    return node.grad;
}

const Tensor4& Tape::grad(Var v) { return grad_ref(v); }

Param& Tape::param(int id) {
    if (!store_) throw std::logic_error("tape has no parameter store");
    return store_->at(id);
}

bool Tape::trainable(int id) const { return store_ && store_->at(id).trainable; }

void Tape::backward(Var loss) {
    if (value(loss).size() != 1) throw std::invalid_argument("backward needs a scalar loss");
    for (auto& node : nodes_) {
        if (!node.grad.data.empty()) std::fill(node.grad.data.begin(), node.grad.data.end(), 0.0);
    }
    grad_ref(loss).data[0] = 1.0;
    for (auto i = static_cast<Var>(nodes_.size()) - 1; i >= 0; --i) {
        auto& node = nodes_[static_cast<std::size_t>(i)];
        if (node.backward && node.requires_grad && !node.grad.data.empty()) node.backward();
    }
}

Var Tape::conv2d(Var x, int weight, int bias, int k, int stride) {
    const Tensor4& in = value(x);
    const Param& w = param(weight);
    if (k < 1 || stride < 1) throw std::invalid_argument("conv2d: bad kernel size or stride");
    if (stride == 1 && k % 2 == 0) throw std::invalid_argument("conv2d: same padding needs an odd kernel");
    const int pad = stride == 1 ? (k - 1) / 2 : 0;
    const auto rows = static_cast<std::size_t>(k) * k * in.c;
    if (w.size() % rows != 0 || w.size() == 0) {
        throw std::invalid_argument("conv2d: weights do not match " + std::to_string(in.c) + " input channels");
    }
    const int cout = static_cast<int>(w.size() / rows);
    if (param(bias).size() != static_cast<std::size_t>(cout)) throw std::invalid_argument("conv2d: bias size");
    if (stride > 1 && (in.h % stride != 0 || in.w % stride != 0)) {
        throw std::invalid_argument("conv2d: input " + in.shape_string() + " not divisible by the stride");
    }
    ConvGeom g{k, stride, pad, in.h, in.w, in.c, (in.h + 2 * pad - k) / stride + 1, (in.w + 2 * pad - k) / stride + 1};
    Tensor4 out(in.n, g.out_h, g.out_w, cout);
    const CMapM W(w.value.data(), static_cast<Idx>(rows), cout);
    const Eigen::Map<const Eigen::RowVectorXd> B(param(bias).value.data(), cout);
    const bool pointwise = k == 1 && stride == 1;
    Mat cols;
    for (int n = 0; n < in.n; ++n) {
        MapM Y(out.sample(n), static_cast<Idx>(g.out_h) * g.out_w, cout);
        if (pointwise) {
            Y.noalias() = CMapM(in.sample(n), static_cast<Idx>(in.pixels()), in.c) * W;
        } else {
            im2col(in.sample(n), g, cols);
            Y.noalias() = cols * W;
        }
        Y.rowwise() += B;
    }
    const bool rg = requires_grad(x) || trainable(weight) || trainable(bias);
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), rg, [this, self, x, weight, bias, g, rows, cout, pointwise] {
        const Tensor4& in = value(x);
        const Tensor4& dy = nodes_[static_cast<std::size_t>(self)].grad;
        Param& w = param(weight);
        Param& b = param(bias);
        const CMapM W(w.value.data(), static_cast<Idx>(rows), cout);
        const bool need_dx = requires_grad(x);
        Mat cols;
        Mat dW = Mat::Zero(static_cast<Idx>(rows), cout);
        Eigen::RowVectorXd dB = Eigen::RowVectorXd::Zero(cout);
        for (int n = 0; n < in.n; ++n) {
            const CMapM dY(dy.sample(n), static_cast<Idx>(g.out_h) * g.out_w, cout);
            dB += dY.colwise().sum();
            if (pointwise) {
                const CMapM X(in.sample(n), static_cast<Idx>(in.pixels()), in.c);
                dW.noalias() += X.transpose() * dY;
                if (need_dx) MapM(grad_ref(x).sample(n), static_cast<Idx>(in.pixels()), in.c).noalias() += dY * W.transpose();
            } else {
                im2col(in.sample(n), g, cols);
                dW.noalias() += cols.transpose() * dY;
                if (need_dx) {
                    const Mat dcols = dY * W.transpose();
                    col2im_add(dcols, g, grad_ref(x).sample(n));
                }
            }
        }
        if (w.trainable) {
            for (std::size_t i = 0; i < w.size(); ++i) w.grad[i] += dW.data()[i];
        }
        if (b.trainable) {
            for (int i = 0; i < cout; ++i) b.grad[static_cast<std::size_t>(i)] += dB(i);
        }
    });
}

Var Tape::conv_transpose2d(Var x, int weight, int bias) {
    const Tensor4& in = value(x);
    const Param& w = param(weight);
    if (w.size() == 0 || w.size() % (4 * static_cast<std::size_t>(in.c)) != 0) {
        throw std::invalid_argument("conv_transpose2d: weights do not match " + std::to_string(in.c) + " input channels");
    }
    const int cout = static_cast<int>(w.size() / (4 * static_cast<std::size_t>(in.c)));
    if (param(bias).size() != static_cast<std::size_t>(cout)) throw std::invalid_argument("conv_transpose2d: bias size");
    Tensor4 out(in.n, 2 * in.h, 2 * in.w, cout);
    const CMapM W(w.value.data(), 4 * static_cast<Idx>(cout), in.c);
    const double* b = param(bias).value.data();
    for (int n = 0; n < in.n; ++n) {
        const Mat Z = CMapM(in.sample(n), static_cast<Idx>(in.pixels()), in.c) * W.transpose();
        for (int y = 0; y < in.h; ++y) {
            for (int x0 = 0; x0 < in.w; ++x0) {
                const double* z = Z.data() + (static_cast<Idx>(y) * in.w + x0) * Z.cols();
                for (int ky = 0; ky < 2; ++ky) {
                    for (int kx = 0; kx < 2; ++kx) {
                        double* o = &out(n, 2 * y + ky, 2 * x0 + kx, 0);
                        const double* zz = z + (ky * 2 + kx) * cout;
                        for (int c = 0; c < cout; ++c) o[c] = zz[c] + b[c];
                    }
                }
            }
        }
    }
    const bool rg = requires_grad(x) || trainable(weight) || trainable(bias);
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), rg, [this, self, x, weight, bias, cout] {
        const Tensor4& in = value(x);
        const Tensor4& dy = nodes_[static_cast<std::size_t>(self)].grad;
        Param& w = param(weight);
        Param& b = param(bias);
        const CMapM W(w.value.data(), 4 * static_cast<Idx>(cout), in.c);
        Mat dW = Mat::Zero(4 * static_cast<Idx>(cout), in.c);
        std::vector<double> dB(static_cast<std::size_t>(cout), 0.0);
        Mat dZ(static_cast<Idx>(in.pixels()), 4 * static_cast<Idx>(cout));
        for (int n = 0; n < in.n; ++n) {
            for (int y = 0; y < in.h; ++y) {
                for (int x0 = 0; x0 < in.w; ++x0) {
                    double* z = dZ.data() + (static_cast<Idx>(y) * in.w + x0) * dZ.cols();
                    for (int ky = 0; ky < 2; ++ky) {
                        for (int kx = 0; kx < 2; ++kx) {
                            const double* g = dy.data.data() + dy.index(n, 2 * y + ky, 2 * x0 + kx, 0);
                            for (int c = 0; c < cout; ++c) {
                                z[(ky * 2 + kx) * cout + c] = g[c];
                                dB[static_cast<std::size_t>(c)] += g[c];
                            }
                        }
                    }
                }
            }
            const CMapM X(in.sample(n), static_cast<Idx>(in.pixels()), in.c);
            dW.noalias() += dZ.transpose() * X;
            if (requires_grad(x)) MapM(grad_ref(x).sample(n), static_cast<Idx>(in.pixels()), in.c).noalias() += dZ * W;
        }
        if (w.trainable) {
            for (std::size_t i = 0; i < w.size(); ++i) w.grad[i] += dW.data()[i];
        }
        if (b.trainable) {
            for (std::size_t i = 0; i < dB.size(); ++i) b.grad[i] += dB[i];
        }
    });
}

Var Tape::batch_norm(Var x, int gamma, int beta, int running_mean, int running_var, const BatchNormOptions& opt) {
    using Arr = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Row = Eigen::Array<double, 1, Eigen::Dynamic>;
    const Tensor4& in = value(x);
    const int C = in.c;
    for (int id : {gamma, beta, running_mean, running_var}) {
        if (param(id).size() != static_cast<std::size_t>(C)) throw std::invalid_argument("batch_norm: channel mismatch");
    }
    const auto M = static_cast<Idx>(in.size() / static_cast<std::size_t>(std::max(C, 1)));
    const Eigen::Map<const Arr> X(in.data.data(), M, C);
    const Eigen::Map<const Row> g(param(gamma).value.data(), C);
    const Eigen::Map<const Row> b(param(beta).value.data(), C);
    Eigen::Map<Row> rm(param(running_mean).value.data(), C);
    Eigen::Map<Row> rv(param(running_var).value.data(), C);
    const bool batch_stats = opt.training && M > 0;

    Row mean = rm;
    Row var = rv;
    Row rscale = Row::Ones(C);
    Row shift = Row::Zero(C);
    if (batch_stats) {
        mean = X.colwise().sum() / static_cast<double>(M);
        var = (X.rowwise() - mean).square().colwise().sum() / static_cast<double>(M);
        if (opt.renorm) {
            const Row run_std = (rv + opt.eps).sqrt();
            rscale = ((var + opt.eps).sqrt() / run_std).cwiseMax(1.0 / opt.r_max).cwiseMin(opt.r_max);
            shift = ((mean - rm) / run_std).cwiseMax(-opt.d_max).cwiseMin(opt.d_max);
        }
    }
    const Row inv_std = (var + opt.eps).rsqrt();
    auto xhat = std::make_shared<Arr>((X.rowwise() - mean).rowwise() * inv_std);
    Tensor4 out(in.n, in.h, in.w, C);
    Eigen::Map<Arr>(out.data.data(), M, C) = (xhat->rowwise() * (g * rscale)).rowwise() + (g * shift + b);
    if (batch_stats) {
        rm = opt.momentum * rm + (1.0 - opt.momentum) * mean;
        rv = opt.momentum * rv + (1.0 - opt.momentum) * var;
    }
    const bool rg = requires_grad(x) || trainable(gamma) || trainable(beta);
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), rg, [this, self, x, gamma, beta, C, M, batch_stats, xhat, inv_std, rscale, shift] {
        const Eigen::Map<const Arr> dY(nodes_[static_cast<std::size_t>(self)].grad.data.data(), M, C);
        Param& pg = param(gamma);
        Param& pb = param(beta);
        const Eigen::Map<const Row> g(pg.value.data(), C);
        const Row dbeta = dY.colwise().sum();
        const Row dy_xh = (dY * *xhat).colwise().sum();
        if (pg.trainable) Eigen::Map<Row>(pg.grad.data(), C) += rscale * dy_xh + shift * dbeta;
        if (pb.trainable) Eigen::Map<Row>(pb.grad.data(), C) += dbeta;
        if (!requires_grad(x)) return;
        Eigen::Map<Arr> dX(grad_ref(x).data.data(), M, C);
        const Row gr = g * rscale;
        if (batch_stats) {
            const double m = static_cast<double>(M);
            const Row sum_dxh = gr * dbeta;
            const Row sum_dxh_xh = gr * dy_xh;
            dX += (((dY.rowwise() * gr) * m).rowwise() - sum_dxh - xhat->rowwise() * sum_dxh_xh).rowwise() * (inv_std / m);
        } else {
            dX += dY.rowwise() * (gr * inv_std);
        }
    });
}

Var Tape::elu(Var x) {
    Tensor4 out = value(x);
    for (auto& v : out.data) v = v > 0.0 ? v : std::expm1(v);
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), requires_grad(x), [this, self, x] {
        const Node& node = nodes_[static_cast<std::size_t>(self)];
        Tensor4& dx = grad_ref(x);
        const Tensor4& in = value(x);
        for (std::size_t i = 0; i < dx.size(); ++i) {
            dx.data[i] += node.grad.data[i] * (in.data[i] > 0.0 ? 1.0 : node.value.data[i] + 1.0);
        }
    });
}

Var Tape::relu(Var x) {
    Tensor4 out = value(x);
    for (auto& v : out.data) v = std::max(v, 0.0);
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), requires_grad(x), [this, self, x] {
        const Node& node = nodes_[static_cast<std::size_t>(self)];
        Tensor4& dx = grad_ref(x);
        const Tensor4& in = value(x);
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += in.data[i] > 0.0 ? node.grad.data[i] : 0.0;
    });
}

Var Tape::sigmoid(Var x) {
    Tensor4 out = value(x);
    for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), requires_grad(x), [this, self, x] {
        const Node& node = nodes_[static_cast<std::size_t>(self)];
        Tensor4& dx = grad_ref(x);
        for (std::size_t i = 0; i < dx.size(); ++i) {
            const double s = node.value.data[i];
            dx.data[i] += node.grad.data[i] * s * (1.0 - s);
        }
    });
}

Var Tape::dropout(Var x, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw std::invalid_argument("dropout rate must be below 1");
    const double keep = 1.0 - rate;
    auto mask = std::make_shared<std::vector<double>>(value(x).size());
    std::bernoulli_distribution coin(keep);
    for (auto& m : *mask) m = coin(rng) ? 1.0 / keep : 0.0;
    Tensor4 out = value(x);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= (*mask)[i];
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), requires_grad(x), [this, self, x, mask] {
        const Node& node = nodes_[static_cast<std::size_t>(self)];
        Tensor4& dx = grad_ref(x);
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += node.grad.data[i] * (*mask)[i];
    });
}

Var Tape::concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat of nothing");
    const Tensor4& first = value(parts.front());
    int C = 0;
    bool rg = false;
    for (Var p : parts) {
        const Tensor4& t = value(p);
        if (t.n != first.n || t.h != first.h || t.w != first.w) {
            throw std::invalid_argument("concat: " + t.shape_string() + " vs " + first.shape_string());
        }
        C += t.c;
        rg = rg || requires_grad(p);
    }
    Tensor4 out(first.n, first.h, first.w, C);
    const std::size_t px = static_cast<std::size_t>(first.n) * first.pixels();
    int off = 0;
    for (Var p : parts) {
        const Tensor4& t = value(p);
        for (std::size_t i = 0; i < px; ++i) {
            std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(i * t.c),
                      t.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * t.c), out.data.begin() + static_cast<std::ptrdiff_t>(i * C + off));
        }
        off += t.c;
    }
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), rg, [this, self, parts, C, px] {
        int off = 0;
        for (Var p : parts) {
            const int pc = value(p).c;
            if (requires_grad(p)) {
                const Tensor4& g = nodes_[static_cast<std::size_t>(self)].grad;
                Tensor4& dp = grad_ref(p);
                for (std::size_t i = 0; i < px; ++i) {
                    for (int c = 0; c < pc; ++c) dp.data[i * pc + c] += g.data[i * C + off + c];
                }
            }
            off += pc;
        }
    });
}

Var Tape::add(Var a, Var b) {
    if (!value(a).same_shape(value(b))) throw std::invalid_argument("add: shape mismatch");
    Tensor4 out = value(a);
    const Tensor4& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += vb.data[i];
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), requires_grad(a) || requires_grad(b), [this, self, a, b] {
        for (Var p : {a, b}) {
            if (!requires_grad(p)) continue;
            const Tensor4& g = nodes_[static_cast<std::size_t>(self)].grad;
            Tensor4& d = grad_ref(p);
            for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += g.data[i];
        }
    });
}

Var Tape::scale_by_map(Var x, Var s) {
    const Tensor4& vx = value(x);
    const Tensor4& vs = value(s);
    if (vs.c != 1 || vs.n != vx.n || vs.h != vx.h || vs.w != vx.w) throw std::invalid_argument("scale_by_map: shape mismatch");
    Tensor4 out = vx;
    const std::size_t px = static_cast<std::size_t>(vx.n) * vx.pixels();
    for (std::size_t i = 0; i < px; ++i) {
        for (int c = 0; c < vx.c; ++c) out.data[i * vx.c + c] *= vs.data[i];
    }
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), requires_grad(x) || requires_grad(s), [this, self, x, s, px] {
        const Tensor4& g = nodes_[static_cast<std::size_t>(self)].grad;
        const Tensor4& vx = value(x);
        const Tensor4& vs = value(s);
        const int C = vx.c;
        if (requires_grad(x)) {
            Tensor4& dx = grad_ref(x);
            for (std::size_t i = 0; i < px; ++i) {
                for (int c = 0; c < C; ++c) dx.data[i * C + c] += g.data[i * C + c] * vs.data[i];
            }
        }
        if (requires_grad(s)) {
            Tensor4& ds = grad_ref(s);
            for (std::size_t i = 0; i < px; ++i) {
                double acc = 0.0;
                for (int c = 0; c < C; ++c) acc += g.data[i * C + c] * vx.data[i * C + c];
                ds.data[i] += acc;
            }
        }
    });
}

Var Tape::attention(Var q, Var k, Var v, double scale) {
    const Tensor4& Q = value(q);
    const Tensor4& K = value(k);
    const Tensor4& V = value(v);
    if (!Q.same_shape(K) || !Q.same_shape(V)) throw std::invalid_argument("attention: q, k, v differ in shape");
    const auto P = static_cast<Idx>(Q.pixels());
    const Idx D = Q.c;
    auto probs = std::make_shared<std::vector<Mat>>(static_cast<std::size_t>(Q.n));
    Tensor4 out(Q.n, Q.h, Q.w, Q.c);
    last_attention_.assign(static_cast<std::size_t>(Q.n), {});
    for (int n = 0; n < Q.n; ++n) {
        Mat S = scale * (CMapM(Q.sample(n), P, D) * CMapM(K.sample(n), P, D).transpose());
        for (Idx r = 0; r < P; ++r) {
            auto row = S.row(r);
            const double mx = row.maxCoeff();
            row = (row.array() - mx).exp();
            row /= row.sum();
        }
        MapM(out.sample(n), P, D).noalias() = S * CMapM(V.sample(n), P, D);
        last_attention_[static_cast<std::size_t>(n)].assign(S.data(), S.data() + S.size());
        (*probs)[static_cast<std::size_t>(n)] = std::move(S);
    }
    const bool rg = requires_grad(q) || requires_grad(k) || requires_grad(v);
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), rg, [this, self, q, k, v, scale, probs, P, D] {
        const Tensor4& g = nodes_[static_cast<std::size_t>(self)].grad;
        const Tensor4& Q = value(q);
        const Tensor4& K = value(k);
        const Tensor4& V = value(v);
        for (int n = 0; n < Q.n; ++n) {
            const Mat& A = (*probs)[static_cast<std::size_t>(n)];
            const CMapM dO(g.sample(n), P, D);
            if (requires_grad(v)) MapM(grad_ref(v).sample(n), P, D).noalias() += A.transpose() * dO;
            if (!requires_grad(q) && !requires_grad(k)) continue;
            Mat dA = dO * CMapM(V.sample(n), P, D).transpose();
            const Eigen::VectorXd rowdot = (dA.array() * A.array()).rowwise().sum();
            Mat dS = A.array() * (dA.colwise() - rowdot).array();
            dS *= scale;
            if (requires_grad(q)) MapM(grad_ref(q).sample(n), P, D).noalias() += dS * CMapM(K.sample(n), P, D);
            if (requires_grad(k)) MapM(grad_ref(k).sample(n), P, D).noalias() += dS.transpose() * CMapM(Q.sample(n), P, D);
        }
    });
}

Var Tape::softmax(Var x) {
    Tensor4 out = value(x);
    const int C = out.c;
    const std::size_t px = out.size() / static_cast<std::size_t>(std::max(C, 1));
    for (std::size_t i = 0; i < px; ++i) {
        double* z = out.data.data() + i * C;
        const double mx = *std::max_element(z, z + C);
        double s = 0.0;
        for (int c = 0; c < C; ++c) s += (z[c] = std::exp(z[c] - mx));
        for (int c = 0; c < C; ++c) z[c] /= s;
    }
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), requires_grad(x), [this, self, x, C, px] {
        const Node& node = nodes_[static_cast<std::size_t>(self)];
        Tensor4& dx = grad_ref(x);
        for (std::size_t i = 0; i < px; ++i) {
            const double* p = node.value.data.data() + i * C;
            const double* g = node.grad.data.data() + i * C;
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += p[c] * g[c];
            for (int c = 0; c < C; ++c) dx.data[i * C + c] += p[c] * (g[c] - dot);
        }
    });
}

Var Tape::softmax_cross_entropy(Var logits, const Tensor4& target) {
    const Tensor4& z = value(logits);
    if (z.c != 2 || target.c != 1 || z.n != target.n || z.h != target.h || z.w != target.w) {
        throw std::invalid_argument("softmax_cross_entropy: logits " + z.shape_string() + " vs target " +
                                    target.shape_string());
    }
    const std::size_t px = static_cast<std::size_t>(z.n) * z.pixels();
    auto probs = std::make_shared<std::vector<double>>(2 * px);
    double loss = 0.0;
    for (std::size_t i = 0; i < px; ++i) {
        const double a = z.data[2 * i];
        const double b = z.data[2 * i + 1];
        const double mx = std::max(a, b);
        const double lse = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
        const double t = target.data[i];
        loss -= (1.0 - t) * (a - lse) + t * (b - lse);
        (*probs)[2 * i] = std::exp(a - lse);
        (*probs)[2 * i + 1] = std::exp(b - lse);
    }
    loss /= static_cast<double>(std::max<std::size_t>(px, 1));
    auto tgt = std::make_shared<std::vector<double>>(target.data);
    Tensor4 out(1, 1, 1, 1, loss);
    const Var self = static_cast<Var>(nodes_.size());
    return push(std::move(out), requires_grad(logits), [this, self, logits, probs, tgt, px] {
        const double g = nodes_[static_cast<std::size_t>(self)].grad.data[0] / static_cast<double>(std::max<std::size_t>(px, 1));
        Tensor4& dz = grad_ref(logits);
        for (std::size_t i = 0; i < px; ++i) {
            const double t = (*tgt)[i];
            dz.data[2 * i] += g * ((*probs)[2 * i] - (1.0 - t));
            dz.data[2 * i + 1] += g * ((*probs)[2 * i + 1] - t);
        }
    });
}

Var Tape::weighted_sum(Var x, const Tensor4& weights) {
    const Tensor4& vx = value(x);
    if (!vx.same_shape(weights)) throw std::invalid_argument("weighted_sum: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < vx.size(); ++i) s += vx.data[i] * weights.data[i];
    auto w = std::make_shared<std::vector<double>>(weights.data);
    const Var self = static_cast<Var>(nodes_.size());
    return push(Tensor4(1, 1, 1, 1, s), requires_grad(x), [this, self, x, w] {
        const double g = nodes_[static_cast<std::size_t>(self)].grad.data[0];
        Tensor4& dx = grad_ref(x);
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += g * (*w)[i];
    });
}

}  // namespace endo::nn
