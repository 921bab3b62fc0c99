#include "endo/fnlanet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace endo::nn {

namespace {

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t limit, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (n > limit) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(limit);
        std::sort(idx.begin(), idx.end());
    }
    return idx;
}

}  // namespace

GradientCheckReport gradient_check(const std::string& layer, ParamStore& store, std::vector<Tensor4> inputs,
                                   const LossBuilder& build, const GradientCheckOptions& opt) {
    std::vector<std::vector<double>> frozen;
    for (const auto& p : store.all()) frozen.push_back(p.trainable ? std::vector<double>{} : p.value);
    const auto restore = [&] {
        for (std::size_t i = 0; i < frozen.size(); ++i) {
            if (!store.all()[i].trainable) store.all()[i].value = frozen[i];
        }
    };
    const auto evaluate = [&]() {
        restore();
        Tape tape(&store);
        std::vector<Var> vars;
        for (const auto& t : inputs) vars.push_back(tape.constant(t, true));
        return tape.value(build(tape, vars)).data[0];
    };

    restore();
    store.zero_grad();
    Tape tape(&store);
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.constant(t, true));
    const Var loss = build(tape, vars);
    tape.backward(loss);
    std::vector<Tensor4> input_grads;
    for (Var v : vars) input_grads.push_back(tape.grad(v));

    GradientCheckReport rep;
    rep.layer = layer;
    rep.tolerance = opt.tolerance;
    std::mt19937_64 rng(opt.seed);
    const auto compare = [&](double& slot, double analytic) {
        const double keep = slot;
        slot = keep + opt.step;
        const double up = evaluate();
        slot = keep - opt.step;
        const double down = evaluate();
        slot = keep;
        const double numeric = (up - down) / (2.0 * opt.step);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.floor});
        rep.max_rel_error = std::max(rep.max_rel_error, std::abs(analytic - numeric) / denom);
        ++rep.checked;
    };
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        for (auto i : pick_entries(inputs[t].size(), opt.max_entries, rng)) compare(inputs[t].data[i], input_grads[t].data[i]);
    }
    std::vector<std::vector<double>> param_grads;
    for (const auto& p : store.all()) param_grads.push_back(p.grad);
    for (std::size_t k = 0; k < store.size(); ++k) {
        auto& p = store.all()[k];
        if (!p.trainable) continue;
        for (auto i : pick_entries(p.size(), opt.max_entries, rng)) compare(p.value[i], param_grads[k][i]);
    }
    restore();
    rep.pass = rep.max_rel_error < rep.tolerance;
    return rep;
}

}  // namespace endo::nn
