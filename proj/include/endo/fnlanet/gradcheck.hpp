#pragma once

#include "endo/fnlanet/params.hpp"
#include "endo/fnlanet/tape.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace endo::nn {

struct GradientCheckReport {
    std::string layer;
    double max_rel_error = 0.0;
    double tolerance = 1e-4;
    std::size_t checked = 0;  ///< entries compared
    bool pass = false;
};

struct GradientCheckOptions {
    double step = 1e-4;
    double tolerance = 1e-4;
    /// Denominator floor of |a - n| / max(|a|, |n|, floor), so entries whose
    /// true gradient is zero are judged on absolute error.
    double floor = 1e-5;
    /// Entries compared per tensor; larger tensors are subsampled.
    std::size_t max_entries = 40;
    std::uint64_t seed = 7;
};

/// Builds a scalar from the input variables on a fresh tape. It must be a
/// pure function of the inputs and the store's trainable values, so any
/// dropout generator has to be reseeded inside.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares backward() against central differences for every input tensor
/// and every trainable parameter the loss reaches. Non-trainable entries of
/// the store are restored before each evaluation.
GradientCheckReport gradient_check(const std::string& layer, ParamStore& store, std::vector<Tensor4> inputs,
                                   const LossBuilder& build, const GradientCheckOptions& opt = {});

}  // namespace endo::nn
