#pragma once

#include <stdexcept>
#include <string>

namespace endo {

/// Runtime failure of an algorithm on valid-looking input (no periodicity,
/// non-finite activations, solver divergence). Invalid arguments use
/// std::invalid_argument instead.
class Fault : public std::runtime_error {
public:
    explicit Fault(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace endo
