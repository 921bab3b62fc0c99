#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace endo::nn {

struct Param {
    std::string path;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> m;  ///< Nadam first moment
    std::vector<double> v;  ///< Nadam second moment
    bool trainable = true;

    std::size_t size() const noexcept { return value.size(); }
};

/// Named parameter arrays in creation order, which is also the checkpoint
/// order. Non-trainable entries hold normalization statistics.
class ParamStore {
public:
    /// Throws std::invalid_argument for a duplicate path or a size mismatch.
    int add(const std::string& path, std::vector<int> shape, std::vector<double> value, bool trainable = true);

    int find(const std::string& path) const;  ///< -1 when absent
    Param& at(int id) { return params_.at(static_cast<std::size_t>(id)); }
    const Param& at(int id) const { return params_.at(static_cast<std::size_t>(id)); }
    /// Throws std::out_of_range for an unknown path.
    Param& operator[](const std::string& path);
    const Param& operator[](const std::string& path) const;

    std::vector<Param>& all() noexcept { return params_; }
    const std::vector<Param>& all() const noexcept { return params_; }
    std::size_t size() const noexcept { return params_.size(); }

    std::size_t count_trainable() const;
    void zero_grad();

    /// Nadam steps taken so far.
    long step = 0;

private:
    std::vector<Param> params_;
    std::map<std::string, int> index_;
};

}  // namespace endo::nn
