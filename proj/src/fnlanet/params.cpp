#include "endo/fnlanet/params.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace endo::nn {

int ParamStore::add(const std::string& path, std::vector<int> shape, std::vector<double> value, bool trainable) {
    if (index_.count(path)) throw std::invalid_argument("duplicate parameter path " + path);
    const std::size_t expect =
        std::accumulate(shape.begin(), shape.end(), std::size_t{1}, [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
    if (expect != value.size()) throw std::invalid_argument("parameter " + path + " has the wrong number of values");
    Param p;
    p.path = path;
    p.shape = std::move(shape);
    p.grad.assign(value.size(), 0.0);
    p.m.assign(value.size(), 0.0);
    p.v.assign(value.size(), 0.0);
    p.value = std::move(value);
    p.trainable = trainable;
    params_.push_back(std::move(p));
    const int id = static_cast<int>(params_.size() - 1);
    index_.emplace(path, id);
    return id;
}

int ParamStore::find(const std::string& path) const {
    const auto it = index_.find(path);
    return it == index_.end() ? -1 : it->second;
}

Param& ParamStore::operator[](const std::string& path) {
    const int id = find(path);
    if (id < 0) throw std::out_of_range("no parameter " + path);
    return at(id);
}

const Param& ParamStore::operator[](const std::string& path) const {
    const int id = find(path);
    if (id < 0) throw std::out_of_range("no parameter " + path);
    return at(id);
}

std::size_t ParamStore::count_trainable() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.trainable ? p.size() : 0;
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

}  // namespace endo::nn
