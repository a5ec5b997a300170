// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/nn.hpp"

#include <cmath>

#include "tsflow/ops.hpp"

namespace tsflow {

Tensor init_zeros(Shape shape) { return init_constant(std::move(shape), 0.0); }

Tensor init_constant(Shape shape, double value) {
    std::vector<double> v(shape_numel(shape), value);
    return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor init_normal(Shape shape, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = dist(rng);
    return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor init_xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> v(fan_in * fan_out);
    for (double& x : v) x = dist(rng);
    return Tensor::parameter({fan_in, fan_out}, std::move(v));
}

Tensor& ParameterStore::add(const std::string& name, Tensor value, bool trainable) {
    if (index_.count(name)) throw std::invalid_argument("parameter registered twice: " + name);
    if (!value.is_leaf()) throw std::invalid_argument("parameter must be a leaf: " + name);
    value.set_requires_grad(true);
    order_.push_back(name);
    auto& entry = index_[name];
    entry.tensor = std::move(value);
    entry.trainable = trainable;
    return entry.tensor;
}

Tensor& ParameterStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second.tensor;
}

const Tensor& ParameterStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second.tensor;
}

void ParameterStore::set_trainable(const std::string& name, bool trainable) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    it->second.trainable = trainable;
}

bool ParameterStore::trainable(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second.trainable;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, entry] : index_) n += entry.tensor.numel();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& [name, entry] : index_) entry.tensor.zero_grad();
}

NamedTensors ParameterStore::snapshot() const {
    NamedTensors out;
    out.reserve(order_.size());
    for (const auto& name : order_) out.emplace_back(name, index_.at(name).tensor.detach());
    return out;
}

void ParameterStore::load(const NamedTensors& tensors) {
    if (tensors.size() != order_.size())
        throw std::runtime_error("parameter set has " + std::to_string(tensors.size()) + " tensors, model expects " +
                                 std::to_string(order_.size()));
    for (const auto& [name, t] : tensors) {
        Tensor& dst = get(name);
        if (dst.shape() != t.shape())
            throw std::runtime_error("parameter " + name + ": shape " + shape_str(t.shape()) + " vs expected " +
                                     shape_str(dst.shape()));
        auto out = dst.data();
        auto in = t.values();
        std::copy(in.begin(), in.end(), out.begin());
    }
}

Tensor Linear::operator()(const Tensor& x) const { return linear(x, weight, bias); }

Linear make_linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                   bool zero_init) {
    Linear l;
    l.weight = store.add(prefix + ".weight", zero_init ? init_zeros({in, out}) : init_xavier(in, out, rng));
    l.bias = store.add(prefix + ".bias", init_zeros({out}));
    return l;
}

}  // namespace tsflow
