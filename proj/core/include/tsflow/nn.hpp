// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tsflow/tensor.hpp"
#include "tsflow/tensor_io.hpp"

namespace tsflow {

using Rng = std::mt19937_64;

Tensor init_zeros(Shape shape);
Tensor init_constant(Shape shape, double value);
Tensor init_normal(Shape shape, double stddev, Rng& rng);
/// Glorot-uniform weight of shape [fan_in, fan_out].
Tensor init_xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Ordered registry of named learnable tensors.
class ParameterStore {
public:
    /// Registers a tensor as a trainable leaf. Names must be unique.
    Tensor& add(const std::string& name, Tensor value, bool trainable = true);

    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    void set_trainable(const std::string& name, bool trainable);
    bool trainable(const std::string& name) const;

    const std::vector<std::string>& names() const { return order_; }
    std::size_t size() const { return order_.size(); }
    std::size_t scalar_count() const;

    void zero_grad();
    NamedTensors snapshot() const;
    /// Copies values from a loaded set; names and shapes must match exactly.
    void load(const NamedTensors& tensors);

private:
    struct Entry {
        Tensor tensor;
        bool trainable = true;
    };
    std::vector<std::string> order_;
    std::map<std::string, Entry> index_;
};

struct Linear {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out], may be undefined

    Tensor operator()(const Tensor& x) const;
};

/// Registers "<prefix>.weight" (Glorot) and "<prefix>.bias" (zeros).
Linear make_linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                   bool zero_init = false);

}  // namespace tsflow
