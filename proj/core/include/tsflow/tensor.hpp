// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tsflow {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised when operand shapes are incompatible with an operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when NaN or Inf reaches a checked boundary.
class NonFiniteError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
    bool is_leaf() const { return parents.empty(); }
};

}  // namespace detail

/// Dense row-major array of doubles with optional reverse-mode gradient tracking.
///
/// Copies share the underlying node (handle semantics). Values are immutable once an
/// operation has consumed them; only leaves expose mutable storage, which the optimizer
/// and data loaders use.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor parameter(Shape shape, std::vector<double> values);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t i) const;
    std::size_t numel() const;

    std::span<const double> values() const;
    /// Mutable access to a leaf's storage. Throws for results of operations.
    std::span<double> data();
    double item() const;
    double at(std::size_t flat) const { return values()[flat]; }

    bool requires_grad() const;
    Tensor& set_requires_grad(bool flag);
    bool is_leaf() const;
    const char* op_name() const;

    /// Accumulated gradient; all zeros when nothing flowed into this tensor.
    std::vector<double> grad() const;
    bool has_grad() const;
    void zero_grad();

    /// Value copy with no graph history.
    Tensor detach() const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    static Tensor from_node(std::shared_ptr<detail::Node> node);

private:
    std::shared_ptr<detail::Node> node_;
};

/// Runs reverse-mode accumulation from a scalar loss into every participating leaf.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

void require_finite(const Tensor& t, std::string_view where);
bool all_finite(std::span<const double> values);

namespace detail {

using BackwardFn = std::function<void(Node&)>;

/// Builds an operation result; records parents only when grad mode is on and some
/// input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs, const char* op,
                   BackwardFn backward);

}  // namespace detail

}  // namespace tsflow
