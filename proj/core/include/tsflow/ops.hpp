// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "tsflow/tensor.hpp"

namespace tsflow {

// Elementwise binary ops broadcast right-aligned: every dimension of the smaller
// operand must be 1 or equal to the matching dimension of the larger one, and one
// operand must already have the full output shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor square(const Tensor& a);

Tensor gelu(const Tensor& a);  // tanh approximation
Tensor silu(const Tensor& a);

/// Batched matrix product a[..., m, k] x b[..., k, n]. The batch dims of b must be a
/// suffix of the batch dims of a (an empty suffix means b is shared by all batches).
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[..., in] * weight[in, out] + bias[out]; bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm);
/// Swaps the last two dimensions.
Tensor transpose_last(const Tensor& a);

Tensor softmax_lastdim(const Tensor& x);
/// Normalizes each last-dimension slice to zero mean and unit variance (no affine).
Tensor layer_norm(const Tensor& x, double eps);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean over one axis; the axis is removed from the result.
Tensor mean_axis(const Tensor& a, std::size_t axis);

/// out[h, i, j] = table[h, ids[i * cols + j]]
Tensor gather_bias(const Tensor& table, std::span<const int> ids, std::size_t rows, std::size_t cols);

/// Rotates consecutive pairs (2f, 2f+1) of the last dimension of x[..., L, d] by
/// angles[l * (d/2) + f].
Tensor rotate_pairs(const Tensor& x, std::span<const double> angles);

}  // namespace tsflow
