// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tsflow/sdt.hpp"
#include "tsflow/tensor.hpp"

namespace tsflow {

/// y_tau = (1 - tau) * y + tau * eps
Tensor sample_path(const Tensor& y, const Tensor& eps, double tau);
/// v* = eps - y, constant along the linear path.
Tensor target_velocity(const Tensor& y, const Tensor& eps);
/// z = m * y_tau + (1 - m) * x with m [T, 1, H, W] broadcast over channels. Observed
/// entries are copied from x bit-for-bit.
Tensor clamp_observed(const Tensor& y_tau, const Tensor& x, const Tensor& mask);

/// Number of scalar entries selected by a [T, 1, H, W] mask over C channels.
std::size_t masked_entry_count(const Tensor& mask, std::size_t channels);

/// sum(m * (v_pred - v*))^2, differentiable in v_pred.
Tensor masked_sse(const Tensor& v_pred, const Tensor& v_star, const Tensor& mask);

struct LossCounters {
    std::size_t empty_masks = 0;
};

/// Mean squared velocity error over masked entries. Returns 0 (and bumps the counter) when
/// nothing is masked.
Tensor masked_fm_loss(const Tensor& v_pred, const Tensor& v_star, const Tensor& mask,
                      LossCounters* counters = nullptr);

/// Standard normal tensor from a seeded generator.
Tensor gaussian_noise(const Shape& shape, std::uint64_t seed);
Tensor gaussian_noise(const Shape& shape, Rng& rng);

struct FlowState {
    Tensor y_tilde;  // current estimate
    Tensor z;        // clamped composite fed to the velocity field
    double tau = 1.0;
    std::size_t step = 0;
};

enum class Solver { Euler, Heun };

std::string solver_name(Solver s);
Solver parse_solver(const std::string& name);

struct SamplerConfig {
    std::size_t steps = 20;
    Solver solver = Solver::Euler;

    bool operator==(const SamplerConfig&) const = default;
};

/// v(z, tau); lets tests substitute closed-form teacher fields for the network.
using VelocityField = std::function<Tensor(const Tensor& z, double tau)>;

/// Integrates dy/dtau = m * v(z_tau, tau) from tau = 1 (y = eps) down to tau = 0 with
/// uniform steps, then restores observed pixels from x.
Tensor ode_sample(const Tensor& x, const Tensor& mask, const VelocityField& field, const SamplerConfig& config,
                  const Tensor& initial_noise);
Tensor ode_sample(const Tensor& x, const Tensor& mask, const VelocityField& field, const SamplerConfig& config,
                  std::uint64_t seed);

/// Conditioning that travels with a window of optical frames.
struct Conditioning {
    std::vector<int> optical_dates;
    Tensor sar;  // [Ts, Cs, H, W]; may be undefined
    std::vector<int> sar_dates;
    std::optional<int> query_date;
};

/// Wraps the network as a velocity field (no graph recording).
VelocityField model_field(const Sdt& model, const Tensor& mask, const Conditioning& cond);

/// Samples a reconstruction with the network as the velocity field.
Tensor ode_sample(const Tensor& x, const Tensor& mask, const Conditioning& cond, const Sdt& model,
                  const SamplerConfig& config, std::uint64_t seed);

/// Observed optical frames with their mask and days.
struct FrameSet {
    Tensor x;     // [T, C, H, W]
    Tensor mask;  // [T, 1, H, W]
    std::vector<int> dates;
};

struct QueryPlacement {
    FrameSet frames;         // with the query frame fully masked
    std::size_t index = 0;   // position of the query frame
    bool inserted = false;   // true when a virtual frame was added
};

/// Marks the frame at q_date unknown, inserting a virtual v_fill frame when q_date is not
/// an existing optical day. Rejects dates outside [first, last] of the sequence.
QueryPlacement place_query(const FrameSet& frames, int q_date);
/// Removes the virtual frame again (no-op when nothing was inserted).
FrameSet drop_virtual(const QueryPlacement& placement);

struct AnytimeResult {
    Tensor frame;              // [C, H, W] generated frame at q_date
    Tensor sequence;           // full reconstructed window including the query frame
    QueryPlacement placement;
};

AnytimeResult anytime_query(const FrameSet& frames, const Tensor& sar, const std::vector<int>& sar_dates, int q_date,
                            const Sdt& model, const SamplerConfig& config, std::uint64_t seed);

}  // namespace tsflow
