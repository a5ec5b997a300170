// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/flow.hpp"

#include <algorithm>
#include <stdexcept>

#include "tsflow/ops.hpp"
#include "tsflow/sequence_data.hpp"

namespace tsflow {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_mask_for(const Tensor& values, const Tensor& mask, const char* what) {
    if (values.rank() != 4 || mask.rank() != 4 || mask.dim(0) != values.dim(0) || mask.dim(1) != 1 ||
        mask.dim(2) != values.dim(2) || mask.dim(3) != values.dim(3))
        throw ShapeError(std::string(what) + ": mask " + shape_str(mask.shape()) + " does not fit " +
                         shape_str(values.shape()));
}

// y - h * m * v, leaving unmasked entries untouched.
Tensor masked_step(const Tensor& y, const Tensor& v, const Tensor& mask, double h) {
    const std::size_t t = y.dim(0), c = y.dim(1), plane = y.dim(2) * y.dim(3);
    auto yv = y.values();
    auto vv = v.values();
    auto mv = mask.values();
    std::vector<double> out(yv.begin(), yv.end());
    for (std::size_t f = 0; f < t; ++f)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < plane; ++p) {
                if (mv[f * plane + p] == 0.0) continue;
                const std::size_t i = (f * c + ch) * plane + p;
                out[i] = yv[i] - h * vv[i];
            }
    return Tensor(y.shape(), std::move(out));
}

}  // namespace

Tensor sample_path(const Tensor& y, const Tensor& eps, double tau) {
    check_same_shape(y, eps, "sample_path");
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("sample_path: tau must lie in [0, 1]");
    auto yv = y.values();
    auto ev = eps.values();
    std::vector<double> out(yv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - tau) * yv[i] + tau * ev[i];
    return Tensor(y.shape(), std::move(out));
}

Tensor target_velocity(const Tensor& y, const Tensor& eps) {
    check_same_shape(y, eps, "target_velocity");
    auto yv = y.values();
    auto ev = eps.values();
    std::vector<double> out(yv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ev[i] - yv[i];
    return Tensor(y.shape(), std::move(out));
}

Tensor clamp_observed(const Tensor& y_tau, const Tensor& x, const Tensor& mask) {
    check_same_shape(y_tau, x, "clamp_observed");
    check_mask_for(x, mask, "clamp_observed");
    require_binary_mask(mask, "clamp_observed");
    const std::size_t t = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    auto yv = y_tau.values();
    auto xv = x.values();
    auto mv = mask.values();
    std::vector<double> out(xv.size());
    for (std::size_t f = 0; f < t; ++f)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < plane; ++p) {
                const std::size_t i = (f * c + ch) * plane + p;
                out[i] = mv[f * plane + p] != 0.0 ? yv[i] : xv[i];
            }
    return Tensor(x.shape(), std::move(out));
}

std::size_t masked_entry_count(const Tensor& mask, std::size_t channels) {
    std::size_t n = 0;
    for (double v : mask.values()) n += v != 0.0;
    return n * channels;
}

Tensor masked_sse(const Tensor& v_pred, const Tensor& v_star, const Tensor& mask) {
    check_same_shape(v_pred, v_star, "masked_sse");
    check_mask_for(v_pred, mask, "masked_sse");
    return sum(square(mul(sub(v_pred, v_star), mask)));
}

Tensor masked_fm_loss(const Tensor& v_pred, const Tensor& v_star, const Tensor& mask, LossCounters* counters) {
    check_same_shape(v_pred, v_star, "masked_fm_loss");
    check_mask_for(v_pred, mask, "masked_fm_loss");
    const std::size_t count = masked_entry_count(mask, v_pred.dim(1));
    if (count == 0) {
        if (counters) ++counters->empty_masks;
        return Tensor::scalar(0.0);
    }
    return scale(masked_sse(v_pred, v_star, mask), 1.0 / static_cast<double>(count));
}

Tensor gaussian_noise(const Shape& shape, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = dist(rng);
    return Tensor(shape, std::move(v));
}

Tensor gaussian_noise(const Shape& shape, std::uint64_t seed) {
    Rng rng(seed);
    return gaussian_noise(shape, rng);
}

std::string solver_name(Solver s) { return s == Solver::Heun ? "heun" : "euler"; }

Solver parse_solver(const std::string& name) {
    if (name == "euler") return Solver::Euler;
    if (name == "heun") return Solver::Heun;
    throw std::invalid_argument("unknown solver '" + name + "' (expected euler or heun)");
}

Tensor ode_sample(const Tensor& x, const Tensor& mask, const VelocityField& field, const SamplerConfig& config,
                  const Tensor& initial_noise) {
    if (config.steps == 0) throw std::invalid_argument("ode_sample: steps must be at least 1");
    check_mask_for(x, mask, "ode_sample");
    require_binary_mask(mask, "ode_sample");
    check_same_shape(x, initial_noise, "ode_sample");
    NoGradGuard no_grad;

    FlowState state{initial_noise, Tensor(), 1.0, 0};
    const double h = 1.0 / static_cast<double>(config.steps);
    for (; state.step < config.steps; ++state.step) {
        const double tau = 1.0 - static_cast<double>(state.step) * h;
        const double tau_next = std::max(0.0, 1.0 - static_cast<double>(state.step + 1) * h);
        state.z = clamp_observed(state.y_tilde, x, mask);
        const Tensor v1 = field(state.z, tau);
        check_same_shape(v1, x, "ode_sample velocity");
        if (config.solver == Solver::Euler) {
            state.y_tilde = masked_step(state.y_tilde, v1, mask, tau - tau_next);
        } else {
            const Tensor predicted = masked_step(state.y_tilde, v1, mask, tau - tau_next);
            const Tensor v2 = field(clamp_observed(predicted, x, mask), tau_next);
            std::vector<double> avg(v1.numel());
            for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = 0.5 * (v1.at(i) + v2.at(i));
            state.y_tilde = masked_step(state.y_tilde, Tensor(v1.shape(), std::move(avg)), mask, tau - tau_next);
        }
        state.tau = tau_next;
    }
    return clamp_observed(state.y_tilde, x, mask);
}

Tensor ode_sample(const Tensor& x, const Tensor& mask, const VelocityField& field, const SamplerConfig& config,
                  std::uint64_t seed) {
    return ode_sample(x, mask, field, config, gaussian_noise(x.shape(), seed));
}

VelocityField model_field(const Sdt& model, const Tensor& mask, const Conditioning& cond) {
    return [&model, mask, cond](const Tensor& z, double tau) {
        NoGradGuard no_grad;
        SdtInput in;
        in.z = z;
        in.mask = mask;
        in.tau = tau;
        in.optical_dates = cond.optical_dates;
        in.sar = cond.sar;
        in.sar_dates = cond.sar_dates;
        in.query_date = cond.query_date;
        return model.forward(in);
    };
}

Tensor ode_sample(const Tensor& x, const Tensor& mask, const Conditioning& cond, const Sdt& model,
                  const SamplerConfig& config, std::uint64_t seed) {
    return ode_sample(x, mask, model_field(model, mask, cond), config, seed);
}

QueryPlacement place_query(const FrameSet& frames, int q_date) {
    if (frames.dates.empty()) throw std::invalid_argument("place_query: empty sequence");
    require_strictly_increasing(frames.dates, "place_query");
    if (q_date < frames.dates.front() || q_date > frames.dates.back())
        throw std::out_of_range("place_query: day " + std::to_string(q_date) + " outside the window span [" +
                                std::to_string(frames.dates.front()) + ", " + std::to_string(frames.dates.back()) +
                                "]; extrapolation is unsupported");
    QueryPlacement out;
    const auto it = std::lower_bound(frames.dates.begin(), frames.dates.end(), q_date);
    out.index = static_cast<std::size_t>(it - frames.dates.begin());
    FrameSet work = frames;
    if (*it != q_date) {
        out.inserted = true;
        work.x = insert_frame(frames.x, out.index, kDefaultFill);
        work.mask = insert_frame(frames.mask, out.index, 1.0);
        work.dates.insert(work.dates.begin() + static_cast<std::ptrdiff_t>(out.index), q_date);
    }
    auto [x, m] = mask_query_frame(work.x, work.mask, out.index);
    work.x = std::move(x);
    work.mask = std::move(m);
    out.frames = std::move(work);
    return out;
}

FrameSet drop_virtual(const QueryPlacement& placement) {
    if (!placement.inserted) return placement.frames;
    FrameSet out;
    out.x = remove_frame(placement.frames.x, placement.index);
    out.mask = remove_frame(placement.frames.mask, placement.index);
    out.dates = placement.frames.dates;
    out.dates.erase(out.dates.begin() + static_cast<std::ptrdiff_t>(placement.index));
    return out;
}

AnytimeResult anytime_query(const FrameSet& frames, const Tensor& sar, const std::vector<int>& sar_dates, int q_date,
                            const Sdt& model, const SamplerConfig& config, std::uint64_t seed) {
    AnytimeResult out;
    out.placement = place_query(frames, q_date);
    Conditioning cond{out.placement.frames.dates, sar, sar_dates, q_date};
    out.sequence = ode_sample(out.placement.frames.x, out.placement.frames.mask, cond, model, config, seed);
    out.frame = frame_at(out.sequence, out.placement.index);
    return out;
}

}  // namespace tsflow
