// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tsflow/nn.hpp"
#include "tsflow/temporal.hpp"
#include "tsflow/tensor.hpp"

namespace tsflow {

/// Toggles for the component ablations.
struct AblationFlags {
    bool spatial_only_fusion = false;  // drop temporal cross-attention, keep spatial cross-attention
    bool no_rel_bias = false;          // bias tables frozen at zero and never applied
    bool lambda_delta_zero = false;    // query-relative date path removed

    bool operator==(const AblationFlags&) const = default;
};

/// Sequential Denoising Transformer hyperparameters.
struct SdtConfig {
    std::size_t depth = 4;
    std::size_t hidden = 256;
    std::size_t patch = 4;
    std::size_t heads = 4;
    double mlp_ratio = 4.0;
    std::size_t optical_channels = 10;
    std::size_t sar_channels = 3;
    std::size_t window = 15;
    std::size_t height = 128;
    std::size_t width = 128;
    double date_span = 430.0;  // days; sets the longest date-feature period
    RopeConfig rope{};
    bool mask_channel = true;  // feed the missingness mask to the patch embedding
    double ln_eps = 1e-6;
    std::uint64_t init_seed = 0;
    AblationFlags ablation{};

    /// Full-size configuration.
    static SdtConfig reference();
    /// Small configuration trained on the synthetic benchmark.
    static SdtConfig desk();
    /// Smallest configuration used by gradient checks.
    static SdtConfig tiny();

    void validate() const;
    std::size_t head_dim() const { return hidden / heads; }
    std::size_t grid_h() const { return height / patch; }
    std::size_t grid_w() const { return width / patch; }
    std::size_t tokens_per_frame() const { return grid_h() * grid_w(); }
    std::size_t mlp_hidden() const { return static_cast<std::size_t>(static_cast<double>(hidden) * mlp_ratio); }

    bool operator==(const SdtConfig&) const = default;
};

/// Per-layer sublayer order, recorded in checkpoints.
inline constexpr std::string_view kBlockOrderTag = "spatial_self>temporal_self>spatial_cross>temporal_cross>mlp";

enum class Sublayer : std::size_t { SpatialSelf = 0, TemporalSelf, SpatialCross, TemporalCross, Mlp, Count };

struct AttentionWeights {
    Linear q, k, v, o;
};

/// gamma/beta/gate projections of the conditioning vector for one sublayer.
struct AdaLnProjection {
    Linear gamma, beta, gate;
};

// ---------------------------------------------------------------------------
// Building blocks (free functions so they can be tested in isolation)
// ---------------------------------------------------------------------------

/// [T, C, H, W] -> [T, (H/p)*(W/p), C*p*p]; patch features ordered (c, dy, dx).
Tensor patchify(const Tensor& frames, std::size_t patch);
/// Inverse of patchify.
Tensor unpatchify(const Tensor& tokens, std::size_t channels, std::size_t height, std::size_t width,
                  std::size_t patch);

/// Fixed 2-D sine/cosine embedding [grid_h * grid_w, width]: first half encodes the row,
/// second half the column.
Tensor spatial_pos_embed(std::size_t grid_h, std::size_t grid_w, std::size_t width);

/// X + gate(c) * f((1 + gamma(c)) * LN(X) + beta(c)).
Tensor adaln_modulate(const Tensor& x, const Tensor& c, const AdaLnProjection& proj,
                      const std::function<Tensor(const Tensor&)>& sublayer, double eps = 1e-6);

/// softmax(Q K^T / sqrt(d_h) + bias) V with Q from q_src[..., Lq, M] and K, V from
/// kv_src[..., Lk, M]. The batch dims of kv_src must be a suffix of those of q_src.
/// bias, when given, broadcasts as [heads, Lq, Lk]. rope_q/rope_k are angle tables for
/// rotate_pairs. probs_out receives the attention weights [..., heads, Lq, Lk].
Tensor multihead_attention(const Tensor& q_src, const Tensor& kv_src, const AttentionWeights& w,
                           std::size_t heads, const Tensor* bias = nullptr,
                           const std::vector<double>* rope_q = nullptr,
                           const std::vector<double>* rope_k = nullptr, Tensor* probs_out = nullptr);

/// Frame-wise attention over the N patch tokens of tokens[T, N, M].
Tensor spatial_self_attention(const Tensor& tokens, const AttentionWeights& w, std::size_t heads,
                              Tensor* probs_out = nullptr);

/// Patch-wise attention across the T frames, with relative date bias (optional) and RoPE.
Tensor temporal_self_attention(const Tensor& tokens, std::span<const int> dates, const AttentionWeights& w,
                               std::size_t heads, const BiasTable* table, const RopeConfig& rope,
                               Tensor* probs_out = nullptr);

/// Optical tokens [T, N, M] attend to SAR tokens pooled over time [N, M] on the same grid.
/// With no SAR frames the result is all zeros.
Tensor spatial_cross_attention(const Tensor& optical, const Tensor& sar, const AttentionWeights& w,
                               std::size_t heads, Tensor* probs_out = nullptr);

/// For every patch, optical frames attend to SAR frames with cross-sensor date bias.
/// With no SAR frames the result is all zeros.
Tensor temporal_cross_attention(const Tensor& optical, const Tensor& sar, std::span<const int> dates_opt,
                                std::span<const int> dates_sar, const AttentionWeights& w, std::size_t heads,
                                const BiasTable* table, Tensor* probs_out = nullptr);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct SdtInput {
    Tensor z;                         // [T, C, H, W] clamped noisy composite
    Tensor mask;                      // [T, 1, H, W]; required when mask_channel is on
    double tau = 0.0;                 // flow time in [0, 1]
    std::vector<int> optical_dates;   // T
    Tensor sar;                       // [Ts, Cs, H, W]; undefined or Ts == 0 for optical-only
    std::vector<int> sar_dates;       // Ts
    std::optional<int> query_date;    // anytime mode
};

class Sdt {
public:
    explicit Sdt(SdtConfig config);
    Sdt(const Sdt&) = delete;
    Sdt& operator=(const Sdt&) = delete;
    Sdt(Sdt&&) = default;
    Sdt& operator=(Sdt&&) = default;

    const SdtConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    /// Velocity field v_theta(z, tau, cond) with the shape of z.
    Tensor forward(const SdtInput& input) const;

    /// Linear patch embedding of optical ([T, C, H, W]) or SAR frames; [T, N, M].
    Tensor embed_optical(const Tensor& frames, const Tensor& mask) const;
    Tensor embed_sar(const Tensor& frames) const;
    Tensor time_embedding(double tau) const { return time_embed_(tau); }

    /// Scalar parameter count; depends on the configuration only.
    static std::size_t parameter_count(const SdtConfig& config);

private:
    struct Block {
        std::array<AdaLnProjection, static_cast<std::size_t>(Sublayer::Count)> ada;
        AttentionWeights spatial_self, temporal_self, spatial_cross, temporal_cross;
        BiasTable temporal_bias, cross_bias;
        Linear mlp_in, mlp_out;
    };

    void validate_input(const SdtInput& input) const;

    SdtConfig config_;
    ParameterStore params_;
    Linear optical_embed_, mask_embed_, sar_embed_;
    FlowTimeEmbed time_embed_;
    DateEmbedParams date_params_;
    std::vector<Block> blocks_;
    Linear final_gamma_, final_beta_, head_;
    Tensor pos_embed_;
};

}  // namespace tsflow
