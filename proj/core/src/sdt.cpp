// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/sdt.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tsflow/ops.hpp"

namespace tsflow {

namespace {

constexpr std::array<const char*, static_cast<std::size_t>(Sublayer::Count)> kSublayerNames = {
    "spatial_self", "temporal_self", "spatial_cross", "temporal_cross", "mlp"};

// [..., L, M] -> [..., heads, L, d_h]
Tensor split_heads(const Tensor& x, std::size_t heads) {
    Shape s = x.shape();
    const std::size_t len = s[s.size() - 2];
    const std::size_t width = s.back();
    Shape split(s.begin(), s.end() - 2);
    const std::size_t batch_rank = split.size();
    split.push_back(len);
    split.push_back(heads);
    split.push_back(width / heads);
    std::vector<std::size_t> perm;
    for (std::size_t i = 0; i < batch_rank; ++i) perm.push_back(i);
    perm.push_back(batch_rank + 1);
    perm.push_back(batch_rank);
    perm.push_back(batch_rank + 2);
    return permute(reshape(x, split), perm);
}

// [..., heads, L, d_h] -> [..., L, heads * d_h]
Tensor merge_heads(const Tensor& x) {
    const Shape& s = x.shape();
    const std::size_t batch_rank = s.size() - 3;
    std::vector<std::size_t> perm;
    for (std::size_t i = 0; i < batch_rank; ++i) perm.push_back(i);
    perm.push_back(batch_rank + 1);
    perm.push_back(batch_rank);
    perm.push_back(batch_rank + 2);
    Tensor t = permute(x, perm);
    Shape merged(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(batch_rank));
    merged.push_back(s[batch_rank + 1]);
    merged.push_back(s[batch_rank] * s[batch_rank + 2]);
    return reshape(t, merged);
}

AttentionWeights make_attention(ParameterStore& store, const std::string& prefix, std::size_t width, Rng& rng) {
    return AttentionWeights{make_linear(store, prefix + ".q", width, width, rng),
                            make_linear(store, prefix + ".k", width, width, rng),
                            make_linear(store, prefix + ".v", width, width, rng),
                            make_linear(store, prefix + ".o", width, width, rng)};
}

AdaLnProjection make_adaln(ParameterStore& store, const std::string& prefix, std::size_t width, Rng& rng) {
    return AdaLnProjection{make_linear(store, prefix + ".gamma", width, width, rng, true),
                           make_linear(store, prefix + ".beta", width, width, rng, true),
                           make_linear(store, prefix + ".gate", width, width, rng, true)};
}

void freeze_linear(ParameterStore& store, const std::string& prefix) {
    store.set_trainable(prefix + ".weight", false);
    store.set_trainable(prefix + ".bias", false);
}

template <class Fn>
Tensor labelled(const std::string& layer, Fn fn) {
    try {
        return fn();
    } catch (const ShapeError& e) {
        throw ShapeError(layer + ": " + e.what());
    }
}

}  // namespace

SdtConfig SdtConfig::reference() { return SdtConfig{}; }

SdtConfig SdtConfig::desk() {
    SdtConfig c;
    c.depth = 2;
    c.hidden = 64;
    c.patch = 4;
    c.heads = 2;
    c.mlp_ratio = 4.0;
    c.optical_channels = 3;
    c.sar_channels = 1;
    c.window = 8;
    c.height = 16;
    c.width = 16;
    c.date_span = 365.0;
    return c;
}

SdtConfig SdtConfig::tiny() {
    SdtConfig c;
    c.depth = 1;
    c.hidden = 16;
    c.patch = 2;
    c.heads = 2;
    c.mlp_ratio = 4.0;
    c.optical_channels = 2;
    c.sar_channels = 1;
    c.window = 3;
    c.height = 8;
    c.width = 8;
    c.date_span = 100.0;
    return c;
}

void SdtConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::invalid_argument("sdt config." + field + ": " + why);
    };
    if (depth == 0) fail("depth", "must be positive");
    if (patch == 0) fail("patch", "must be positive");
    if (heads == 0) fail("heads", "must be positive");
    if (hidden == 0 || hidden % heads != 0) fail("hidden", "must be a positive multiple of heads");
    if (hidden % 4 != 0) fail("hidden", "must be divisible by 4 for the 2-D position embedding");
    if (head_dim() % 2 != 0) fail("heads", "head dimension must be even for rotary encoding");
    if (height == 0 || width == 0 || height % patch != 0 || width % patch != 0)
        fail("height/width", "must be positive multiples of the patch size");
    if (optical_channels == 0) fail("optical_channels", "must be positive");
    if (sar_channels == 0) fail("sar_channels", "must be positive");
    if (!(mlp_ratio > 0.0) || mlp_hidden() == 0) fail("mlp_ratio", "must be positive");
    if (window == 0) fail("window", "must be positive");
    if (!(date_span >= 1.0)) fail("date_span", "must be at least one day");
    if (!(ln_eps > 0.0)) fail("ln_eps", "must be positive");
    if (!(rope.base > 1.0)) fail("rope.base", "must exceed 1");
}

Tensor patchify(const Tensor& frames, std::size_t patch) {
    if (frames.rank() != 4) throw ShapeError("patchify: expected [T, C, H, W], got " + shape_str(frames.shape()));
    const std::size_t t = frames.dim(0), c = frames.dim(1), h = frames.dim(2), w = frames.dim(3);
    if (patch == 0 || h % patch != 0 || w % patch != 0)
        throw ShapeError("patchify: " + shape_str(frames.shape()) + " not divisible by patch " +
                         std::to_string(patch));
    const std::size_t gh = h / patch, gw = w / patch;
    Tensor x = reshape(frames, {t, c, gh, patch, gw, patch});
    x = permute(x, {0, 2, 4, 1, 3, 5});
    return reshape(x, {t, gh * gw, c * patch * patch});
}

Tensor unpatchify(const Tensor& tokens, std::size_t channels, std::size_t height, std::size_t width,
                  std::size_t patch) {
    if (tokens.rank() != 3) throw ShapeError("unpatchify: expected [T, N, C*p*p], got " + shape_str(tokens.shape()));
    const std::size_t t = tokens.dim(0);
    const std::size_t gh = height / patch, gw = width / patch;
    if (tokens.dim(1) != gh * gw || tokens.dim(2) != channels * patch * patch)
        throw ShapeError("unpatchify: token shape " + shape_str(tokens.shape()) + " does not match image " +
                         std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width));
    Tensor x = reshape(tokens, {t, gh, gw, channels, patch, patch});
    x = permute(x, {0, 3, 1, 4, 2, 5});
    return reshape(x, {t, channels, height, width});
}

Tensor spatial_pos_embed(std::size_t grid_h, std::size_t grid_w, std::size_t width) {
    if (width == 0 || width % 4 != 0) throw std::invalid_argument("spatial_pos_embed: width must be divisible by 4");
    const std::size_t quarter = width / 4;
    std::vector<double> omega(quarter);
    for (std::size_t k = 0; k < quarter; ++k)
        omega[k] = 1.0 / std::pow(10000.0, static_cast<double>(k) / static_cast<double>(quarter));
    std::vector<double> out(grid_h * grid_w * width);
    for (std::size_t r = 0; r < grid_h; ++r)
        for (std::size_t c = 0; c < grid_w; ++c) {
            double* row = out.data() + (r * grid_w + c) * width;
            for (std::size_t k = 0; k < quarter; ++k) {
                row[k] = std::sin(static_cast<double>(r) * omega[k]);
                row[quarter + k] = std::cos(static_cast<double>(r) * omega[k]);
                row[2 * quarter + k] = std::sin(static_cast<double>(c) * omega[k]);
                row[3 * quarter + k] = std::cos(static_cast<double>(c) * omega[k]);
            }
        }
    return Tensor({grid_h * grid_w, width}, std::move(out));
}

Tensor adaln_modulate(const Tensor& x, const Tensor& c, const AdaLnProjection& proj,
                      const std::function<Tensor(const Tensor&)>& sublayer, double eps) {
    const Tensor gamma = proj.gamma(c);
    const Tensor beta = proj.beta(c);
    const Tensor gate = proj.gate(c);
    const Tensor h = add(mul(layer_norm(x, eps), add_scalar(gamma, 1.0)), beta);
    return add(x, mul(sublayer(h), gate));
}

Tensor multihead_attention(const Tensor& q_src, const Tensor& kv_src, const AttentionWeights& w,
                           std::size_t heads, const Tensor* bias, const std::vector<double>* rope_q,
                           const std::vector<double>* rope_k, Tensor* probs_out) {
    if (q_src.rank() < 2 || kv_src.rank() < 2)
        throw ShapeError("attention: inputs must be at least [L, M], got " + shape_str(q_src.shape()) + " and " +
                         shape_str(kv_src.shape()));
    const std::size_t width = q_src.shape().back();
    if (heads == 0 || width % heads != 0)
        throw ShapeError("attention: width " + std::to_string(width) + " not divisible by heads");
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(width / heads));

    Tensor q = split_heads(w.q(q_src), heads);
    Tensor k = split_heads(w.k(kv_src), heads);
    Tensor v = split_heads(w.v(kv_src), heads);
    if (rope_q) q = rotate_pairs(q, *rope_q);
    if (rope_k) k = rotate_pairs(k, *rope_k);
    Tensor scores = scale(matmul(q, transpose_last(k)), inv_sqrt);
    if (bias) scores = add(scores, *bias);
    Tensor probs = softmax_lastdim(scores);
    if (probs_out) *probs_out = probs;
    return w.o(merge_heads(matmul(probs, v)));
}

Tensor spatial_self_attention(const Tensor& tokens, const AttentionWeights& w, std::size_t heads,
                              Tensor* probs_out) {
    if (tokens.rank() != 3) throw ShapeError("spatial_self_attention: expected [T, N, M]");
    return multihead_attention(tokens, tokens, w, heads, nullptr, nullptr, nullptr, probs_out);
}

Tensor temporal_self_attention(const Tensor& tokens, std::span<const int> dates, const AttentionWeights& w,
                               std::size_t heads, const BiasTable* table, const RopeConfig& rope,
                               Tensor* probs_out) {
    if (tokens.rank() != 3) throw ShapeError("temporal_self_attention: expected [T, N, M]");
    if (dates.size() != tokens.dim(0)) throw ShapeError("temporal_self_attention: one date per frame required");
    const Tensor by_patch = permute(tokens, {1, 0, 2});  // [N, T, M]
    std::optional<Tensor> bias;
    if (table) bias = relative_bias(dates, dates, *table);
    const auto angles = rope_angles(dates, tokens.dim(2) / heads, rope);
    const Tensor out = multihead_attention(by_patch, by_patch, w, heads, bias ? &*bias : nullptr, &angles,
                                           &angles, probs_out);
    return permute(out, {1, 0, 2});
}

Tensor spatial_cross_attention(const Tensor& optical, const Tensor& sar, const AttentionWeights& w,
                               std::size_t heads, Tensor* probs_out) {
    if (optical.rank() != 3) throw ShapeError("spatial_cross_attention: expected optical [T, N, M]");
    if (!sar.defined() || sar.numel() == 0) return Tensor(optical.shape(), 0.0);
    if (sar.rank() != 3 || sar.dim(1) != optical.dim(1) || sar.dim(2) != optical.dim(2))
        throw ShapeError("spatial_cross_attention: SAR tokens " + shape_str(sar.shape()) +
                         " do not match optical grid " + shape_str(optical.shape()));
    const Tensor pooled = mean_axis(sar, 0);  // [N, M]
    return multihead_attention(optical, pooled, w, heads, nullptr, nullptr, nullptr, probs_out);
}

Tensor temporal_cross_attention(const Tensor& optical, const Tensor& sar, std::span<const int> dates_opt,
                                std::span<const int> dates_sar, const AttentionWeights& w, std::size_t heads,
                                const BiasTable* table, Tensor* probs_out) {
    if (optical.rank() != 3) throw ShapeError("temporal_cross_attention: expected optical [T, N, M]");
    if (!sar.defined() || sar.numel() == 0) return Tensor(optical.shape(), 0.0);
    if (sar.rank() != 3 || sar.dim(1) != optical.dim(1) || sar.dim(2) != optical.dim(2))
        throw ShapeError("temporal_cross_attention: SAR tokens " + shape_str(sar.shape()) +
                         " do not match optical grid " + shape_str(optical.shape()));
    if (dates_opt.size() != optical.dim(0) || dates_sar.size() != sar.dim(0))
        throw ShapeError("temporal_cross_attention: date lists do not match frame counts");
    const Tensor q_src = permute(optical, {1, 0, 2});  // [N, T, M]
    const Tensor kv_src = permute(sar, {1, 0, 2});     // [N, Ts, M]
    std::optional<Tensor> bias;
    if (table) bias = relative_bias(dates_opt, dates_sar, *table);
    const Tensor out =
        multihead_attention(q_src, kv_src, w, heads, bias ? &*bias : nullptr, nullptr, nullptr, probs_out);
    return permute(out, {1, 0, 2});
}

Sdt::Sdt(SdtConfig config) : config_(std::move(config)) {
    config_.validate();
    Rng rng(config_.init_seed);
    const std::size_t m = config_.hidden;
    const std::size_t p2 = config_.patch * config_.patch;

    optical_embed_ = make_linear(params_, "embed.optical", config_.optical_channels * p2, m, rng);
    if (config_.mask_channel) mask_embed_ = make_linear(params_, "embed.mask", p2, m, rng);
    sar_embed_ = make_linear(params_, "embed.sar", config_.sar_channels * p2, m, rng);
    time_embed_ = make_flow_time_embed(params_, "time_embed", m, rng);
    date_params_ = make_date_embed_params(params_, "dates");

    if (config_.ablation.lambda_delta_zero) {
        date_params_.lambda_delta.data()[0] = 0.0;
        params_.set_trainable("dates.lambda_delta", false);
        date_params_.delta_disabled = true;
    }

    for (std::size_t b = 0; b < config_.depth; ++b) {
        const std::string prefix = "blocks." + std::to_string(b);
        Block block;
        for (std::size_t s = 0; s < block.ada.size(); ++s)
            block.ada[s] = make_adaln(params_, prefix + "." + kSublayerNames[s] + ".ada", m, rng);
        block.spatial_self = make_attention(params_, prefix + ".spatial_self", m, rng);
        block.temporal_self = make_attention(params_, prefix + ".temporal_self", m, rng);
        block.temporal_bias = make_bias_table(params_, prefix + ".temporal_self.bias_table", config_.heads);
        block.spatial_cross = make_attention(params_, prefix + ".spatial_cross", m, rng);
        block.temporal_cross = make_attention(params_, prefix + ".temporal_cross", m, rng);
        block.cross_bias = make_bias_table(params_, prefix + ".temporal_cross.bias_table", config_.heads);
        block.mlp_in = make_linear(params_, prefix + ".mlp.in", m, config_.mlp_hidden(), rng);
        block.mlp_out = make_linear(params_, prefix + ".mlp.out", config_.mlp_hidden(), m, rng);

        if (config_.ablation.no_rel_bias) {
            params_.set_trainable(prefix + ".temporal_self.bias_table", false);
            params_.set_trainable(prefix + ".temporal_cross.bias_table", false);
        }
        if (config_.ablation.spatial_only_fusion) {
            for (const char* proj : {".q", ".k", ".v", ".o"}) freeze_linear(params_, prefix + ".temporal_cross" + proj);
            params_.set_trainable(prefix + ".temporal_cross.bias_table", false);
            const std::string ada = prefix + ".temporal_cross.ada";
            for (const char* part : {".gamma", ".beta", ".gate"}) freeze_linear(params_, ada + part);
        }
        blocks_.push_back(std::move(block));
    }
    final_gamma_ = make_linear(params_, "final.ada.gamma", m, m, rng, true);
    final_beta_ = make_linear(params_, "final.ada.beta", m, m, rng, true);
    head_ = make_linear(params_, "head", m, config_.optical_channels * p2, rng, true);
    pos_embed_ = spatial_pos_embed(config_.grid_h(), config_.grid_w(), m);
}

std::size_t Sdt::parameter_count(const SdtConfig& config) {
    config.validate();
    const std::size_t m = config.hidden;
    const std::size_t p2 = config.patch * config.patch;
    const std::size_t lin = m * m + m;
    std::size_t n = 0;
    n += config.optical_channels * p2 * m + m;
    if (config.mask_channel) n += p2 * m + m;
    n += config.sar_channels * p2 * m + m;
    n += 2 * lin;  // flow-time MLP
    n += 2;        // lambda scalars
    const std::size_t per_block = 5 * 3 * lin + 4 * 4 * lin + 2 * config.heads * kNumBuckets +
                                  (m * config.mlp_hidden() + config.mlp_hidden()) + (config.mlp_hidden() * m + m);
    n += config.depth * per_block;
    n += 2 * lin + m * config.optical_channels * p2 + config.optical_channels * p2;
    return n;
}

Tensor Sdt::embed_optical(const Tensor& frames, const Tensor& mask) const {
    Tensor tokens = optical_embed_(patchify(frames, config_.patch));
    if (config_.mask_channel) tokens = add(tokens, mask_embed_(patchify(mask, config_.patch)));
    return tokens;
}

Tensor Sdt::embed_sar(const Tensor& frames) const { return sar_embed_(patchify(frames, config_.patch)); }

void Sdt::validate_input(const SdtInput& in) const {
    auto fail = [](const std::string& what) { throw ShapeError("sdt.input: " + what); };
    if (!in.z.defined() || in.z.rank() != 4) fail("z must be [T, C, H, W]");
    const Shape& s = in.z.shape();
    if (s[0] == 0) fail("z has no frames");
    if (s[1] != config_.optical_channels || s[2] != config_.height || s[3] != config_.width)
        fail("z shape " + shape_str(s) + " does not match configured C/H/W");
    if (in.optical_dates.size() != s[0]) fail("one optical date per frame required");
    if (config_.mask_channel) {
        if (!in.mask.defined() || in.mask.shape() != Shape{s[0], 1, s[2], s[3]})
            fail("mask must be [T, 1, H, W] when the mask channel is enabled");
    }
    if (!(in.tau >= 0.0 && in.tau <= 1.0)) throw std::invalid_argument("sdt.input: tau must lie in [0, 1]");
    const std::size_t ts = in.sar.defined() && in.sar.numel() ? in.sar.dim(0) : 0;
    if (ts > 0) {
        const Shape& ss = in.sar.shape();
        if (ss.size() != 4 || ss[1] != config_.sar_channels || ss[2] != config_.height || ss[3] != config_.width)
            fail("sar shape " + shape_str(ss) + " does not match configured Cs/H/W");
    }
    if (in.sar_dates.size() != ts) fail("one SAR date per SAR frame required");
    require_finite(in.z, "sdt.input.z");
    if (ts > 0) require_finite(in.sar, "sdt.input.sar");
}

Tensor Sdt::forward(const SdtInput& in) const {
    validate_input(in);
    const std::size_t t = in.z.dim(0);
    const std::size_t m = config_.hidden;
    const std::size_t heads = config_.heads;
    const bool has_sar = in.sar.defined() && in.sar.numel() > 0;

    Tensor x = labelled("embed.optical", [&] {
        Tensor tokens = add(embed_optical(in.z, in.mask), pos_embed_);
        const Tensor dates =
            combine_dates(in.optical_dates, in.query_date, date_params_, m, config_.date_span);
        return add(tokens, reshape(dates, {t, 1, m}));
    });
    Tensor sar_tokens;
    if (has_sar) {
        sar_tokens = labelled("embed.sar", [&] {
            const std::size_t ts = in.sar.dim(0);
            const Tensor dates = date_embed_table(in.sar_dates, m, config_.date_span);
            return add(add(embed_sar(in.sar), pos_embed_), reshape(dates, {ts, 1, m}));
        });
    }
    const Tensor c = time_embed_(in.tau);

    const bool use_bias = !config_.ablation.no_rel_bias;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const Block& blk = blocks_[b];
        const std::string prefix = "blocks." + std::to_string(b) + ".";
        auto ada = [&](Sublayer s) -> const AdaLnProjection& { return blk.ada[static_cast<std::size_t>(s)]; };

        x = labelled(prefix + "spatial_self", [&] {
            return adaln_modulate(x, c, ada(Sublayer::SpatialSelf),
                                  [&](const Tensor& h) { return spatial_self_attention(h, blk.spatial_self, heads); },
                                  config_.ln_eps);
        });
        x = labelled(prefix + "temporal_self", [&] {
            return adaln_modulate(
                x, c, ada(Sublayer::TemporalSelf),
                [&](const Tensor& h) {
                    return temporal_self_attention(h, in.optical_dates, blk.temporal_self, heads,
                                                   use_bias ? &blk.temporal_bias : nullptr, config_.rope);
                },
                config_.ln_eps);
        });
        if (has_sar) {
            x = labelled(prefix + "spatial_cross", [&] {
                return adaln_modulate(
                    x, c, ada(Sublayer::SpatialCross),
                    [&](const Tensor& h) { return spatial_cross_attention(h, sar_tokens, blk.spatial_cross, heads); },
                    config_.ln_eps);
            });
            if (!config_.ablation.spatial_only_fusion) {
                x = labelled(prefix + "temporal_cross", [&] {
                    return adaln_modulate(
                        x, c, ada(Sublayer::TemporalCross),
                        [&](const Tensor& h) {
                            return temporal_cross_attention(h, sar_tokens, in.optical_dates, in.sar_dates,
                                                            blk.temporal_cross, heads,
                                                            use_bias ? &blk.cross_bias : nullptr);
                        },
                        config_.ln_eps);
                });
            }
        }
        x = labelled(prefix + "mlp", [&] {
            return adaln_modulate(
                x, c, ada(Sublayer::Mlp), [&](const Tensor& h) { return blk.mlp_out(gelu(blk.mlp_in(h))); },
                config_.ln_eps);
        });
    }

    return labelled("head", [&] {
        const Tensor h = add(mul(layer_norm(x, config_.ln_eps), add_scalar(final_gamma_(c), 1.0)), final_beta_(c));
        return unpatchify(head_(h), config_.optical_channels, config_.height, config_.width, config_.patch);
    });
}

}  // namespace tsflow
