// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "tsflow/ops.hpp"

namespace tsflow {

namespace {

using nlohmann::json;

constexpr std::uint64_t kPoolStream = 0x7f4a7c15f39cc060ULL;

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train.") + key, e.what());
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr", "must be a positive finite number");
    if (batch_size == 0) throw ConfigError("train.batch_size", "must be at least 1");
    if (epochs == 0) throw ConfigError("train.epochs", "must be at least 1");
    for (double m : milestones)
        if (!(m > 0.0 && m < 1.0)) throw ConfigError("train.milestones", "entries must lie in (0, 1)");
    if (!std::is_sorted(milestones.begin(), milestones.end()))
        throw ConfigError("train.milestones", "must be sorted");
    if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) throw ConfigError("train.lr_gamma", "must lie in (0, 1]");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1", "must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2", "must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps", "must be positive");
    if (!(p_anytime >= 0.0 && p_anytime <= 1.0)) throw ConfigError("train.p_anytime", "must lie in [0, 1]");
    if (!(cloud_probability >= 0.0 && cloud_probability <= 1.0))
        throw ConfigError("train.cloud_probability", "must lie in [0, 1]");
    if (sar_margin_days < 0) throw ConfigError("train.sar_margin_days", "must be nonnegative");
}

TrainConfig TrainConfig::desk() {
    TrainConfig c;
    c.lr = 1e-3;
    c.batch_size = 2;
    c.epochs = 120;
    return c;
}

std::string train_config_to_json(const TrainConfig& c) {
    json j;
    j["lr"] = c.lr;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["milestones"] = c.milestones;
    j["lr_gamma"] = c.lr_gamma;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["adam_eps"] = c.adam_eps;
    j["p_anytime"] = c.p_anytime;
    j["cloud_probability"] = c.cloud_probability;
    j["sar_margin_days"] = c.sar_margin_days;
    j["seed"] = c.seed;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("train", std::string("not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("train", "expected an object");
    static const char* known[] = {"lr",        "batch_size", "epochs",    "milestones",        "lr_gamma",
                                  "beta1",     "beta2",      "adam_eps",  "p_anytime",         "cloud_probability",
                                  "sar_margin_days",         "seed"};
    for (const auto& [key, value] : j.items())
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
            std::end(known))
            throw ConfigError("train." + key, "unknown key");
    TrainConfig c;
    read_field(j, "lr", c.lr);
    read_field(j, "batch_size", c.batch_size);
    read_field(j, "epochs", c.epochs);
    read_field(j, "milestones", c.milestones);
    read_field(j, "lr_gamma", c.lr_gamma);
    read_field(j, "beta1", c.beta1);
    read_field(j, "beta2", c.beta2);
    read_field(j, "adam_eps", c.adam_eps);
    read_field(j, "p_anytime", c.p_anytime);
    read_field(j, "cloud_probability", c.cloud_probability);
    read_field(j, "sar_margin_days", c.sar_margin_days);
    read_field(j, "seed", c.seed);
    c.validate();
    return c;
}

DataSplit split_dataset(std::size_t sequences) {
    DataSplit s;
    for (std::size_t i = 0; i < sequences; ++i) (i % 5 == 4 ? s.test : s.train).push_back(i);
    return s;
}

WindowData extract_window(const SequenceRecord& record, const Window& window, int sar_margin_days) {
    if (window.start + window.length > record.clean.frames())
        throw std::out_of_range("extract_window: window exceeds sequence " + record.id);
    WindowData w;
    w.clean = slice_frames(record.clean.values, window.start, window.length);
    w.dates.assign(record.clean.dates.begin() + static_cast<std::ptrdiff_t>(window.start),
                   record.clean.dates.begin() + static_cast<std::ptrdiff_t>(window.start + window.length));
    const int lo = w.dates.front() - sar_margin_days;
    const int hi = w.dates.back() + sar_margin_days;
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < record.sar.dates.size(); ++j)
        if (record.sar.dates[j] >= lo && record.sar.dates[j] <= hi) {
            keep.push_back(j);
            w.sar_dates.push_back(record.sar.dates[j]);
        }
    if (!keep.empty()) w.sar = gather_frames(record.sar.values, keep);
    return w;
}

TrainSample build_sample(const WindowData& window, const MaskPool& pool, const TrainConfig& config, Rng& rng) {
    const Shape& s = window.clean.shape();
    const std::size_t t = s[0], plane = s[2] * s[3];
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Tensor mask(Shape{t, 1, s[2], s[3]}, 0.0);
    auto mv = mask.data();
    for (std::size_t f = 0; f < t; ++f) {
        if (unit(rng) >= config.cloud_probability) continue;
        const Tensor pattern = sample_mask(pool, rng);
        std::copy(pattern.values().begin(), pattern.values().end(), mv.begin() + static_cast<std::ptrdiff_t>(f * plane));
    }

    TrainSample out;
    out.y = window.clean;
    out.x = compose_observed(window.clean, mask);
    out.mask = mask;
    out.dates = window.dates;
    if (unit(rng) < config.p_anytime) {
        const std::size_t q = std::uniform_int_distribution<std::size_t>(0, t - 1)(rng);
        auto [x, m] = mask_query_frame(out.x, out.mask, q);
        out.x = std::move(x);
        out.mask = std::move(m);
        out.query_date = window.dates[q];
    }
    out.tau = unit(rng);
    out.noise = gaussian_noise(s, rng);
    out.sar = window.sar;
    out.sar_dates = window.sar_dates;
    return out;
}

Adam::Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParameterStore& params, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& name : params.names()) {
        if (!params.trainable(name)) continue;
        Tensor& p = params.get(name);
        if (!p.has_grad()) continue;
        const std::vector<double> g = p.grad();
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.empty()) {
            m.assign(g.size(), 0.0);
            v.assign(g.size(), 0.0);
        }
        auto w = p.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

NamedTensors Adam::state() const {
    NamedTensors out;
    for (const auto& [name, m] : m_) {
        out.emplace_back(name + ".m", Tensor(Shape{m.size()}, m));
        out.emplace_back(name + ".v", Tensor(Shape{m.size()}, v_.at(name)));
    }
    return out;
}

void Adam::load_state(const NamedTensors& tensors, std::size_t steps) {
    m_.clear();
    v_.clear();
    for (const auto& [key, t] : tensors) {
        if (key.size() < 3) throw std::runtime_error("optimizer state: bad entry '" + key + "'");
        const std::string name = key.substr(0, key.size() - 2);
        const std::string which = key.substr(key.size() - 2);
        std::vector<double> values(t.values().begin(), t.values().end());
        if (which == ".m")
            m_[name] = std::move(values);
        else if (which == ".v")
            v_[name] = std::move(values);
        else
            throw std::runtime_error("optimizer state: bad entry '" + key + "'");
    }
    t_ = steps;
}

StepStats train_step(Sdt& model, Adam& optimizer, const std::vector<TrainSample>& batch, double lr,
                     LossCounters* counters) {
    StepStats stats;
    for (const auto& s : batch) stats.masked_entries += masked_entry_count(s.mask, s.y.dim(1));
    if (stats.masked_entries == 0) {
        if (counters) ++counters->empty_masks;
        return stats;
    }
    const double inv = 1.0 / static_cast<double>(stats.masked_entries);
    model.params().zero_grad();
    for (const auto& s : batch) {
        if (masked_entry_count(s.mask, 1) == 0) continue;
        SdtInput in;
        in.z = clamp_observed(sample_path(s.y, s.noise, s.tau), s.x, s.mask);
        in.mask = s.mask;
        in.tau = s.tau;
        in.optical_dates = s.dates;
        in.sar = s.sar;
        in.sar_dates = s.sar_dates;
        in.query_date = s.query_date;
        const Tensor loss = scale(masked_sse(model.forward(in), target_velocity(s.y, s.noise), s.mask), inv);
        stats.loss += loss.item();
        backward(loss);
    }
    if (!std::isfinite(stats.loss)) {
        model.params().zero_grad();
        throw TrainingError("non-finite training loss (" + std::to_string(stats.loss) + ") at optimizer step " +
                            std::to_string(optimizer.steps() + 1));
    }
    for (const auto& name : model.params().names()) {
        const Tensor& p = model.params().get(name);
        if (p.has_grad() && !all_finite(p.grad())) {
            model.params().zero_grad();
            throw TrainingError("non-finite gradient in " + name + " at optimizer step " +
                                std::to_string(optimizer.steps() + 1));
        }
    }
    optimizer.step(model.params(), lr);
    stats.applied = true;
    return stats;
}

Trainer::Trainer(Sdt& model, const Dataset& data, std::vector<std::size_t> train_ids, TrainConfig config)
    : model_(model),
      data_(data),
      train_ids_(std::move(train_ids)),
      config_(std::move(config)),
      adam_(config_.beta1, config_.beta2, config_.adam_eps),
      rng_(config_.seed) {
    config_.validate();
    if (train_ids_.empty()) throw std::invalid_argument("trainer: no training sequences");
    const SdtConfig& mc = model_.config();
    if (data_.config.height != mc.height || data_.config.width != mc.width ||
        data_.config.optical_channels != mc.optical_channels || data_.config.sar_channels != mc.sar_channels)
        throw std::invalid_argument("trainer: dataset grid/channels do not match the model configuration");
    for (std::size_t id : train_ids_) {
        if (id >= data_.sequences.size()) throw std::out_of_range("trainer: sequence index out of range");
        if (data_.sequences[id].clean.frames() < mc.window)
            throw std::invalid_argument("trainer: sequence " + data_.sequences[id].id + " is shorter than the window");
    }
    Rng pool_rng(config_.seed ^ kPoolStream);
    pool_ = make_mask_pool(mc.height, mc.width, data_.config.mask_pool, pool_rng);
}

double Trainer::lr_at(std::size_t epoch) const {
    double lr = config_.lr;
    for (double m : config_.milestones)
        if (epoch >= static_cast<std::size_t>(std::floor(m * static_cast<double>(config_.epochs)))) lr *= config_.lr_gamma;
    return lr;
}

EpochRecord Trainer::run_epoch() {
    const std::size_t tw = model_.config().window;
    std::vector<std::size_t> order = train_ids_;
    std::shuffle(order.begin(), order.end(), rng_);

    EpochRecord rec;
    rec.epoch = epoch_;
    rec.lr = lr_at(epoch_);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config_.batch_size) {
        std::vector<TrainSample> batch;
        for (std::size_t i = b; i < std::min(order.size(), b + config_.batch_size); ++i) {
            const SequenceRecord& rec_i = data_.sequences[order[i]];
            const std::size_t start =
                std::uniform_int_distribution<std::size_t>(0, rec_i.clean.frames() - tw)(rng_);
            batch.push_back(build_sample(extract_window(rec_i, Window{start, tw}, config_.sar_margin_days), pool_,
                                         config_, rng_));
        }
        try {
            const StepStats s = train_step(model_, adam_, batch, rec.lr, &counters_);
            loss_sum += s.loss;
            ++rec.steps;
        } catch (const TrainingError& e) {
            throw TrainingError(std::string(e.what()) + " (train seed " + std::to_string(config_.seed) + ", epoch " +
                                std::to_string(epoch_) + ", batch " + std::to_string(b / config_.batch_size) + ")");
        }
    }
    rec.mean_loss = rec.steps ? loss_sum / static_cast<double>(rec.steps) : 0.0;
    history_.push_back(rec);
    ++epoch_;
    return rec;
}

std::vector<EpochRecord> Trainer::fit(const std::function<void(const EpochRecord&)>& on_epoch) {
    std::vector<EpochRecord> out;
    while (epoch_ < config_.epochs) {
        out.push_back(run_epoch());
        if (on_epoch) on_epoch(out.back());
    }
    return out;
}

std::string Trainer::state_json() const {
    std::ostringstream rng_state;
    rng_state << rng_;
    json j;
    j["epoch"] = epoch_;
    j["optimizer_steps"] = adam_.steps();
    j["rng"] = rng_state.str();
    json hist = json::array();
    for (const auto& h : history_)
        hist.push_back({{"epoch", h.epoch}, {"loss", h.mean_loss}, {"lr", h.lr}, {"steps", h.steps}});
    j["history"] = hist;
    return j.dump(2);
}

void Trainer::load_state_json(const std::string& text) {
    const json j = json::parse(text);
    epoch_ = j.at("epoch").get<std::size_t>();
    std::istringstream rng_state(j.at("rng").get<std::string>());
    rng_state >> rng_;
    history_.clear();
    for (const auto& h : j.at("history"))
        history_.push_back({h.at("epoch").get<std::size_t>(), h.at("loss").get<double>(), h.at("lr").get<double>(),
                            h.at("steps").get<std::size_t>()});
}

}  // namespace tsflow
