// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsflow/flow.hpp"
#include "tsflow/sdt.hpp"
#include "tsflow/sequence_data.hpp"
#include "tsflow/synth.hpp"

namespace tsflow {

struct TrainConfig {
    double lr = 2e-4;
    std::size_t batch_size = 16;
    std::size_t epochs = 200;
    std::vector<double> milestones{0.6, 0.85};  // fractions of the epoch budget
    double lr_gamma = 0.3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double p_anytime = 0.5;
    double cloud_probability = 0.5;
    int sar_margin_days = 16;
    std::uint64_t seed = 0;

    /// Budget used with SdtConfig::desk() on the synthetic benchmark.
    static TrainConfig desk();

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

std::string train_config_to_json(const TrainConfig& config);
/// Unknown keys are rejected; missing keys keep their defaults.
TrainConfig train_config_from_json(const std::string& text);

/// Fixed train/test partition of a dataset: every fifth sequence is held out.
struct DataSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
DataSplit split_dataset(std::size_t sequences);

/// Clean frames of one window with the SAR frames that fall inside its date span
/// (widened by a margin on each side).
struct WindowData {
    Tensor clean;  // [Tw, C, H, W]
    std::vector<int> dates;
    Tensor sar;    // [Ts', Cs, H, W]
    std::vector<int> sar_dates;
};

WindowData extract_window(const SequenceRecord& record, const Window& window, int sar_margin_days);

/// One masked flow-matching training example.
struct TrainSample {
    Tensor y;      // clean
    Tensor x;      // observed composite
    Tensor mask;
    Tensor noise;
    double tau = 0.0;
    std::vector<int> dates;
    Tensor sar;
    std::vector<int> sar_dates;
    std::optional<int> query_date;
};

/// Cloud masks from the pool per frame, then with probability p_anytime one frame fully
/// masked as an anytime query.
TrainSample build_sample(const WindowData& window, const MaskPool& pool, const TrainConfig& config, Rng& rng);

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Adam with bias correction over the trainable entries of a parameter store.
class Adam {
public:
    Adam(double beta1, double beta2, double eps);

    void step(ParameterStore& params, double lr);
    std::size_t steps() const { return t_; }

    NamedTensors state() const;
    void load_state(const NamedTensors& tensors, std::size_t steps);

private:
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

struct StepStats {
    double loss = 0.0;
    std::size_t masked_entries = 0;
    bool applied = false;  // false when the batch had nothing to learn from
};

/// Mean masked velocity error over the whole batch; one optimizer step. Throws
/// TrainingError on a non-finite loss or gradient without touching the parameters.
StepStats train_step(Sdt& model, Adam& optimizer, const std::vector<TrainSample>& batch, double lr,
                     LossCounters* counters = nullptr);

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
    std::size_t steps = 0;
};

class Trainer {
public:
    Trainer(Sdt& model, const Dataset& data, std::vector<std::size_t> train_ids, TrainConfig config);

    /// One shuffled pass with a random window from every training sequence.
    EpochRecord run_epoch();
    /// Runs the remaining epochs of the budget.
    std::vector<EpochRecord> fit(const std::function<void(const EpochRecord&)>& on_epoch = {});

    double lr_at(std::size_t epoch) const;
    std::size_t epoch() const { return epoch_; }
    const std::vector<EpochRecord>& history() const { return history_; }
    const LossCounters& counters() const { return counters_; }
    const TrainConfig& config() const { return config_; }
    Adam& optimizer() { return adam_; }
    const Adam& optimizer() const { return adam_; }

    /// Serialized RNG state and epoch counter for resumption.
    std::string state_json() const;
    void load_state_json(const std::string& text);

private:
    Sdt& model_;
    const Dataset& data_;
    std::vector<std::size_t> train_ids_;
    TrainConfig config_;
    MaskPool pool_;
    Adam adam_;
    Rng rng_;
    std::size_t epoch_ = 0;
    std::vector<EpochRecord> history_;
    LossCounters counters_;
};

}  // namespace tsflow
