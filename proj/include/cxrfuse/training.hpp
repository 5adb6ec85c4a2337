// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxrfuse/errors.hpp"
#include "cxrfuse/model.hpp"
#include "cxrfuse/rng.hpp"

namespace cxrfuse {

struct TrainConfig {
    double base_lr = 3e-4;
    std::size_t warmup_steps = 500;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 100;
    std::size_t early_stop_patience = 5;
    std::uint64_t seed = 0;
    /// Global gradient-norm clip; 0 disables it.
    double clip_norm = 0.0;

    void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are a ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Linear ramp from 0 over the warmup, constant afterwards. t >= 1.
double lr_at_step(std::size_t t, const TrainConfig& cfg);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t t = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
};

/// One bias-corrected Adam update of every parameter that has a gradient.
/// A non-finite gradient raises TrainingError naming its path and leaves
/// parameters and state untouched.
void adam_step(ModelParameters& params, const Gradients& grads, AdamState& state, double lr);

/// Scales `grads` so their global L2 norm is at most `max_norm`; returns the norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

/// Patience counter over validation losses; any strict decrease resets it.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    /// Records one epoch's loss. Returns true when training should stop.
    bool observe(double loss);
    bool improved_last() const noexcept { return improved_last_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best_loss() const noexcept { return best_; }
    std::size_t epochs_seen() const noexcept { return seen_; }

private:
    std::size_t patience_;
    double best_ = 0.0;
    std::size_t best_epoch_ = 0;
    std::size_t seen_ = 0;
    std::size_t bad_ = 0;
    bool improved_last_ = false;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
};

struct FitResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::size_t steps = 0;
    bool stopped_early = false;
    bool diverged = false;
    std::string message;
};

std::string history_csv(const std::vector<EpochRecord>& history);

/// Totals of SampleStats over a set; loss and accuracy are per kept token.
struct SplitStats {
    double loss = 0.0;
    double accuracy = 0.0;
    std::size_t tokens = 0;
};
SplitStats evaluate_split(const ReportModel& model, const std::vector<PatientRecord>& records);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on the mean kept-token loss of each batch. Batches are
/// drawn from a seeded shuffle each epoch and per-sample gradients are summed
/// in batch order. On return the model holds the best-validation parameters.
/// If a loss or gradient becomes non-finite, training stops and the last good
/// (best-validation) parameters are restored with `diverged` set.
FitResult fit(ReportModel& model, const std::vector<PatientRecord>& train, const std::vector<PatientRecord>& val,
              const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct SplitFractions {
    /// Holdout carved off first, then train/val shares of the remainder.
    double test = 1173.0 / 4173.0;
    double train = 0.7;
    double val = 0.3;
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

/// Seeded permutation of [0, n) cut into disjoint index sets.
SplitIndices split_indices(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

template <typename Record>
struct DatasetSplit {
    std::vector<Record> train, val, test;
};

template <typename Record>
DatasetSplit<Record> split_dataset(const std::vector<Record>& records, const SplitFractions& fractions,
                                   std::uint64_t seed) {
    const SplitIndices idx = split_indices(records.size(), fractions, seed);
    DatasetSplit<Record> out;
    for (auto i : idx.train) out.train.push_back(records[i]);
    for (auto i : idx.val) out.val.push_back(records[i]);
    for (auto i : idx.test) out.test.push_back(records[i]);
    return out;
}

}  // namespace cxrfuse
