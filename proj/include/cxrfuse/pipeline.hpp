// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxrfuse/dataset.hpp"
#include "cxrfuse/metrics.hpp"
#include "cxrfuse/model.hpp"
#include "cxrfuse/preprocess.hpp"
#include "cxrfuse/synthetic.hpp"
#include "cxrfuse/training.hpp"

namespace cxrfuse {

struct PreprocessOptions {
    SplitFractions fractions;
    std::uint64_t split_seed = 0;
    SequenceLengths lengths;
    /// Balanced subset size drawn after vocabulary fitting; 0 keeps every record.
    std::size_t balance = 0;
    std::uint64_t balance_seed = 0;
    /// Extra abbreviation rules appended to the clinical defaults.
    std::optional<fs::path> abbreviations;
    PlausibleBounds bounds;
};

/// Model-ready splits plus the artifacts fitted while producing them.
struct PreparedDataset {
    std::vector<PatientRecord> train, val, test;
    TextVocabularies vocabs;
    NormalizationStats stats;
    OutlierReport outliers;
    /// Planted sentence spans when the data is synthetic, else empty.
    std::map<std::string, std::vector<PlantedSpan>> planted;

    const std::vector<PatientRecord>& split(const std::string& name) const;
};

/// Outlier removal, vocabulary fitting on every retained record, optional
/// balancing, seeded splitting, and normalization fitted on the train split.
PreparedDataset prepare_dataset(const std::vector<RawRecord>& raw, const ImageTable& images,
                                const PreprocessOptions& options);
PreparedDataset prepare_dataset(const SyntheticDataset& data, const PreprocessOptions& options);

/// `base` with vocabulary sizes, sequence lengths and feature width taken from the data.
ModelConfig model_config_for(const PreparedDataset& data, ModelConfig base);

/// Greedy decoding of `records` (the first `limit` when nonzero).
std::vector<GeneratedReport> generate_reports(const ReportModel& model, const Vocabulary& report_vocab,
                                              const std::vector<PatientRecord>& records, std::size_t limit = 0);

std::vector<EvalPair> to_eval_pairs(const std::vector<GeneratedReport>& reports);

PlantedAccuracy planted_accuracy(const std::vector<GeneratedReport>& reports,
                                 const std::map<std::string, std::vector<PlantedSpan>>& planted);

struct EvalSettings {
    EvalOptions options;
    std::size_t embedding_dim = 64;
    std::optional<fs::path> embeddings_file;

    std::unique_ptr<EmbeddingProvider> provider() const;
};

// Configuration file ---------------------------------------------------

struct AblationOptions {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<std::string> masks{"image_only", "all"};
    /// Test records decoded per run; 0 decodes the whole test split.
    std::size_t eval_limit = 0;
};

/// Sections "synthetic", "preprocess", "model", "train", "evaluate", "ablation"; all optional.
struct PipelineConfig {
    SyntheticConfig synthetic;
    PreprocessOptions preprocess;
    ModelConfig model;
    TrainConfig train;
    std::uint64_t init_seed = 0;
    EvalSettings evaluate;
    AblationOptions ablation;
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});
PipelineConfig load_pipeline_config(const fs::path& file, PipelineConfig base = {});

/// Small model and schedule for desk-scale ablations and overfit runs.
PipelineConfig desk_scale_config();

// On-disk stages ---------------------------------------------------------

using LogFn = std::function<void(const std::string&)>;

/// Writes raw.{jsonl,csv}, images.jsonl, planted.jsonl and manifest.json.
DatasetManifest run_synth(const SyntheticConfig& cfg, const fs::path& out_dir, DataFormat format);

/// Reads a synth-style directory, writes records.jsonl, images.jsonl, vocab.json,
/// stats.json (plus planted.jsonl when present) and manifest.json.
DatasetManifest run_preprocess(const fs::path& data_dir, const fs::path& out_dir, const PreprocessOptions& options,
                               const LogFn& log = {});

/// Loads a preprocessed directory after verifying its manifest.
PreparedDataset load_prepared(const fs::path& dir);

/// Writes model_config.json, train_config.json, checkpoint.json, history.csv and fit.json.
FitResult run_train(const fs::path& dataset_dir, const fs::path& out_dir, const PipelineConfig& cfg,
                    const LogFn& log = {});

ReportModel load_model(const fs::path& model_dir);

std::vector<GeneratedReport> run_generate(const fs::path& dataset_dir, const fs::path& model_dir,
                                          const std::string& split, const fs::path& out_file, std::size_t limit = 0);

/// Writes eval_report.json and per_sample.csv into `out_dir`.
EvalReport run_evaluate(const fs::path& generated_file, const fs::path& out_dir, const EvalSettings& settings);

// Ablation ---------------------------------------------------------------

struct AblationRow {
    std::string mask;
    std::string label;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::array<double, 4> bleu{};
    double rouge_l = 0.0;
    double embedding_f1 = 0.0;
    double planted_accuracy = 0.0;
    std::size_t evaluated = 0;
};

struct AblationTable {
    std::vector<AblationRow> runs;

    /// Per-mask means over seeds, in mask order.
    std::vector<AblationRow> summary() const;
    nlohmann::json to_json() const;
    /// Fixed-width table with one row per configuration.
    std::string to_text() const;
};

/// For each seed: synthesize, prepare, then train and evaluate one model per mask.
AblationTable run_ablation(const PipelineConfig& cfg, const LogFn& log = {});

}  // namespace cxrfuse
