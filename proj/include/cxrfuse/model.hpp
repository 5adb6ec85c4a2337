// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxrfuse/attention.hpp"
#include "cxrfuse/autograd.hpp"
#include "cxrfuse/params.hpp"
#include "cxrfuse/records.hpp"

namespace cxrfuse {

/// Which encoder inputs reach the fusion block. Masked inputs are zeroed
/// before their first layer, so every ablation shares one architecture.
struct InputMask {
    std::array<bool, kScalarCount> scalars{true, true, true, true, true, true, true, true};
    bool ethnicity = true;
    bool chief = true;
    bool icd = true;

    static InputMask all() { return {}; }
    static InputMask image_only();
    /// o2sat, dbp, temperature, acuity, gender.
    static InputMask scalar_fusion();
    static InputMask text_fusion();
    static InputMask o2sat_only();
    /// all | image_only | scalars | text | o2sat
    static InputMask from_name(const std::string& name);

    friend bool operator==(const InputMask&, const InputMask&) = default;
};

/// Ablation row label ("AllDataFusion", "Baseline", ...) for a mask name.
std::string ablation_label(const std::string& mask_name);

enum class PatientLayout {
    /// The full concatenated vector projected to one key/value row.
    SingleRow,
    /// Scalar | ethnicity | chief | ICD, each projected to its own row.
    TypedRows,
};

enum class ImageSource { Precomputed, ToyExtractor };

struct ModelConfig {
    std::size_t model_dim = 512;
    std::size_t text_embed_dim = 512;
    std::size_t num_heads = 3;
    std::size_t key_dim = 170;
    std::size_t value_dim = 170;
    std::size_t ff_dim = 512;
    std::size_t decoder_layers = 1;
    std::size_t image_tokens = 4;
    std::size_t image_feature_dim = 1280;
    std::size_t scalar_out = 8;
    std::size_t chief_len = 2;
    std::size_t icd_len = 6;
    std::size_t report_len = 43;
    std::size_t chief_vocab = 0;
    std::size_t icd_vocab = 0;
    std::size_t report_vocab = 0;
    double layer_norm_eps = 1e-6;
    double dropout = 0.0;
    PatientLayout patient_layout = PatientLayout::TypedRows;
    ImageSource image_source = ImageSource::Precomputed;
    std::size_t toy_image_side = 16;
    std::size_t toy_patch = 4;
    InputMask inputs;

    MultiHeadConfig attention() const { return {num_heads, model_dim, key_dim, value_dim}; }
    /// M_scalar_out + 9 + (L_chief + L_icd)·E
    std::size_t patient_feature_width() const { return scalar_out + kEthnicityGroups + (chief_len + icd_len) * text_embed_dim; }
    std::size_t patient_rows() const { return patient_layout == PatientLayout::TypedRows ? 4 : 1; }
    /// Length of PatientRecord::image expected by the configured image source.
    std::size_t image_input_size() const;
    void validate() const;
};

nlohmann::json config_to_json(const ModelConfig& cfg);
/// Keys present in `j` override `base`; unknown keys are a ConfigError.
ModelConfig config_from_json(const nlohmann::json& j, ModelConfig base = {});

/// Fresh parameters: fan-in uniform weights, N(0, 0.02) embeddings, unit layer norms.
ModelParameters initialize_parameters(const ModelConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Encoder

/// One-hot of an ethnicity category in [1, 9]; returns [9].
Tensor one_hot_ethnicity(int category);

/// dense([1×8] scalars) -> [1×scalar_out]
Var encode_scalars(Var scalars, Var w, Var b);
/// Validates ranges, then encode_scalars on the 8 values in declared order.
Var encode_scalars(const ScalarFeatures& s, Var w, Var b);

/// Row gather from an embedding table; returns [L×E].
Var embed_text(Var table, std::span<const std::size_t> token_ids);

struct PatientRepresentation {
    /// concat(scalar out, one-hot, flatten(chief emb), flatten(ICD emb)) as [1×W].
    Var features;
    /// Key/value rows at model width: [1×d] or [4×d].
    Var rows;
};

PatientRepresentation build_patient_representation(const ParameterBinder& bind, const ModelConfig& cfg,
                                                   const PatientRecord& record);

/// Toy backbone: patch means over a side×side image, then relu(dense) to the feature width. Returns [1×F].
Var toy_extractor(const ParameterBinder& bind, const ModelConfig& cfg, Var pixels);

/// layernorm -> dense -> reshape to image_tokens rows -> self-attention -> residual -> layernorm.
Var image_pathway(const ParameterBinder& bind, const ModelConfig& cfg, Var features);

struct FusionOutput {
    Var output;
    std::vector<Var> head_weights;
};

/// Image tokens query the patient rows; residual add and layernorm.
FusionOutput cross_attention_fusion(const ParameterBinder& bind, const ModelConfig& cfg, Var image_emb,
                                    Var patient_rows);

/// Full encoder for one record, honoring cfg.inputs. Returns [image_tokens×d].
Var encode(const ParameterBinder& bind, const ModelConfig& cfg, const PatientRecord& record);

// ---------------------------------------------------------------------------
// Decoder

/// Canonical sinusoidal table [length×width].
Tensor sinusoidal_positions(std::size_t length, std::size_t width);

/// Logits [T×V] for decoder inputs `input_ids` (first must be START, T <= report_len).
/// Row t depends only on the encoder output and input_ids[0..t].
Var teacher_forced_forward(const ParameterBinder& bind, const ModelConfig& cfg, Var encoder_out,
                           std::span<const std::size_t> input_ids, std::uint64_t dropout_seed = 0);

/// Unreduced per-position cross-entropy [T]; positions with keep=false are 0.
Var sparse_ce_loss(Var logits, std::span<const std::size_t> true_ids, const std::vector<bool>& keep);

/// Fraction of kept positions whose argmax equals the true id (0 if none kept).
double token_accuracy(const Tensor& logits, std::span<const std::size_t> true_ids, const std::vector<bool>& keep);

/// Lowest index among maximal entries of row `row`.
std::size_t argmax_row(const Tensor& logits, std::size_t row);

// ---------------------------------------------------------------------------

struct SampleStats {
    double loss_sum = 0.0;
    std::size_t tokens = 0;
    std::size_t correct = 0;
};

/// Encoder + decoder with their parameters.
class ReportModel {
public:
    ReportModel(ModelConfig cfg, std::uint64_t seed);
    /// Validates that `params` has exactly the paths and shapes `cfg` requires.
    ReportModel(ModelConfig cfg, ModelParameters params);

    const ModelConfig& config() const noexcept { return cfg_; }
    const ModelParameters& parameters() const noexcept { return params_; }
    ModelParameters& parameters() noexcept { return params_; }

    /// Teacher-forced token statistics plus parameter gradients of the summed token loss.
    SampleStats loss_and_gradients(const PatientRecord& record, Gradients& grads_out,
                                   std::uint64_t dropout_seed = 0) const;
    /// Forward-only statistics (no dropout).
    SampleStats evaluate(const PatientRecord& record) const;
    /// Encoder output with frozen parameters.
    Tensor encode(const PatientRecord& record) const;
    /// START, then argmax tokens until END or max_len ids in total.
    std::vector<std::size_t> generate_greedy(const PatientRecord& record, std::size_t max_len = 43) const;

private:
    ModelConfig cfg_;
    ModelParameters params_;
};

/// Splits padded report ids into decoder inputs, targets and the non-PAD mask.
struct TeacherForcingBatch {
    std::vector<std::size_t> inputs;
    std::vector<std::size_t> targets;
    std::vector<bool> keep;
};
TeacherForcingBatch teacher_forcing_split(std::span<const std::size_t> report_ids);

}  // namespace cxrfuse
