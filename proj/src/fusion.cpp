// SPDX-License-Identifier: Apache-2.0
// Patient representation, image pathway and cross-modal fusion.
#include <string>

#include "cxrfuse/errors.hpp"
#include "cxrfuse/model.hpp"

namespace cxrfuse {

void ScalarFeatures::validate() const {
    const auto values = as_array();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
            throw ContractError(std::string("scalar feature '") + kScalarNames[i] + "' = " + std::to_string(values[i]) +
                                " lies outside [0, 1]");
        }
    }
    if (gender != 0.0 && gender != 1.0) throw ContractError("gender must be exactly 0 or 1");
}

Tensor one_hot_ethnicity(int category) {
    if (category < 1 || category > static_cast<int>(kEthnicityGroups)) {
        throw ContractError("ethnicity category " + std::to_string(category) + " outside [1, 9]");
    }
    Tensor v({kEthnicityGroups});
    v[static_cast<std::size_t>(category - 1)] = 1.0;
    return v;
}

Var encode_scalars(Var scalars, Var w, Var b) {
    if (scalars.value().rank() != 2 || scalars.value().cols() != kScalarCount) {
        throw DimensionError("scalar input must be [1x8], got " + shape_string(scalars.shape()));
    }
    return ops::dense(scalars, w, b);
}

Var encode_scalars(const ScalarFeatures& s, Var w, Var b) {
    s.validate();
    const auto a = s.as_array();
    return encode_scalars(w.tape->constant(Tensor({1, kScalarCount}, std::vector<double>(a.begin(), a.end()))), w, b);
}

Var embed_text(Var table, std::span<const std::size_t> token_ids) { return ops::gather_rows(table, token_ids); }

namespace {

Var embed_or_zero(const ParameterBinder& bind, const std::string& table, std::span<const std::size_t> ids,
                  std::size_t expected_len, std::size_t width, bool enabled, const char* what) {
    if (ids.size() != expected_len) {
        throw ContractError(std::string(what) + " must hold " + std::to_string(expected_len) + " token ids, got " +
                            std::to_string(ids.size()));
    }
    if (!enabled) return bind.tape().constant(Tensor({1, expected_len * width}));
    return ops::reshape(embed_text(bind(table), ids), {1, expected_len * width});
}

}  // namespace

PatientRepresentation build_patient_representation(const ParameterBinder& bind, const ModelConfig& cfg,
                                                   const PatientRecord& record) {
    Tape& tape = bind.tape();
    const InputMask& mask = cfg.inputs;

    record.scalars.validate();
    auto values = record.scalars.as_array();
    for (std::size_t i = 0; i < kScalarCount; ++i) {
        if (!mask.scalars[i]) values[i] = 0.0;
    }
    Var scalar_in = tape.constant(Tensor({1, kScalarCount}, std::vector<double>(values.begin(), values.end())));
    Var scalar_out = encode_scalars(scalar_in, bind("encoder.scalar.w"), bind("encoder.scalar.b"));

    Tensor eth = one_hot_ethnicity(record.ethnicity);
    if (!mask.ethnicity) eth = Tensor({kEthnicityGroups});
    Var eth_row = tape.constant(eth.reshaped({1, kEthnicityGroups}));

    // token-major flatten: [L×E] -> [1×L·E]
    Var chief = embed_or_zero(bind, "encoder.chief_embed", record.chief_ids, cfg.chief_len, cfg.text_embed_dim,
                              mask.chief, "chief complaint");
    Var icd = embed_or_zero(bind, "encoder.icd_embed", record.icd_ids, cfg.icd_len, cfg.text_embed_dim, mask.icd,
                            "ICD title");

    PatientRepresentation rep;
    rep.features = ops::concat({scalar_out, eth_row, chief, icd}, 1);
    if (cfg.patient_layout == PatientLayout::SingleRow) {
        rep.rows = ops::dense(rep.features, bind("encoder.patient_proj.w"), bind("encoder.patient_proj.b"));
    } else {
        const std::string p = "encoder.patient_proj.";
        Var r0 = ops::dense(scalar_out, bind(p + "scalar.w"), bind(p + "scalar.b"));
        Var r1 = ops::dense(eth_row, bind(p + "ethnicity.w"), bind(p + "ethnicity.b"));
        Var r2 = ops::dense(chief, bind(p + "chief.w"), bind(p + "chief.b"));
        Var r3 = ops::dense(icd, bind(p + "icd.w"), bind(p + "icd.b"));
        rep.rows = ops::concat({r0, r1, r2, r3}, 0);
    }
    return rep;
}

Var toy_extractor(const ParameterBinder& bind, const ModelConfig& cfg, Var pixels) {
    const std::size_t side = cfg.toy_image_side, patch = cfg.toy_patch;
    const Tensor& px = pixels.value();
    if (px.size() != side * side) {
        throw DimensionError("toy extractor expects " + std::to_string(side * side) + " pixels, got " +
                             std::to_string(px.size()));
    }
    const std::size_t grid = side / patch;
    // patch means are parameter-free, so they are folded into a constant pooling matrix
    Tensor pool({side * side, grid * grid});
    const double inv = 1.0 / static_cast<double>(patch * patch);
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c) pool.at(r * side + c, (r / patch) * grid + (c / patch)) = inv;
    Var flat = ops::reshape(pixels, {1, side * side});
    Var means = ops::matmul(flat, bind.tape().constant(std::move(pool)));
    return ops::dense(means, bind("encoder.toy_extractor.w"), bind("encoder.toy_extractor.b"), ops::Activation::Relu);
}

Var image_pathway(const ParameterBinder& bind, const ModelConfig& cfg, Var features) {
    const Tensor& fv = features.value();
    if (fv.size() != cfg.image_feature_dim) {
        throw DimensionError("image features have length " + std::to_string(fv.size()) + ", expected " +
                             std::to_string(cfg.image_feature_dim));
    }
    Var x = ops::reshape(features, {1, cfg.image_feature_dim});
    x = ops::layer_norm(x, bind("encoder.image.ln_in.gamma"), bind("encoder.image.ln_in.beta"), cfg.layer_norm_eps);
    x = ops::dense(x, bind("encoder.image.dense.w"), bind("encoder.image.dense.b"));
    Var tokens = ops::reshape(x, {cfg.image_tokens, cfg.model_dim});
    auto proj = bind.attention("encoder.image.self_attn", cfg.num_heads);
    Var attended = multi_head_attention(tokens, tokens, tokens, proj).output;
    return ops::layer_norm(ops::add(tokens, attended), bind("encoder.image.ln_out.gamma"),
                           bind("encoder.image.ln_out.beta"), cfg.layer_norm_eps);
}

FusionOutput cross_attention_fusion(const ParameterBinder& bind, const ModelConfig& cfg, Var image_emb,
                                    Var patient_rows) {
    if (image_emb.shape().back() != cfg.model_dim || patient_rows.shape().back() != cfg.model_dim) {
        throw DimensionError("fusion inputs must have width " + std::to_string(cfg.model_dim) + ": image " +
                             shape_string(image_emb.shape()) + ", patient " + shape_string(patient_rows.shape()));
    }
    auto proj = bind.attention("encoder.cross_attn", cfg.num_heads);
    auto mha = multi_head_attention(image_emb, patient_rows, patient_rows, proj);
    FusionOutput out;
    out.output = ops::layer_norm(ops::add(image_emb, mha.output), bind("encoder.ln_cross.gamma"),
                                 bind("encoder.ln_cross.beta"), cfg.layer_norm_eps);
    out.head_weights = std::move(mha.head_weights);
    return out;
}

Var encode(const ParameterBinder& bind, const ModelConfig& cfg, const PatientRecord& record) {
    if (record.image.size() != cfg.image_input_size()) {
        throw DimensionError("record '" + record.sample_id + "' carries " + std::to_string(record.image.size()) +
                             " image values, expected " + std::to_string(cfg.image_input_size()));
    }
    Var raw = bind.tape().constant(Tensor({1, record.image.size()}, record.image));
    Var features = cfg.image_source == ImageSource::ToyExtractor ? toy_extractor(bind, cfg, raw) : raw;
    Var image = image_pathway(bind, cfg, features);
    auto patient = build_patient_representation(bind, cfg, record);
    return cross_attention_fusion(bind, cfg, image, patient.rows).output;
}

}  // namespace cxrfuse
