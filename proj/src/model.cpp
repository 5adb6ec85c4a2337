// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/model.hpp"

#include <set>
#include <string>

#include "cxrfuse/errors.hpp"

namespace cxrfuse {

InputMask InputMask::image_only() {
    InputMask m;
    m.scalars.fill(false);
    m.ethnicity = m.chief = m.icd = false;
    return m;
}

InputMask InputMask::scalar_fusion() {
    InputMask m = image_only();
    m.scalars = {false, true, false, false, true, true, true, true};
    return m;
}

InputMask InputMask::text_fusion() {
    InputMask m = image_only();
    m.chief = m.icd = true;
    return m;
}

InputMask InputMask::o2sat_only() {
    InputMask m = image_only();
    m.scalars[1] = true;
    return m;
}

InputMask InputMask::from_name(const std::string& name) {
    if (name == "all") return all();
    if (name == "image_only") return image_only();
    if (name == "scalars") return scalar_fusion();
    if (name == "text") return text_fusion();
    if (name == "o2sat") return o2sat_only();
    throw ConfigError("unknown input mask '" + name + "' (expected all, image_only, scalars, text, o2sat)");
}

std::string ablation_label(const std::string& mask_name) {
    if (mask_name == "all") return "AllDataFusion";
    if (mask_name == "image_only") return "Baseline";
    if (mask_name == "scalars") return "ScalarFusion";
    if (mask_name == "text") return "TextFusion";
    if (mask_name == "o2sat") return "SingularO2Sat";
    throw ConfigError("unknown input mask '" + mask_name + "'");
}

std::size_t ModelConfig::image_input_size() const {
    return image_source == ImageSource::ToyExtractor ? toy_image_side * toy_image_side : image_feature_dim;
}

void ModelConfig::validate() const {
    attention().validate();
    if (text_embed_dim == 0 || ff_dim == 0 || decoder_layers == 0 || image_tokens == 0 || image_feature_dim == 0 ||
        scalar_out == 0 || chief_len == 0 || icd_len == 0 || report_len < 2) {
        throw ConfigError("model dimensions must be positive (report_len >= 2)");
    }
    if (chief_vocab <= 4 || icd_vocab <= 4 || report_vocab <= 4) {
        throw ConfigError("vocabulary sizes must exceed the 4 reserved ids (chief " + std::to_string(chief_vocab) +
                          ", icd " + std::to_string(icd_vocab) + ", report " + std::to_string(report_vocab) + ")");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (layer_norm_eps <= 0.0) throw ConfigError("layer_norm_eps must be positive");
    if (image_source == ImageSource::ToyExtractor && (toy_patch == 0 || toy_image_side % toy_patch != 0)) {
        throw ConfigError("toy image side must be a multiple of the patch size");
    }
}

namespace {

const char* layout_name(PatientLayout l) { return l == PatientLayout::TypedRows ? "typed_rows" : "single_row"; }
PatientLayout layout_from(const std::string& s) {
    if (s == "typed_rows") return PatientLayout::TypedRows;
    if (s == "single_row") return PatientLayout::SingleRow;
    throw ConfigError("unknown patient_layout '" + s + "'");
}
const char* source_name(ImageSource s) { return s == ImageSource::ToyExtractor ? "toy_extractor" : "precomputed"; }
ImageSource source_from(const std::string& s) {
    if (s == "toy_extractor") return ImageSource::ToyExtractor;
    if (s == "precomputed") return ImageSource::Precomputed;
    throw ConfigError("unknown image_source '" + s + "'");
}

}  // namespace

nlohmann::json config_to_json(const ModelConfig& c) {
    nlohmann::json mask = {{"scalars", c.inputs.scalars},
                           {"ethnicity", c.inputs.ethnicity},
                           {"chief", c.inputs.chief},
                           {"icd", c.inputs.icd}};
    return {{"model_dim", c.model_dim},
            {"text_embed_dim", c.text_embed_dim},
            {"num_heads", c.num_heads},
            {"key_dim", c.key_dim},
            {"value_dim", c.value_dim},
            {"ff_dim", c.ff_dim},
            {"decoder_layers", c.decoder_layers},
            {"image_tokens", c.image_tokens},
            {"image_feature_dim", c.image_feature_dim},
            {"scalar_out", c.scalar_out},
            {"chief_len", c.chief_len},
            {"icd_len", c.icd_len},
            {"report_len", c.report_len},
            {"chief_vocab", c.chief_vocab},
            {"icd_vocab", c.icd_vocab},
            {"report_vocab", c.report_vocab},
            {"layer_norm_eps", c.layer_norm_eps},
            {"dropout", c.dropout},
            {"patient_layout", layout_name(c.patient_layout)},
            {"image_source", source_name(c.image_source)},
            {"toy_image_side", c.toy_image_side},
            {"toy_patch", c.toy_patch},
            {"inputs", mask}};
}

ModelConfig config_from_json(const nlohmann::json& j, ModelConfig c) {
    if (!j.is_object()) throw ConfigError("model configuration must be a JSON object");
    static const std::set<std::string> known = {
        "model_dim", "text_embed_dim", "num_heads",  "key_dim",        "value_dim",    "ff_dim",
        "decoder_layers", "image_tokens", "image_feature_dim", "scalar_out", "chief_len", "icd_len",
        "report_len", "chief_vocab", "icd_vocab", "report_vocab", "layer_norm_eps", "dropout",
        "patient_layout", "image_source", "toy_image_side", "toy_patch", "inputs"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown model key '" + key + "'");
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("model_dim", c.model_dim);
    get("text_embed_dim", c.text_embed_dim);
    get("num_heads", c.num_heads);
    get("key_dim", c.key_dim);
    get("value_dim", c.value_dim);
    get("ff_dim", c.ff_dim);
    get("decoder_layers", c.decoder_layers);
    get("image_tokens", c.image_tokens);
    get("image_feature_dim", c.image_feature_dim);
    get("scalar_out", c.scalar_out);
    get("chief_len", c.chief_len);
    get("icd_len", c.icd_len);
    get("report_len", c.report_len);
    get("chief_vocab", c.chief_vocab);
    get("icd_vocab", c.icd_vocab);
    get("report_vocab", c.report_vocab);
    get("layer_norm_eps", c.layer_norm_eps);
    get("dropout", c.dropout);
    get("toy_image_side", c.toy_image_side);
    get("toy_patch", c.toy_patch);
    if (j.contains("patient_layout")) c.patient_layout = layout_from(j.at("patient_layout").get<std::string>());
    if (j.contains("image_source")) c.image_source = source_from(j.at("image_source").get<std::string>());
    if (j.contains("inputs")) {
        const auto& m = j.at("inputs");
        if (m.is_string()) {
            c.inputs = InputMask::from_name(m.get<std::string>());
        } else {
            c.inputs.scalars = m.at("scalars").get<std::array<bool, kScalarCount>>();
            c.inputs.ethnicity = m.at("ethnicity").get<bool>();
            c.inputs.chief = m.at("chief").get<bool>();
            c.inputs.icd = m.at("icd").get<bool>();
        }
    }
    return c;
}

ModelParameters initialize_parameters(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ModelParameters p;
    const std::size_t d = cfg.model_dim, e = cfg.text_embed_dim;
    const MultiHeadConfig att = cfg.attention();

    init::add_dense(p, "encoder.scalar", kScalarCount, cfg.scalar_out, rng);
    p.add("encoder.chief_embed", init::embedding_normal(cfg.chief_vocab, e, rng));
    p.add("encoder.icd_embed", init::embedding_normal(cfg.icd_vocab, e, rng));
    if (cfg.patient_layout == PatientLayout::SingleRow) {
        init::add_dense(p, "encoder.patient_proj", cfg.patient_feature_width(), d, rng);
    } else {
        init::add_dense(p, "encoder.patient_proj.scalar", cfg.scalar_out, d, rng);
        init::add_dense(p, "encoder.patient_proj.ethnicity", kEthnicityGroups, d, rng);
        init::add_dense(p, "encoder.patient_proj.chief", cfg.chief_len * e, d, rng);
        init::add_dense(p, "encoder.patient_proj.icd", cfg.icd_len * e, d, rng);
    }
    if (cfg.image_source == ImageSource::ToyExtractor) {
        const std::size_t grid = cfg.toy_image_side / cfg.toy_patch;
        init::add_dense(p, "encoder.toy_extractor", grid * grid, cfg.image_feature_dim, rng);
    }
    init::add_layer_norm(p, "encoder.image.ln_in", cfg.image_feature_dim);
    init::add_dense(p, "encoder.image.dense", cfg.image_feature_dim, cfg.image_tokens * d, rng);
    init::add_attention(p, "encoder.image.self_attn", att, rng);
    init::add_layer_norm(p, "encoder.image.ln_out", d);
    init::add_attention(p, "encoder.cross_attn", att, rng);
    init::add_layer_norm(p, "encoder.ln_cross", d);

    p.add("decoder.token_embed", init::embedding_normal(cfg.report_vocab, d, rng));
    for (std::size_t l = 0; l < cfg.decoder_layers; ++l) {
        const std::string pre = "decoder.layer" + std::to_string(l) + ".";
        init::add_attention(p, pre + "self_attn", att, rng);
        init::add_layer_norm(p, pre + "ln1", d);
        init::add_attention(p, pre + "cross_attn", att, rng);
        init::add_layer_norm(p, pre + "ln2", d);
        init::add_dense(p, pre + "ffn1", d, cfg.ff_dim, rng);
        init::add_dense(p, pre + "ffn2", cfg.ff_dim, d, rng);
        init::add_layer_norm(p, pre + "ln3", d);
    }
    init::add_dense(p, "decoder.out", d, cfg.report_vocab, rng);
    return p;
}

ReportModel::ReportModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), params_(initialize_parameters(cfg_, seed)) {}

ReportModel::ReportModel(ModelConfig cfg, ModelParameters params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    const ModelParameters expected = initialize_parameters(cfg_, 0);
    if (expected.size() != params_.size()) {
        throw ConfigError("checkpoint holds " + std::to_string(params_.size()) + " tensors, configuration needs " +
                          std::to_string(expected.size()));
    }
    for (const auto& [path, t] : expected) {
        if (!params_.contains(path)) throw ConfigError("checkpoint lacks parameter '" + path + "'");
        if (params_.at(path).shape() != t.shape()) {
            throw ConfigError("parameter '" + path + "' has shape " + shape_string(params_.at(path).shape()) +
                              ", configuration needs " + shape_string(t.shape()));
        }
    }
}

SampleStats ReportModel::loss_and_gradients(const PatientRecord& record, Gradients& grads_out,
                                            std::uint64_t dropout_seed) const {
    Tape tape;
    ParameterBinder bind(tape, params_, true);
    const auto tf = teacher_forcing_split(record.report_ids);
    Var enc = cxrfuse::encode(bind, cfg_, record);
    Var logits = teacher_forced_forward(bind, cfg_, enc, tf.inputs, dropout_seed);
    Var losses = sparse_ce_loss(logits, tf.targets, tf.keep);
    Var total = ops::sum(losses);
    SampleStats s;
    s.loss_sum = total.value()[0];
    for (std::size_t t = 0; t < tf.targets.size(); ++t) {
        if (!tf.keep[t]) continue;
        ++s.tokens;
        if (argmax_row(logits.value(), t) == tf.targets[t]) ++s.correct;
    }
    grads_out = tape.backward(total);
    return s;
}

SampleStats ReportModel::evaluate(const PatientRecord& record) const {
    Tape tape;
    ParameterBinder bind(tape, params_, false);
    const auto tf = teacher_forcing_split(record.report_ids);
    Var enc = cxrfuse::encode(bind, cfg_, record);
    Var logits = teacher_forced_forward(bind, cfg_, enc, tf.inputs);
    Var losses = sparse_ce_loss(logits, tf.targets, tf.keep);
    SampleStats s;
    for (std::size_t t = 0; t < tf.targets.size(); ++t) {
        if (!tf.keep[t]) continue;
        s.loss_sum += losses.value()[t];
        ++s.tokens;
        if (argmax_row(logits.value(), t) == tf.targets[t]) ++s.correct;
    }
    return s;
}

Tensor ReportModel::encode(const PatientRecord& record) const {
    Tape tape;
    ParameterBinder bind(tape, params_, false);
    return cxrfuse::encode(bind, cfg_, record).value();
}

std::vector<std::size_t> ReportModel::generate_greedy(const PatientRecord& record, std::size_t max_len) const {
    if (max_len > cfg_.report_len) max_len = cfg_.report_len;
    const Tensor enc = encode(record);
    std::vector<std::size_t> seq{kStartId};
    while (seq.size() < max_len) {
        Tape tape;
        ParameterBinder bind(tape, params_, false);
        Var logits = teacher_forced_forward(bind, cfg_, tape.view(enc), seq);
        const std::size_t next = argmax_row(logits.value(), seq.size() - 1);
        seq.push_back(next);
        if (next == kEndId) break;
    }
    return seq;
}

}  // namespace cxrfuse
