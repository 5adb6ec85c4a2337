// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>

#include "cxrfuse/errors.hpp"
#include "cxrfuse/model.hpp"

namespace cxrfuse {

Tensor sinusoidal_positions(std::size_t length, std::size_t width) {
    Tensor pe({length, width});
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < width; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
            const double angle = static_cast<double>(pos) * rate;
            pe.at(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

Var teacher_forced_forward(const ParameterBinder& bind, const ModelConfig& cfg, Var encoder_out,
                           std::span<const std::size_t> input_ids, std::uint64_t dropout_seed) {
    const std::size_t steps = input_ids.size();
    if (steps == 0) throw ContractError("decoder input is empty");
    if (steps > cfg.report_len) {
        throw ContractError("decoder input of " + std::to_string(steps) + " tokens exceeds the maximum of " +
                            std::to_string(cfg.report_len));
    }
    if (input_ids.front() != kStartId) throw ContractError("decoder input must begin with START");
    if (encoder_out.shape().back() != cfg.model_dim) {
        throw DimensionError("encoder output width " + shape_string(encoder_out.shape()) + " != model width");
    }
    Tape& tape = bind.tape();
    const double drop = cfg.dropout;
    std::uint64_t drop_stream = dropout_seed;
    auto maybe_drop = [&](Var v) { return drop > 0.0 ? ops::dropout(v, drop, ++drop_stream * 0x9E3779B97F4A7C15ULL) : v; };

    Var x = ops::scale(ops::gather_rows(bind("decoder.token_embed"), input_ids),
                       std::sqrt(static_cast<double>(cfg.model_dim)));
    x = ops::add(x, tape.constant(sinusoidal_positions(steps, cfg.model_dim)));
    x = maybe_drop(x);

    const AttentionMask causal = causal_mask(steps);
    for (std::size_t l = 0; l < cfg.decoder_layers; ++l) {
        const std::string p = "decoder.layer" + std::to_string(l) + ".";
        Var self = multi_head_attention(x, x, x, bind.attention(p + "self_attn", cfg.num_heads), &causal).output;
        x = ops::layer_norm(ops::add(x, maybe_drop(self)), bind(p + "ln1.gamma"), bind(p + "ln1.beta"),
                            cfg.layer_norm_eps);
        Var cross = multi_head_attention(x, encoder_out, encoder_out, bind.attention(p + "cross_attn", cfg.num_heads))
                        .output;
        x = ops::layer_norm(ops::add(x, maybe_drop(cross)), bind(p + "ln2.gamma"), bind(p + "ln2.beta"),
                            cfg.layer_norm_eps);
        Var hidden = ops::dense(x, bind(p + "ffn1.w"), bind(p + "ffn1.b"), ops::Activation::Relu);
        Var ff = ops::dense(hidden, bind(p + "ffn2.w"), bind(p + "ffn2.b"));
        x = ops::layer_norm(ops::add(x, maybe_drop(ff)), bind(p + "ln3.gamma"), bind(p + "ln3.beta"),
                            cfg.layer_norm_eps);
    }
    return ops::dense(x, bind("decoder.out.w"), bind("decoder.out.b"));
}

Var sparse_ce_loss(Var logits, std::span<const std::size_t> true_ids, const std::vector<bool>& keep) {
    return ops::sparse_cross_entropy(logits, true_ids, keep);
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    const std::size_t width = logits.cols();
    const double* p = logits.data().data() + row * width;
    std::size_t best = 0;
    for (std::size_t j = 1; j < width; ++j) {
        if (p[j] > p[best]) best = j;
    }
    return best;
}

double token_accuracy(const Tensor& logits, std::span<const std::size_t> true_ids, const std::vector<bool>& keep) {
    if (logits.rows() != true_ids.size() || keep.size() != true_ids.size()) {
        throw DimensionError("token_accuracy: logits " + shape_string(logits.shape()) + " vs " +
                             std::to_string(true_ids.size()) + " targets");
    }
    std::size_t kept = 0, hit = 0;
    for (std::size_t t = 0; t < true_ids.size(); ++t) {
        if (!keep[t]) continue;
        ++kept;
        if (argmax_row(logits, t) == true_ids[t]) ++hit;
    }
    return kept == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(kept);
}

TeacherForcingBatch teacher_forcing_split(std::span<const std::size_t> report_ids) {
    if (report_ids.size() < 2 || report_ids.front() != kStartId) {
        throw ContractError("report ids must start with START and hold at least two tokens");
    }
    TeacherForcingBatch b;
    b.inputs.assign(report_ids.begin(), report_ids.end() - 1);
    b.targets.assign(report_ids.begin() + 1, report_ids.end());
    b.keep.resize(b.targets.size());
    for (std::size_t t = 0; t < b.targets.size(); ++t) b.keep[t] = b.targets[t] != kPadId;
    return b;
}

}  // namespace cxrfuse
