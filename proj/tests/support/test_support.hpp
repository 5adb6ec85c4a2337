// SPDX-License-Identifier: Apache-2.0
// Shared helpers for unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "cxrfuse/model.hpp"
#include "cxrfuse/params.hpp"
#include "cxrfuse/rng.hpp"

namespace cxrfuse::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(shape);
    for (double& x : t.data()) x = rng.uniform(lo, hi);
    return t;
}

/// Uniform draws kept at least `gap` away from zero, for inputs to kinked ops.
inline Tensor away_from_zero(const Shape& shape, Rng& rng, double gap = 0.05) {
    Tensor t = Tensor::zeros(shape);
    for (double& x : t.data()) {
        const double m = rng.uniform(gap, 1.0);
        x = rng.below(2) ? m : -m;
    }
    return t;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_path;
    std::size_t checked = 0;
};

using OutputFn = std::function<Var(const ParameterBinder&)>;

/// Compares tape gradients with central differences. The output is reduced
/// to a scalar through a fixed random projection so every entry matters.
/// Per tensor, error = max|analytic - numeric| / max(max|numeric|, 1e-8).
inline GradCheckResult gradcheck(ModelParameters& params, const OutputFn& fn, double step = 1e-5,
                                 std::uint64_t projection_seed = 99) {
    Tensor projection;
    auto scalar_loss = [&](bool trainable, Gradients* grads) {
        Tape tape;
        ParameterBinder bind(tape, params, trainable);
        Var out = fn(bind);
        if (projection.shape() != out.shape()) {
            Rng prng(projection_seed);
            projection = random_tensor(out.shape(), prng);
        }
        Var loss = ops::sum(ops::mul(out, tape.constant(projection)));
        if (grads != nullptr) *grads = tape.backward(loss);
        return loss.value()[0];
    };

    Gradients analytic;
    scalar_loss(true, &analytic);
    GradCheckResult result;
    for (auto& [path, tensor] : params) {
        const Tensor& a = analytic.at(path);
        double max_diff = 0.0, max_num = 0.0;
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double orig = tensor[i];
            tensor[i] = orig + step;
            const double up = scalar_loss(false, nullptr);
            tensor[i] = orig - step;
            const double down = scalar_loss(false, nullptr);
            tensor[i] = orig;
            const double numeric = (up - down) / (2.0 * step);
            max_diff = std::max(max_diff, std::abs(a[i] - numeric));
            max_num = std::max(max_num, std::abs(numeric));
            ++result.checked;
        }
        const double rel = max_diff / std::max(max_num, 1e-8);
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_path = path;
        }
    }
    return result;
}

/// d_model 8, 2 heads, one decoder layer, report vocabulary 20.
inline ModelConfig tiny_model_config() {
    ModelConfig c;
    c.model_dim = 8;
    c.text_embed_dim = 4;
    c.num_heads = 2;
    c.key_dim = 4;
    c.value_dim = 4;
    c.ff_dim = 16;
    c.decoder_layers = 1;
    c.image_tokens = 4;
    c.image_feature_dim = 12;
    c.scalar_out = 8;
    c.chief_len = 2;
    c.icd_len = 6;
    c.report_len = 8;
    c.chief_vocab = 9;
    c.icd_vocab = 11;
    c.report_vocab = 20;
    c.toy_image_side = 8;
    c.toy_patch = 4;
    return c;
}

/// A record whose fields fit `cfg` (report ids START ... END PAD...).
inline PatientRecord random_record(const ModelConfig& cfg, Rng& rng, std::size_t content_tokens = 4) {
    PatientRecord r;
    r.sample_id = "rec-" + std::to_string(rng.below(1000000));
    std::array<double, kScalarCount> s{};
    for (std::size_t i = 0; i + 1 < kScalarCount; ++i) s[i] = rng.uniform();
    s[kScalarCount - 1] = static_cast<double>(rng.below(2));
    r.scalars = ScalarFeatures::from_array(s);
    r.ethnicity = static_cast<int>(1 + rng.below(kEthnicityGroups));
    for (std::size_t i = 0; i < cfg.chief_len; ++i) r.chief_ids.push_back(4 + rng.below(cfg.chief_vocab - 4));
    for (std::size_t i = 0; i < cfg.icd_len; ++i) r.icd_ids.push_back(i < 3 ? 4 + rng.below(cfg.icd_vocab - 4) : kPadId);
    r.image.resize(cfg.image_input_size());
    for (double& x : r.image) x = rng.uniform(-1.0, 1.0);
    r.report_ids.push_back(kStartId);
    content_tokens = std::min(content_tokens, cfg.report_len - 2);
    for (std::size_t i = 0; i < content_tokens; ++i) r.report_ids.push_back(4 + rng.below(cfg.report_vocab - 4));
    r.report_ids.push_back(kEndId);
    r.report_ids.resize(cfg.report_len, kPadId);
    return r;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cxrfuse-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace cxrfuse::testing
