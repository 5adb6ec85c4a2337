// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/attention.hpp"

#include <cmath>
#include <string>

#include "cxrfuse/errors.hpp"

namespace cxrfuse {

void MultiHeadConfig::validate() const {
    if (num_heads < 1 || model_dim < 1 || key_dim < 1 || value_dim < 1) {
        throw ConfigError("attention dimensions must be positive");
    }
}

AttentionMask::AttentionMask(std::size_t rows, std::size_t cols, bool fill)
    : rows_(rows), cols_(cols), cells_(rows * cols, fill ? 1 : 0) {}

AttentionMask causal_mask(std::size_t n) {
    if (n < 1) throw ContractError("causal_mask needs n >= 1");
    AttentionMask m(n, n, false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) m.set(i, j, true);
    return m;
}

AttentionOutput scaled_dot_product_attention(Var q, Var k, Var v, const AttentionMask* mask) {
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    if (qv.rank() != 2 || kv.rank() != 2 || vv.rank() != 2 || qv.cols() != kv.cols() || kv.rows() != vv.rows()) {
        throw DimensionError("attention: Q " + shape_string(qv.shape()) + ", K " + shape_string(kv.shape()) + ", V " +
                             shape_string(vv.shape()) + " do not agree");
    }
    const std::size_t nq = qv.rows(), nk = kv.rows();
    Var logits = ops::scale(ops::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(qv.cols())));
    if (mask != nullptr) {
        if (mask->rows() != nq || mask->cols() != nk) {
            throw DimensionError("attention mask " + std::to_string(mask->rows()) + "x" + std::to_string(mask->cols()) +
                                 " does not match logits " + std::to_string(nq) + "x" + std::to_string(nk));
        }
        Tensor bias({nq, nk});
        for (std::size_t i = 0; i < nq; ++i) {
            bool any = false;
            for (std::size_t j = 0; j < nk; ++j) {
                if (mask->allowed(i, j)) {
                    any = true;
                } else {
                    bias.at(i, j) = kMaskedLogit;
                }
            }
            if (!any) throw ContractError("attention query row " + std::to_string(i) + " has every key masked");
        }
        logits = ops::add(logits, q.tape->constant(std::move(bias)));
    }
    Var weights = ops::softmax(logits, 1);
    return {ops::matmul(weights, v), weights};
}

MultiHeadOutput multi_head_attention(Var q_in, Var k_in, Var v_in, const AttentionProjections& proj,
                                     const AttentionMask* mask) {
    if (proj.heads.empty()) throw ConfigError("multi-head attention needs at least one head");
    const std::size_t width = q_in.shape().back();
    if (k_in.shape().back() != width || v_in.shape().back() != width) {
        throw DimensionError("multi-head attention inputs must share model width: " + shape_string(q_in.shape()) +
                             ", " + shape_string(k_in.shape()) + ", " + shape_string(v_in.shape()));
    }
    MultiHeadOutput result;
    std::vector<Var> heads;
    heads.reserve(proj.heads.size());
    for (const auto& h : proj.heads) {
        auto att = scaled_dot_product_attention(ops::matmul(q_in, h.wq), ops::matmul(k_in, h.wk),
                                                ops::matmul(v_in, h.wv), mask);
        heads.push_back(att.output);
        result.head_weights.push_back(att.weights);
    }
    Var joined = heads.size() == 1 ? heads.front() : ops::concat(heads, 1);
    result.output = ops::matmul(joined, proj.wo);
    return result;
}

}  // namespace cxrfuse
