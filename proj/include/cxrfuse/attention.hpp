// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cxrfuse/autograd.hpp"

namespace cxrfuse {

struct MultiHeadConfig {
    std::size_t num_heads = 3;
    std::size_t model_dim = 512;
    // 3 heads do not divide 512; per-head width is independent and W^O maps 510 -> 512.
    std::size_t key_dim = 170;
    std::size_t value_dim = 170;

    void validate() const;
};

/// Boolean [n_q×n_k] permission table; true means the key may be attended.
class AttentionMask {
public:
    AttentionMask(std::size_t rows, std::size_t cols, bool fill = true);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool allowed(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j] != 0; }
    void set(std::size_t i, std::size_t j, bool permit) { cells_[i * cols_ + j] = permit ? 1 : 0; }

    friend bool operator==(const AttentionMask&, const AttentionMask&) = default;

private:
    std::size_t rows_, cols_;
    std::vector<std::uint8_t> cells_;
};

/// Lower-triangular mask: (i, j) permitted iff j <= i.
AttentionMask causal_mask(std::size_t n);

/// Additive pre-softmax value for masked logits.
inline constexpr double kMaskedLogit = -1e30;

struct AttentionOutput {
    Var output;
    Var weights;
};

/// softmax(Q·Kᵀ/√d_k + mask)·V. Throws ContractError if any query row has no permitted key.
AttentionOutput scaled_dot_product_attention(Var q, Var k, Var v, const AttentionMask* mask = nullptr);

struct HeadProjections {
    Var wq, wk, wv;
};

/// Tape-bound W^Q_i, W^K_i, W^V_i for every head plus the shared W^O.
struct AttentionProjections {
    std::vector<HeadProjections> heads;
    Var wo;
};

struct MultiHeadOutput {
    Var output;
    std::vector<Var> head_weights;
};

/// Concat(head_1..head_h)·W^O with head_i = Attention(Q·W^Q_i, K·W^K_i, V·W^V_i).
MultiHeadOutput multi_head_attention(Var q_in, Var k_in, Var v_in, const AttentionProjections& proj,
                                     const AttentionMask* mask = nullptr);

}  // namespace cxrfuse
