// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxrfuse/tensor.hpp"

namespace cxrfuse {

using NodeId = std::size_t;
using Gradients = std::map<std::string, Tensor>;

class Tape;

enum class OpKind {
    Constant,
    Parameter,
    Add,
    AddBias,
    Mul,
    Scale,
    Matmul,
    MatmulNT,
    Transpose,
    Relu,
    Dropout,
    Softmax,
    LayerNorm,
    Concat,
    Slice,
    Reshape,
    Sum,
    Gather,
    CrossEntropy,
};

const char* op_name(OpKind kind);

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    NodeId id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

/// Accumulates input gradients during the backward sweep of one node.
class GradSink {
public:
    GradSink(const Tape& tape, std::span<const NodeId> inputs, std::vector<std::optional<Tensor>>& grads);

    bool wants(std::size_t input) const;
    /// Zero-initialized (on first touch) accumulator for input `input`.
    Tensor& slot(std::size_t input);
    void add(std::size_t input, const Tensor& g);

private:
    const Tape& tape_;
    std::span<const NodeId> inputs_;
    std::vector<std::optional<Tensor>>& grads_;
};

using BackwardFn = std::function<void(const Tensor& grad_out, GradSink& sink)>;

/// Append-only record of a forward computation. Node ids are assigned in
/// creation order, so every node's inputs carry smaller ids. One tape per
/// training step; not thread-safe.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    /// Registers a trainable leaf. `value` is borrowed and must outlive the tape.
    Var parameter(const std::string& path, const Tensor& value);
    /// Non-trainable borrowed leaf; `value` must outlive the tape.
    Var view(const Tensor& value);

    /// Records an op result. `fn` is dropped when no input requires a gradient.
    Var record(OpKind kind, Tensor value, std::vector<NodeId> inputs, BackwardFn fn);

    const Tensor& value(NodeId id) const;
    bool requires_grad(NodeId id) const { return requires_[id]; }
    OpKind kind(NodeId id) const { return nodes_[id].kind; }
    std::span<const NodeId> inputs(NodeId id) const { return nodes_[id].inputs; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool any_requires_grad(std::initializer_list<Var> vars) const;

    /// Reverse sweep from a scalar root. Returns one gradient per registered
    /// parameter path; parameters the root does not depend on get zeros.
    /// A path registered more than once receives the summed gradient.
    Gradients backward(Var root) const;

private:
    struct Node {
        OpKind kind;
        std::vector<NodeId> inputs;
        Tensor owned;
        const Tensor* borrowed = nullptr;
        BackwardFn backward;
    };

    std::deque<Node> nodes_;
    std::vector<bool> requires_;
    std::vector<std::pair<std::string, NodeId>> parameters_;
};

namespace ops {

Var add(Var a, Var b);
/// x[n×d] + b[d] broadcast over rows.
Var add_bias(Var x, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var matmul(Var a, Var b);
/// a[m×k] · b[n×k]ᵀ
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var relu(Var a);
/// Max-subtracted softmax along `axis`.
Var softmax(Var x, std::size_t axis);
/// Normalizes the last axis; epsilon sits inside the square root.
Var layer_norm(Var x, Var gamma, Var beta, double epsilon = 1e-6);
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);
Var reshape(Var x, Shape shape);
/// Sum of all entries, shape [1].
Var sum(Var x);
/// Row gather table[ids[i], :] -> [L×E]; gradient scatters back into the gathered rows.
Var gather_rows(Var table, std::span<const std::size_t> ids);
/// Per-position -log softmax(logits)[target]; masked-out positions are exactly 0.
/// Returns shape [T].
Var sparse_cross_entropy(Var logits, std::span<const std::size_t> targets, const std::vector<bool>& keep);

/// Inverted dropout: zeroes entries with probability `rate` and rescales survivors.
Var dropout(Var x, double rate, std::uint64_t seed);

enum class Activation { Identity, Relu };
/// activation(x·W + b)
Var dense(Var x, Var w, Var b, Activation act = Activation::Identity);

}  // namespace ops

}  // namespace cxrfuse
