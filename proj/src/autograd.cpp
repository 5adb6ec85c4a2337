// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "cxrfuse/errors.hpp"
#include "cxrfuse/rng.hpp"

namespace cxrfuse {

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Constant: return "constant";
        case OpKind::Parameter: return "parameter";
        case OpKind::Add: return "add";
        case OpKind::AddBias: return "add_bias";
        case OpKind::Mul: return "mul";
        case OpKind::Scale: return "scale";
        case OpKind::Matmul: return "matmul";
        case OpKind::MatmulNT: return "matmul_nt";
        case OpKind::Transpose: return "transpose";
        case OpKind::Relu: return "relu";
        case OpKind::Dropout: return "dropout";
        case OpKind::Softmax: return "softmax";
        case OpKind::LayerNorm: return "layer_norm";
        case OpKind::Concat: return "concat";
        case OpKind::Slice: return "slice";
        case OpKind::Reshape: return "reshape";
        case OpKind::Sum: return "sum";
        case OpKind::Gather: return "gather";
        case OpKind::CrossEntropy: return "cross_entropy";
    }
    return "?";
}

const Tensor& Var::value() const {
    if (tape == nullptr) throw ContractError("Var is not attached to a tape");
    return tape->value(id);
}

GradSink::GradSink(const Tape& tape, std::span<const NodeId> inputs, std::vector<std::optional<Tensor>>& grads)
    : tape_(tape), inputs_(inputs), grads_(grads) {}

bool GradSink::wants(std::size_t input) const { return tape_.requires_grad(inputs_[input]); }

Tensor& GradSink::slot(std::size_t input) {
    auto& g = grads_[inputs_[input]];
    if (!g) g.emplace(tape_.value(inputs_[input]).shape());
    return *g;
}

void GradSink::add(std::size_t input, const Tensor& g) {
    if (!wants(input)) return;
    kernels::add_inplace(slot(input), g);
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{OpKind::Constant, {}, std::move(value), nullptr, {}});
    requires_.push_back(false);
    return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(const std::string& path, const Tensor& value) {
    nodes_.push_back(Node{OpKind::Parameter, {}, Tensor{}, &value, {}});
    requires_.push_back(true);
    parameters_.emplace_back(path, nodes_.size() - 1);
    return Var{this, nodes_.size() - 1};
}

Var Tape::view(const Tensor& value) {
    nodes_.push_back(Node{OpKind::Constant, {}, Tensor{}, &value, {}});
    requires_.push_back(false);
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(OpKind kind, Tensor value, std::vector<NodeId> inputs, BackwardFn fn) {
    bool req = false;
    for (auto id : inputs) {
        if (id >= nodes_.size()) throw ContractError("input node does not belong to this tape");
        req = req || requires_[id];
    }
    if (!req) fn = nullptr;
    nodes_.push_back(Node{kind, std::move(inputs), std::move(value), nullptr, std::move(fn)});
    requires_.push_back(req);
    return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(NodeId id) const {
    const Node& n = nodes_.at(id);
    return n.borrowed ? *n.borrowed : n.owned;
}

bool Tape::any_requires_grad(std::initializer_list<Var> vars) const {
    for (const auto& v : vars) {
        if (requires_[v.id]) return true;
    }
    return false;
}

Gradients Tape::backward(Var root) const {
    if (root.tape != this) throw ContractError("backward root belongs to a different tape");
    const Tensor& rv = value(root.id);
    if (rv.size() != 1) {
        throw ContractError("backward requires a scalar root, got shape " + shape_string(rv.shape()));
    }
    std::vector<std::optional<Tensor>> grads(nodes_.size());
    grads[root.id].emplace(Tensor::full(rv.shape(), 1.0));
    for (std::size_t k = root.id + 1; k-- > 0;) {
        const Node& node = nodes_[k];
        if (!grads[k] || !node.backward) {
            if (node.kind != OpKind::Parameter) grads[k].reset();
            continue;
        }
        GradSink sink(*this, node.inputs, grads);
        node.backward(*grads[k], sink);
        grads[k].reset();
    }
    Gradients out;
    for (const auto& [path, id] : parameters_) {
        auto it = out.find(path);
        if (it == out.end()) {
            out.emplace(path, grads[id] ? *grads[id] : Tensor(value(id).shape()));
        } else if (grads[id]) {
            kernels::add_inplace(it->second, *grads[id]);
        }
    }
    return out;
}

namespace ops {

namespace {

Tape& same_tape(std::initializer_list<Var> vars) {
    Tape* t = vars.begin()->tape;
    if (t == nullptr) throw ContractError("Var is not attached to a tape");
    for (const auto& v : vars) {
        if (v.tape != t) throw ContractError("operands live on different tapes");
    }
    return *t;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
}

struct AxisSplit {
    std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.extent = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

Var add(Var a, Var b) {
    Tape& t = same_tape({a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_shape(av, bv, "add");
    Tensor out = av;
    kernels::add_inplace(out, bv);
    return t.record(OpKind::Add, std::move(out), {a.id, b.id}, [](const Tensor& g, GradSink& s) {
        s.add(0, g);
        s.add(1, g);
    });
}

Var add_bias(Var x, Var b) {
    Tape& t = same_tape({x, b});
    const Tensor& xv = x.value();
    const Tensor& bv = b.value();
    const std::size_t d = xv.shape().back();
    if (bv.size() != d || bv.rank() != 1) {
        throw DimensionError("add_bias: bias " + shape_string(bv.shape()) + " does not match last axis of " +
                             shape_string(xv.shape()));
    }
    Tensor out = xv;
    auto po = out.data();
    for (std::size_t i = 0; i < po.size(); ++i) po[i] += bv[i % d];
    return t.record(OpKind::AddBias, std::move(out), {x.id, b.id}, [d](const Tensor& g, GradSink& s) {
        s.add(0, g);
        if (s.wants(1)) {
            Tensor& gb = s.slot(1);
            auto pg = g.data();
            for (std::size_t i = 0; i < pg.size(); ++i) gb[i % d] += pg[i];
        }
    });
}

Var mul(Var a, Var b) {
    Tape& t = same_tape({a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_shape(av, bv, "mul");
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return t.record(OpKind::Mul, std::move(out), {a.id, b.id},
                    [tp = &t, ia = a.id, ib = b.id](const Tensor& g, GradSink& s) {
                        const Tensor& av = tp->value(ia);
                        const Tensor& bv = tp->value(ib);
                        if (s.wants(0)) {
                            Tensor& ga = s.slot(0);
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                        }
                        if (s.wants(1)) {
                            Tensor& gb = s.slot(1);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                        }
                    });
}

Var scale(Var a, double factor) {
    Tape& t = same_tape({a});
    Tensor out = a.value();
    for (auto& v : out.data()) v *= factor;
    return t.record(OpKind::Scale, std::move(out), {a.id}, [factor](const Tensor& g, GradSink& s) {
        Tensor& ga = s.slot(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape({a, b});
    Tensor out = kernels::matmul(a.value(), b.value());
    return t.record(OpKind::Matmul, std::move(out), {a.id, b.id},
                    [tp = &t, ia = a.id, ib = b.id](const Tensor& g, GradSink& s) {
                        // dA = G·Bᵀ, dB = Aᵀ·G
                        if (s.wants(0)) kernels::gemm_nt_acc(g, tp->value(ib), s.slot(0));
                        if (s.wants(1)) kernels::gemm_tn_acc(tp->value(ia), g, s.slot(1));
                    });
}

Var matmul_nt(Var a, Var b) {
    Tape& t = same_tape({a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.cols()) {
        throw DimensionError("matmul_nt inner dimensions disagree: " + shape_string(av.shape()) + " x " +
                             shape_string(bv.shape()) + "^T");
    }
    Tensor out({av.rows(), bv.rows()});
    kernels::gemm_nt_acc(av, bv, out);
    return t.record(OpKind::MatmulNT, std::move(out), {a.id, b.id},
                    [tp = &t, ia = a.id, ib = b.id](const Tensor& g, GradSink& s) {
                        // C = A·Bᵀ: dA = G·B, dB = Gᵀ·A
                        if (s.wants(0)) kernels::gemm_acc(g, tp->value(ib), s.slot(0));
                        if (s.wants(1)) kernels::gemm_tn_acc(g, tp->value(ia), s.slot(1));
                    });
}

Var transpose(Var a) {
    Tape& t = same_tape({a});
    return t.record(OpKind::Transpose, kernels::transpose(a.value()), {a.id}, [](const Tensor& g, GradSink& s) {
        kernels::add_inplace(s.slot(0), kernels::transpose(g));
    });
}

Var relu(Var a) {
    Tape& t = same_tape({a});
    Tensor out = a.value();
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    const NodeId self = t.size();
    return t.record(OpKind::Relu, std::move(out), {a.id}, [tp = &t, self](const Tensor& g, GradSink& s) {
        const Tensor& y = tp->value(self);
        Tensor& ga = s.slot(0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (y[i] > 0.0) ga[i] += g[i];
        }
    });
}

Var dropout(Var x, double rate, std::uint64_t seed) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
    if (rate == 0.0) return x;
    Tape& t = same_tape({x});
    Rng rng(seed);
    auto keep = std::make_shared<std::vector<double>>(x.value().size());
    const double survive = 1.0 / (1.0 - rate);
    for (auto& k : *keep) k = rng.uniform() < rate ? 0.0 : survive;
    Tensor out = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*keep)[i];
    return t.record(OpKind::Dropout, std::move(out), {x.id}, [keep](const Tensor& g, GradSink& s) {
        Tensor& gx = s.slot(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*keep)[i];
    });
}

Var softmax(Var x, std::size_t axis) {
    Tape& t = same_tape({x});
    const Tensor& xv = x.value();
    if (axis >= xv.rank()) {
        throw DimensionError("softmax axis " + std::to_string(axis) + " invalid for " + shape_string(xv.shape()));
    }
    const AxisSplit sp = split_at(xv.shape(), axis);
    Tensor out(xv.shape());
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t in = 0; in < sp.inner; ++in) {
            const std::size_t base = o * sp.extent * sp.inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < sp.extent; ++k) mx = std::max(mx, xv[base + k * sp.inner]);
            double z = 0.0;
            for (std::size_t k = 0; k < sp.extent; ++k) {
                const double e = std::exp(xv[base + k * sp.inner] - mx);
                out[base + k * sp.inner] = e;
                z += e;
            }
            for (std::size_t k = 0; k < sp.extent; ++k) out[base + k * sp.inner] /= z;
        }
    }
    const NodeId self = t.size();
    return t.record(OpKind::Softmax, std::move(out), {x.id}, [tp = &t, self, sp](const Tensor& g, GradSink& s) {
        const Tensor& y = tp->value(self);
        Tensor& gx = s.slot(0);
        for (std::size_t o = 0; o < sp.outer; ++o) {
            for (std::size_t in = 0; in < sp.inner; ++in) {
                const std::size_t base = o * sp.extent * sp.inner + in;
                double dot = 0.0;
                for (std::size_t k = 0; k < sp.extent; ++k) {
                    const std::size_t i = base + k * sp.inner;
                    dot += g[i] * y[i];
                }
                for (std::size_t k = 0; k < sp.extent; ++k) {
                    const std::size_t i = base + k * sp.inner;
                    gx[i] += y[i] * (g[i] - dot);
                }
            }
        }
    });
}

Var layer_norm(Var x, Var gamma, Var beta, double epsilon) {
    Tape& t = same_tape({x, gamma, beta});
    const Tensor& xv = x.value();
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    const std::size_t d = xv.shape().back();
    if (gv.size() != d || bv.size() != d) {
        throw DimensionError("layer_norm: gamma " + shape_string(gv.shape()) + " / beta " + shape_string(bv.shape()) +
                             " must match last axis of " + shape_string(xv.shape()));
    }
    const std::size_t rows = xv.size() / d;
    auto xhat = std::make_shared<Tensor>(xv.shape());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    Tensor out(xv.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* px = xv.data().data() + r * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += px[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (px[j] - mean) * (px[j] - mean);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + epsilon);
        (*inv_std)[r] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (px[j] - mean) * inv;
            (*xhat)[r * d + j] = h;
            out[r * d + j] = gv[j] * h + bv[j];
        }
    }
    return t.record(OpKind::LayerNorm, std::move(out), {x.id, gamma.id, beta.id},
                    [tp = &t, ig = gamma.id, xhat, inv_std, d, rows](const Tensor& g, GradSink& s) {
                        const Tensor& gv = tp->value(ig);
                        if (s.wants(1)) {
                            Tensor& gg = s.slot(1);
                            for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * (*xhat)[i];
                        }
                        if (s.wants(2)) {
                            Tensor& gb = s.slot(2);
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
                        }
                        if (!s.wants(0)) return;
                        Tensor& gx = s.slot(0);
                        const double n = static_cast<double>(d);
                        for (std::size_t r = 0; r < rows; ++r) {
                            double sum_dh = 0.0, sum_dh_h = 0.0;
                            for (std::size_t j = 0; j < d; ++j) {
                                const double dh = g[r * d + j] * gv[j];
                                sum_dh += dh;
                                sum_dh_h += dh * (*xhat)[r * d + j];
                            }
                            const double inv = (*inv_std)[r];
                            for (std::size_t j = 0; j < d; ++j) {
                                const double dh = g[r * d + j] * gv[j];
                                gx[r * d + j] += inv / n * (n * dh - sum_dh - (*xhat)[r * d + j] * sum_dh_h);
                            }
                        }
                    });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat needs at least one tensor");
    Tape& t = *parts.front().tape;
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) {
        throw DimensionError("concat axis " + std::to_string(axis) + " invalid for " + shape_string(first));
    }
    std::vector<std::size_t> extents;
    std::vector<NodeId> ids;
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.tape != &t) throw ContractError("operands live on different tapes");
        const Shape& sh = p.shape();
        bool ok = sh.size() == first.size();
        for (std::size_t i = 0; ok && i < sh.size(); ++i) ok = (i == axis) || sh[i] == first[i];
        if (!ok) {
            throw DimensionError("concat: incompatible shapes " + shape_string(first) + " and " + shape_string(sh) +
                                 " along axis " + std::to_string(axis));
        }
        extents.push_back(sh[axis]);
        ids.push_back(p.id);
        total += sh[axis];
    }
    Shape out_shape = first;
    out_shape[axis] = total;
    const AxisSplit sp = split_at(out_shape, axis);
    Tensor out(out_shape);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& pv = parts[k].value();
        const std::size_t block = extents[k] * sp.inner;
        for (std::size_t o = 0; o < sp.outer; ++o) {
            std::copy_n(pv.data().data() + o * block, block, out.data().data() + o * total * sp.inner + offset);
        }
        offset += block;
    }
    return t.record(OpKind::Concat, std::move(out), std::move(ids),
                    [extents, sp, total](const Tensor& g, GradSink& s) {
                        std::size_t off = 0;
                        for (std::size_t k = 0; k < extents.size(); ++k) {
                            const std::size_t block = extents[k] * sp.inner;
                            if (s.wants(k)) {
                                Tensor& gk = s.slot(k);
                                for (std::size_t o = 0; o < sp.outer; ++o) {
                                    const double* src = g.data().data() + o * total * sp.inner + off;
                                    double* dst = gk.data().data() + o * block;
                                    for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                                }
                            }
                            off += block;
                        }
                    });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
    return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length) {
    Tape& t = same_tape({x});
    const Tensor& xv = x.value();
    if (axis >= xv.rank()) throw DimensionError("slice axis invalid for " + shape_string(xv.shape()));
    if (length == 0 || start + length > xv.dim(axis)) {
        throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                             ") out of range for axis of length " + std::to_string(xv.dim(axis)));
    }
    const AxisSplit sp = split_at(xv.shape(), axis);
    Shape out_shape = xv.shape();
    out_shape[axis] = length;
    Tensor out(out_shape);
    const std::size_t block = length * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
        std::copy_n(xv.data().data() + o * sp.extent * sp.inner + start * sp.inner, block,
                    out.data().data() + o * block);
    }
    return t.record(OpKind::Slice, std::move(out), {x.id}, [sp, start, block](const Tensor& g, GradSink& s) {
        Tensor& gx = s.slot(0);
        for (std::size_t o = 0; o < sp.outer; ++o) {
            const double* src = g.data().data() + o * block;
            double* dst = gx.data().data() + o * sp.extent * sp.inner + start * sp.inner;
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
    });
}

Var reshape(Var x, Shape shape) {
    Tape& t = same_tape({x});
    return t.record(OpKind::Reshape, x.value().reshaped(std::move(shape)), {x.id}, [](const Tensor& g, GradSink& s) {
        Tensor& gx = s.slot(0);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

Var sum(Var x) {
    Tape& t = same_tape({x});
    double acc = 0.0;
    for (double v : x.value().data()) acc += v;
    return t.record(OpKind::Sum, Tensor::scalar(acc), {x.id}, [](const Tensor& g, GradSink& s) {
        Tensor& gx = s.slot(0);
        for (auto& v : gx.data()) v += g[0];
    });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
    Tape& t = same_tape({table});
    const Tensor& tv = table.value();
    const std::size_t vocab = tv.rows(), width = tv.cols();
    if (ids.empty()) throw DimensionError("gather_rows needs at least one index");
    for (auto id : ids) {
        if (id >= vocab) {
            throw ContractError("embedding index " + std::to_string(id) + " out of range for vocabulary of " +
                                std::to_string(vocab));
        }
    }
    Tensor out({ids.size(), width});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::copy_n(tv.data().data() + ids[i] * width, width, out.data().data() + i * width);
    }
    std::vector<std::size_t> saved(ids.begin(), ids.end());
    return t.record(OpKind::Gather, std::move(out), {table.id}, [saved, width](const Tensor& g, GradSink& s) {
        Tensor& gt = s.slot(0);
        for (std::size_t i = 0; i < saved.size(); ++i) {
            double* dst = gt.data().data() + saved[i] * width;
            const double* src = g.data().data() + i * width;
            for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
        }
    });
}

Var sparse_cross_entropy(Var logits, std::span<const std::size_t> targets, const std::vector<bool>& keep) {
    Tape& t = same_tape({logits});
    const Tensor& lv = logits.value();
    const std::size_t steps = lv.rows(), vocab = lv.cols();
    if (targets.size() != steps || keep.size() != steps) {
        throw DimensionError("sparse_cross_entropy: " + std::to_string(targets.size()) + " targets / " +
                             std::to_string(keep.size()) + " mask entries for logits " + shape_string(lv.shape()));
    }
    for (auto id : targets) {
        if (id >= vocab) {
            throw ContractError("target id " + std::to_string(id) + " out of range for " + std::to_string(vocab) +
                                " classes");
        }
    }
    auto probs = std::make_shared<Tensor>(lv.shape());
    Tensor out({steps});
    for (std::size_t r = 0; r < steps; ++r) {
        const double* row = lv.data().data() + r * vocab;
        double mx = row[0];
        for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < vocab; ++j) {
            const double e = std::exp(row[j] - mx);
            (*probs)[r * vocab + j] = e;
            z += e;
        }
        for (std::size_t j = 0; j < vocab; ++j) (*probs)[r * vocab + j] /= z;
        out[r] = keep[r] ? (mx + std::log(z) - row[targets[r]]) : 0.0;
    }
    std::vector<std::size_t> tgt(targets.begin(), targets.end());
    return t.record(OpKind::CrossEntropy, std::move(out), {logits.id},
                    [probs, tgt, keep, vocab](const Tensor& g, GradSink& s) {
                        Tensor& gl = s.slot(0);
                        for (std::size_t r = 0; r < tgt.size(); ++r) {
                            if (!keep[r] || g[r] == 0.0) continue;
                            for (std::size_t j = 0; j < vocab; ++j) gl[r * vocab + j] += g[r] * (*probs)[r * vocab + j];
                            gl[r * vocab + tgt[r]] -= g[r];
                        }
                    });
}

Var dense(Var x, Var w, Var b, Activation act) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.rank() != 2 || wv.rank() != 2 || xv.cols() != wv.rows() || b.value().size() != wv.cols()) {
        throw DimensionError("dense: input " + shape_string(xv.shape()) + ", weight " + shape_string(wv.shape()) +
                             ", bias " + shape_string(b.value().shape()) + " do not agree");
    }
    Var y = add_bias(matmul(x, w), b);
    return act == Activation::Relu ? relu(y) : y;
}

}  // namespace ops

}  // namespace cxrfuse
