// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "cxrfuse/attention.hpp"
#include "cxrfuse/autograd.hpp"
#include "cxrfuse/rng.hpp"
#include "cxrfuse/tensor.hpp"

namespace cxrfuse {

/// Every learnable tensor of a model, keyed by a stable dotted path
/// ("encoder.cross_attn.head0.wq"). Iteration order is lexicographic.
class ModelParameters {
public:
    using Map = std::map<std::string, Tensor>;

    Tensor& add(const std::string& path, Tensor value);
    const Tensor& at(const std::string& path) const;
    Tensor& at(const std::string& path);
    bool contains(const std::string& path) const { return tensors_.count(path) != 0; }

    std::size_t size() const noexcept { return tensors_.size(); }
    std::size_t scalar_count() const;

    Map::const_iterator begin() const { return tensors_.begin(); }
    Map::const_iterator end() const { return tensors_.end(); }
    Map::iterator begin() { return tensors_.begin(); }
    Map::iterator end() { return tensors_.end(); }

    friend bool operator==(const ModelParameters&, const ModelParameters&) = default;

private:
    Map tensors_;
};

/// Puts parameters on a tape, either as trainable leaves (training and
/// gradient checks) or as frozen views (inference).
class ParameterBinder {
public:
    ParameterBinder(Tape& tape, const ModelParameters& params, bool trainable)
        : tape_(tape), params_(params), trainable_(trainable) {}

    Var operator()(const std::string& path) const;
    /// Heads "<prefix>.head{i}.{wq,wk,wv}" and "<prefix>.wo".
    AttentionProjections attention(const std::string& prefix, std::size_t num_heads) const;

    Tape& tape() const { return tape_; }

private:
    Tape& tape_;
    const ModelParameters& params_;
    bool trainable_;
};

namespace init {

/// U(-1/√fan_in, 1/√fan_in) for a [fan_in×fan_out] weight.
Tensor fan_in_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
/// N(0, 0.02²) embedding table.
Tensor embedding_normal(std::size_t vocab, std::size_t width, Rng& rng, double stddev = 0.02);

void add_attention(ModelParameters& params, const std::string& prefix, const MultiHeadConfig& cfg, Rng& rng);
void add_layer_norm(ModelParameters& params, const std::string& prefix, std::size_t width);
void add_dense(ModelParameters& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);

}  // namespace init

/// Checkpoint layout:
///   {"format": "cxrfuse-checkpoint", "version": 1,
///    "parameters": {"<path>": {"shape": [..], "data": [..]}, ...}}
/// Keys are sorted and doubles are written in shortest round-trip form, so
/// identical parameters always serialize to identical bytes.
nlohmann::json parameters_to_json(const ModelParameters& params);
ModelParameters parameters_from_json(const nlohmann::json& j);
void save_checkpoint(const ModelParameters& params, const std::filesystem::path& file);
ModelParameters load_checkpoint(const std::filesystem::path& file);

}  // namespace cxrfuse
