// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/params.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cxrfuse/errors.hpp"

namespace cxrfuse {

Tensor& ModelParameters::add(const std::string& path, Tensor value) {
    auto [it, inserted] = tensors_.emplace(path, std::move(value));
    if (!inserted) throw ConfigError("duplicate parameter path '" + path + "'");
    return it->second;
}

const Tensor& ModelParameters::at(const std::string& path) const {
    auto it = tensors_.find(path);
    if (it == tensors_.end()) throw ConfigError("unknown parameter path '" + path + "'");
    return it->second;
}

Tensor& ModelParameters::at(const std::string& path) {
    auto it = tensors_.find(path);
    if (it == tensors_.end()) throw ConfigError("unknown parameter path '" + path + "'");
    return it->second;
}

std::size_t ModelParameters::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.size();
    return n;
}

Var ParameterBinder::operator()(const std::string& path) const {
    const Tensor& t = params_.at(path);
    return trainable_ ? tape_.parameter(path, t) : tape_.view(t);
}

AttentionProjections ParameterBinder::attention(const std::string& prefix, std::size_t num_heads) const {
    AttentionProjections p;
    for (std::size_t h = 0; h < num_heads; ++h) {
        const std::string head = prefix + ".head" + std::to_string(h);
        p.heads.push_back({(*this)(head + ".wq"), (*this)(head + ".wk"), (*this)(head + ".wv")});
    }
    p.wo = (*this)(prefix + ".wo");
    return p;
}

namespace init {

Tensor fan_in_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w({fan_in, fan_out});
    for (auto& v : w.data()) v = rng.uniform(-limit, limit);
    return w;
}

Tensor embedding_normal(std::size_t vocab, std::size_t width, Rng& rng, double stddev) {
    Tensor w({vocab, width});
    for (auto& v : w.data()) v = rng.normal(0.0, stddev);
    return w;
}

void add_attention(ModelParameters& params, const std::string& prefix, const MultiHeadConfig& cfg, Rng& rng) {
    cfg.validate();
    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
        const std::string head = prefix + ".head" + std::to_string(h);
        params.add(head + ".wq", fan_in_uniform(cfg.model_dim, cfg.key_dim, rng));
        params.add(head + ".wk", fan_in_uniform(cfg.model_dim, cfg.key_dim, rng));
        params.add(head + ".wv", fan_in_uniform(cfg.model_dim, cfg.value_dim, rng));
    }
    params.add(prefix + ".wo", fan_in_uniform(cfg.num_heads * cfg.value_dim, cfg.model_dim, rng));
}

void add_layer_norm(ModelParameters& params, const std::string& prefix, std::size_t width) {
    params.add(prefix + ".gamma", Tensor::full({width}, 1.0));
    params.add(prefix + ".beta", Tensor({width}));
}

void add_dense(ModelParameters& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
    params.add(prefix + ".w", fan_in_uniform(in, out, rng));
    params.add(prefix + ".b", Tensor({out}));
}

}  // namespace init

nlohmann::json parameters_to_json(const ModelParameters& params) {
    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& [path, t] : params) {
        tensors[path] = {{"shape", t.shape()}, {"data", t.values()}};
    }
    return {{"format", "cxrfuse-checkpoint"}, {"version", 1}, {"parameters", std::move(tensors)}};
}

ModelParameters parameters_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", "") != "cxrfuse-checkpoint") {
        throw DataError("not a cxrfuse checkpoint");
    }
    if (j.value("version", 0) != 1) throw DataError("unsupported checkpoint version");
    ModelParameters params;
    for (const auto& [path, entry] : j.at("parameters").items()) {
        params.add(path, Tensor(entry.at("shape").get<Shape>(), entry.at("data").get<std::vector<double>>()));
    }
    return params;
}

void save_checkpoint(const ModelParameters& params, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + file.string());
    out << parameters_to_json(params).dump() << '\n';
}

ModelParameters load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint " + file.string());
    try {
        return parameters_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed checkpoint " + file.string() + ": " + e.what());
    }
}

}  // namespace cxrfuse
