// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cxrfuse/attention.hpp"
#include "cxrfuse/errors.hpp"
#include "cxrfuse/pipeline.hpp"

namespace py = pybind11;
using namespace cxrfuse;

namespace {

Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw DimensionError("expected a 2-D array");
    Tensor t = Tensor::zeros({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))});
    std::copy(a.data(), a.data() + a.size(), t.data().begin());
    return t;
}

py::array_t<double> to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::copy(t.data().begin(), t.data().end(), a.mutable_data());
    return a;
}

PipelineConfig config_from(const std::string& json_text, PipelineConfig base) {
    if (json_text.empty()) return base;
    return pipeline_config_from_json(nlohmann::json::parse(json_text), std::move(base));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-modal chest X-ray report generation core";

    static py::exception<Error> base_error(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base_error.ptr());
    py::register_exception<DataError>(m, "DataError", base_error.ptr());
    py::register_exception<ContractError>(m, "ContractError", base_error.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base_error.ptr());
    py::register_exception<TrainingError>(m, "TrainingError", base_error.ptr());
    py::register_exception<EvaluationError>(m, "EvaluationError", base_error.ptr());

    // preprocessing
    m.def("standardize_text", [](const std::string& s) { return standardize_text(s); });
    m.def("tokenize", [](const std::string& s) { return tokenize(s); });
    m.def("celsius_to_fahrenheit", &celsius_to_fahrenheit);
    m.def("encode_gender", [](const std::string& g) { return encode_gender(g); });
    m.def("map_ethnicity", [](const std::string& e) { return map_ethnicity(e); });
    m.def("minmax_normalize", [](double x, double lo, double hi) { return minmax_normalize(x, {lo, hi}); });

    // metrics
    m.def(
        "bleu",
        [](const std::vector<std::string>& c, const std::vector<std::string>& r, std::size_t max_n, bool smoothing) {
            const auto res = bleu(c, r, {max_n, smoothing});
            return py::dict(py::arg("precision") = res.precision, py::arg("brevity_penalty") = res.brevity_penalty,
                            py::arg("score") = res.score, py::arg("empty_candidate") = res.empty_candidate);
        },
        py::arg("candidate"), py::arg("reference"), py::arg("max_n") = 4, py::arg("smoothing") = false);
    m.def(
        "rouge_l",
        [](const std::vector<std::string>& c, const std::vector<std::string>& r, double beta) {
            const auto res = rouge_l(c, r, beta);
            return py::dict(py::arg("lcs") = res.lcs, py::arg("precision") = res.precision,
                            py::arg("recall") = res.recall, py::arg("f_score") = res.f_score);
        },
        py::arg("candidate"), py::arg("reference"), py::arg("beta") = 1.2);
    m.def(
        "embedding_f1",
        [](const std::vector<std::string>& c, const std::vector<std::string>& r, std::size_t dim) {
            return embedding_f1(c, r, HashEmbeddingProvider(dim)).f1;
        },
        py::arg("candidate"), py::arg("reference"), py::arg("dim") = 64);
    m.def(
        "corpus_evaluate_json",
        [](const std::vector<std::tuple<std::string, std::string, std::string>>& rows, std::size_t dim) {
            std::vector<EvalPair> pairs;
            for (const auto& [id, cand, ref] : rows) pairs.push_back({id, tokenize(cand), tokenize(ref)});
            return corpus_evaluate(pairs, HashEmbeddingProvider(dim)).to_json().dump();
        },
        py::arg("rows"), py::arg("dim") = 64);

    // model pieces
    m.def(
        "attention_weights",
        [](py::array_t<double> q, py::array_t<double> k, py::array_t<double> v, bool causal) {
            Tape tape;
            if (causal && q.shape(0) != k.shape(0)) throw DimensionError("causal attention needs square scores");
            const AttentionMask mask = causal_mask(static_cast<std::size_t>(q.shape(0)));
            const auto out = scaled_dot_product_attention(tape.constant(to_tensor(q)), tape.constant(to_tensor(k)),
                                                          tape.constant(to_tensor(v)), causal ? &mask : nullptr);
            return py::make_tuple(to_array(out.output.value()), to_array(out.weights.value()));
        },
        py::arg("q"), py::arg("k"), py::arg("v"), py::arg("causal") = false);
    m.def("lr_at_step", [](std::size_t t, double base_lr, std::size_t warmup) {
        TrainConfig c;
        c.base_lr = base_lr;
        c.warmup_steps = warmup;
        return lr_at_step(t, c);
    }, py::arg("t"), py::arg("base_lr") = 3e-4, py::arg("warmup_steps") = 500);
    m.def("default_config_json", [] {
        const PipelineConfig c;
        nlohmann::json j = {{"model", config_to_json(c.model)}, {"train", train_config_to_json(c.train)}};
        return j.dump();
    });

    // pipeline stages
    m.def(
        "run_synth",
        [](const fs::path& out, std::size_t n, std::uint64_t seed, const std::string& format) {
            SyntheticConfig c;
            c.num_samples = n;
            c.seed = seed;
            return run_synth(c, out, data_format_from_name(format)).content_hash;
        },
        py::arg("out"), py::arg("n") = 256, py::arg("seed") = 0, py::arg("format") = "jsonl");
    m.def(
        "run_preprocess",
        [](const fs::path& data, const fs::path& out, const std::string& config_json) {
            return run_preprocess(data, out, config_from(config_json, {}).preprocess).content_hash;
        },
        py::arg("data"), py::arg("out"), py::arg("config_json") = "");
    m.def(
        "run_train",
        [](const fs::path& data, const fs::path& out, const std::string& config_json) {
            py::gil_scoped_release release;
            const FitResult r = run_train(data, out, config_from(config_json, desk_scale_config()));
            return std::make_tuple(r.history.size(), r.best_epoch, r.best_val_loss);
        },
        py::arg("data"), py::arg("out"), py::arg("config_json") = "");
    m.def(
        "run_generate",
        [](const fs::path& data, const fs::path& model, const std::string& split, const fs::path& out,
           std::size_t limit) { return run_generate(data, model, split, out, limit).size(); },
        py::arg("data"), py::arg("model"), py::arg("split"), py::arg("out"), py::arg("limit") = 0);
    m.def(
        "run_evaluate_json",
        [](const fs::path& in, const fs::path& out) { return run_evaluate(in, out, {}).to_json().dump(); },
        py::arg("generated"), py::arg("out"));
}
