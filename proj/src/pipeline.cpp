// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "cxrfuse/errors.hpp"

namespace cxrfuse {

const std::vector<PatientRecord>& PreparedDataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

namespace {

AbbreviationMap abbreviation_map(const PreprocessOptions& o) {
    return o.abbreviations ? AbbreviationMap::with_extension_file(*o.abbreviations) : AbbreviationMap::clinical_defaults();
}

}  // namespace

PreparedDataset prepare_dataset(const std::vector<RawRecord>& raw, const ImageTable& images,
                                const PreprocessOptions& options) {
    PreparedDataset out;
    const auto kept = remove_outliers(raw, options.bounds, &out.outliers);
    if (kept.empty()) throw DataError("no records left after outlier removal");
    const AbbreviationMap map = abbreviation_map(options);
    out.vocabs = fit_vocabularies(kept, map);

    std::vector<RawRecord> pool = kept;
    if (options.balance > 0) {
        pool = balance_by_unique_reports(kept, options.balance, options.balance_seed,
                                         [&map](const RawRecord& r) { return standardize_text(r.report, map); });
    }
    const auto parts = split_dataset(pool, options.fractions, options.split_seed);
    NormalizationStats fitted = NormalizationStats::fit(parts.train, options.bounds);
    out.stats = fitted;

    auto convert = [&](const std::vector<RawRecord>& part, const char* name, std::vector<PatientRecord>& dst) {
        for (const auto& r : part) {
            auto it = images.find(r.image_ref);
            if (it == images.end()) throw DataError("record '" + r.sample_id + "' references missing image '" + r.image_ref + "'");
            dst.push_back(to_patient_record(r, out.stats, out.vocabs, map, options.lengths, it->second, name));
        }
    };
    convert(parts.train, "train", out.train);
    convert(parts.val, "val", out.val);
    convert(parts.test, "test", out.test);
    return out;
}

PreparedDataset prepare_dataset(const SyntheticDataset& data, const PreprocessOptions& options) {
    PreparedDataset out = prepare_dataset(data.records, data.images, options);
    out.planted = data.planted;
    return out;
}

ModelConfig model_config_for(const PreparedDataset& data, ModelConfig base) {
    const PatientRecord* any = !data.train.empty() ? &data.train.front() : nullptr;
    if (any == nullptr) throw DataError("prepared dataset has no training records");
    base.chief_vocab = data.vocabs.chief.size();
    base.icd_vocab = data.vocabs.icd.size();
    base.report_vocab = data.vocabs.report.size();
    base.chief_len = any->chief_ids.size();
    base.icd_len = any->icd_ids.size();
    base.report_len = any->report_ids.size();
    if (base.image_source == ImageSource::Precomputed) base.image_feature_dim = any->image.size();
    base.validate();
    return base;
}

std::vector<GeneratedReport> generate_reports(const ReportModel& model, const Vocabulary& report_vocab,
                                              const std::vector<PatientRecord>& records, std::size_t limit) {
    const std::size_t n = limit == 0 ? records.size() : std::min(limit, records.size());
    std::vector<GeneratedReport> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ids = model.generate_greedy(records[i], model.config().report_len);
        out.push_back({records[i].sample_id, report_vocab.detokenize(ids), records[i].report_text});
    }
    return out;
}

std::vector<EvalPair> to_eval_pairs(const std::vector<GeneratedReport>& reports) {
    std::vector<EvalPair> pairs;
    pairs.reserve(reports.size());
    for (const auto& g : reports) pairs.push_back({g.sample_id, tokenize(g.generated), tokenize(g.reference)});
    return pairs;
}

PlantedAccuracy planted_accuracy(const std::vector<GeneratedReport>& reports,
                                 const std::map<std::string, std::vector<PlantedSpan>>& planted) {
    PlantedAccuracy acc;
    for (const auto& g : reports) {
        auto it = planted.find(g.sample_id);
        if (it == planted.end()) continue;
        score_planted(tokenize(g.generated), it->second, acc);
    }
    return acc;
}

std::unique_ptr<EmbeddingProvider> EvalSettings::provider() const {
    if (embeddings_file) return std::make_unique<TableEmbeddingProvider>(TableEmbeddingProvider::from_file(*embeddings_file));
    return std::make_unique<HashEmbeddingProvider>(embedding_dim);
}

// Configuration ----------------------------------------------------------------

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& section) {
    if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in config section '" + section + "'");
    }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig c) {
    try {
        reject_unknown(j, {"synthetic", "preprocess", "model", "train", "evaluate", "ablation"}, "top level");
        if (j.contains("synthetic")) {
            const auto& s = j.at("synthetic");
            reject_unknown(s, {"num_samples", "seed", "image_dim", "image_noise", "outlier_rate", "text_noise"},
                           "synthetic");
            read_key(s, "num_samples", c.synthetic.num_samples);
            read_key(s, "seed", c.synthetic.seed);
            read_key(s, "image_dim", c.synthetic.image_dim);
            read_key(s, "image_noise", c.synthetic.image_noise);
            read_key(s, "outlier_rate", c.synthetic.outlier_rate);
            read_key(s, "text_noise", c.synthetic.text_noise);
        }
        if (j.contains("preprocess")) {
            const auto& p = j.at("preprocess");
            reject_unknown(p, {"test_fraction", "train_fraction", "val_fraction", "split_seed", "chief_len", "icd_len",
                               "report_len", "balance", "balance_seed", "abbreviations"},
                           "preprocess");
            read_key(p, "test_fraction", c.preprocess.fractions.test);
            read_key(p, "train_fraction", c.preprocess.fractions.train);
            read_key(p, "val_fraction", c.preprocess.fractions.val);
            read_key(p, "split_seed", c.preprocess.split_seed);
            read_key(p, "chief_len", c.preprocess.lengths.chief);
            read_key(p, "icd_len", c.preprocess.lengths.icd);
            read_key(p, "report_len", c.preprocess.lengths.report);
            read_key(p, "balance", c.preprocess.balance);
            read_key(p, "balance_seed", c.preprocess.balance_seed);
            if (p.contains("abbreviations")) c.preprocess.abbreviations = p.at("abbreviations").get<std::string>();
        }
        if (j.contains("model")) c.model = config_from_json(j.at("model"), c.model);
        if (j.contains("train")) {
            nlohmann::json t = j.at("train");
            if (t.is_object() && t.contains("init_seed")) {
                c.init_seed = t.at("init_seed").get<std::uint64_t>();
                t.erase("init_seed");
            }
            c.train = train_config_from_json(t, c.train);
        }
        if (j.contains("evaluate")) {
            const auto& e = j.at("evaluate");
            reject_unknown(e, {"rouge_beta", "bleu_smoothing", "embedding_dim", "embeddings_file"}, "evaluate");
            read_key(e, "rouge_beta", c.evaluate.options.rouge_beta);
            read_key(e, "bleu_smoothing", c.evaluate.options.bleu.smoothing);
            read_key(e, "embedding_dim", c.evaluate.embedding_dim);
            if (e.contains("embeddings_file")) c.evaluate.embeddings_file = e.at("embeddings_file").get<std::string>();
        }
        if (j.contains("ablation")) {
            const auto& a = j.at("ablation");
            reject_unknown(a, {"seeds", "masks", "eval_limit"}, "ablation");
            read_key(a, "seeds", c.ablation.seeds);
            read_key(a, "masks", c.ablation.masks);
            read_key(a, "eval_limit", c.ablation.eval_limit);
            for (const auto& m : c.ablation.masks) (void)InputMask::from_name(m);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad configuration: ") + e.what());
    }
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& file, PipelineConfig base) {
    nlohmann::json j;
    try {
        j = read_json(file);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return pipeline_config_from_json(j, std::move(base));
}

PipelineConfig desk_scale_config() {
    PipelineConfig c;
    c.model.model_dim = 32;
    c.model.text_embed_dim = 16;
    c.model.num_heads = 2;
    c.model.key_dim = 16;
    c.model.value_dim = 16;
    c.model.ff_dim = 64;
    c.train.base_lr = 2e-3;
    c.train.warmup_steps = 50;
    c.train.batch_size = 16;
    c.train.max_epochs = 30;
    c.train.early_stop_patience = 5;
    c.ablation.eval_limit = 200;
    return c;
}

// On-disk stages -----------------------------------------------------------------

DatasetManifest run_synth(const SyntheticConfig& cfg, const fs::path& out_dir, DataFormat format) {
    const SyntheticDataset ds = generate_synthetic(cfg);
    fs::create_directories(out_dir);
    const std::string raw_name = format == DataFormat::Csv ? "raw.csv" : "raw.jsonl";
    write_raw_records(out_dir / raw_name, ds.records, format);
    write_image_features(out_dir / "images.jsonl", ds.images);
    write_planted(out_dir / "planted.jsonl", ds.planted);
    const nlohmann::json info = {{"num_samples", cfg.num_samples},
                                 {"seed", cfg.seed},
                                 {"image_dim", cfg.image_dim},
                                 {"image_noise", cfg.image_noise},
                                 {"outlier_rate", cfg.outlier_rate},
                                 {"text_noise", cfg.text_noise}};
    return write_manifest(out_dir, "synthetic",
                          {{"records", raw_name}, {"images", "images.jsonl"}, {"planted", "planted.jsonl"}},
                          {{"all", ds.records.size()}}, info);
}

DatasetManifest run_preprocess(const fs::path& data_dir, const fs::path& out_dir, const PreprocessOptions& options,
                               const LogFn& log) {
    const DatasetManifest in = verify_manifest(data_dir);
    if (!in.files.count("records") || !in.files.count("images")) {
        throw DataError(data_dir.string() + ": manifest must list 'records' and 'images'");
    }
    const auto raw = read_raw_records(data_dir / in.files.at("records").path);
    const auto images = read_image_features(data_dir / in.files.at("images").path);
    PreparedDataset data = prepare_dataset(raw, images, options);
    if (in.files.count("planted")) data.planted = read_planted(data_dir / in.files.at("planted").path);
    if (log) {
        log("outliers: kept " + std::to_string(data.outliers.kept) + ", dropped " + std::to_string(data.outliers.dropped));
        log("splits: train " + std::to_string(data.train.size()) + ", val " + std::to_string(data.val.size()) +
            ", test " + std::to_string(data.test.size()));
    }

    fs::create_directories(out_dir);
    std::vector<nlohmann::json> rows;
    ImageTable used;
    std::map<std::string, std::string> ref_of;
    for (const auto& r : raw) ref_of[r.sample_id] = r.image_ref;
    for (const auto* part : {&data.train, &data.val, &data.test}) {
        for (const auto& p : *part) {
            const std::string& ref = ref_of.at(p.sample_id);
            rows.push_back(patient_to_json(p, ref));
            used[ref] = p.image;
        }
    }
    write_jsonl(out_dir / "records.jsonl", rows);
    write_image_features(out_dir / "images.jsonl", used);
    write_json(out_dir / "vocab.json", {{"chief", data.vocabs.chief.to_json()},
                                        {"icd", data.vocabs.icd.to_json()},
                                        {"report", data.vocabs.report.to_json()}});
    write_json(out_dir / "stats.json", data.stats.to_json());
    std::map<std::string, std::string> files{{"records", "records.jsonl"},
                                             {"images", "images.jsonl"},
                                             {"vocab", "vocab.json"},
                                             {"stats", "stats.json"}};
    if (!data.planted.empty()) {
        write_planted(out_dir / "planted.jsonl", data.planted);
        files["planted"] = "planted.jsonl";
    }
    const nlohmann::json info = {{"source_hash", in.content_hash},
                                 {"outliers_kept", data.outliers.kept},
                                 {"outliers_dropped", data.outliers.dropped},
                                 {"split_seed", options.split_seed},
                                 {"balance", options.balance},
                                 {"fractions",
                                  {{"test", options.fractions.test},
                                   {"train", options.fractions.train},
                                   {"val", options.fractions.val}}}};
    return write_manifest(out_dir, "prepared", files,
                          {{"train", data.train.size()}, {"val", data.val.size()}, {"test", data.test.size()}}, info);
}

PreparedDataset load_prepared(const fs::path& dir) {
    const DatasetManifest m = verify_manifest(dir);
    if (m.kind != "prepared") throw DataError(dir.string() + " is not a preprocessed dataset (kind '" + m.kind + "')");
    const ImageTable images = read_image_features(dir / m.files.at("images").path);
    PreparedDataset data;
    for (const auto& j : read_jsonl(dir / m.files.at("records").path)) {
        PatientRecord r = patient_from_json(j, images);
        if (r.split == "train") data.train.push_back(std::move(r));
        else if (r.split == "val") data.val.push_back(std::move(r));
        else if (r.split == "test") data.test.push_back(std::move(r));
        else throw DataError("record '" + r.sample_id + "' has unknown split '" + r.split + "'");
    }
    const auto vocab = read_json(dir / m.files.at("vocab").path);
    data.vocabs = {Vocabulary::from_json(vocab.at("chief")), Vocabulary::from_json(vocab.at("icd")),
                   Vocabulary::from_json(vocab.at("report"))};
    data.stats = NormalizationStats::from_json(read_json(dir / m.files.at("stats").path));
    if (m.files.count("planted")) data.planted = read_planted(dir / m.files.at("planted").path);
    data.outliers.kept = m.info.value("outliers_kept", std::size_t{0});
    data.outliers.dropped = m.info.value("outliers_dropped", std::size_t{0});
    return data;
}

namespace {

std::string epoch_line(const EpochRecord& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %3zu  train_loss %.4f  train_acc %.4f  val_loss %.4f  val_acc %.4f  lr %.2e",
                  e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc, e.lr);
    return buf;
}

nlohmann::json fit_json(const FitResult& r) {
    return {{"epochs", r.history.size()},     {"best_epoch", r.best_epoch}, {"best_val_loss", r.best_val_loss},
            {"steps", r.steps},               {"stopped_early", r.stopped_early},
            {"diverged", r.diverged},         {"message", r.message}};
}

}  // namespace

FitResult run_train(const fs::path& dataset_dir, const fs::path& out_dir, const PipelineConfig& cfg, const LogFn& log) {
    const PreparedDataset data = load_prepared(dataset_dir);
    ReportModel model(model_config_for(data, cfg.model), cfg.init_seed);
    if (log) log("parameters: " + std::to_string(model.parameters().scalar_count()));
    const FitResult result = fit(model, data.train, data.val, cfg.train, [&](const EpochRecord& e) {
        if (log) log(epoch_line(e));
    });
    fs::create_directories(out_dir);
    write_json(out_dir / "model_config.json", config_to_json(model.config()));
    nlohmann::json tc = train_config_to_json(cfg.train);
    tc["init_seed"] = cfg.init_seed;
    write_json(out_dir / "train_config.json", tc);
    save_checkpoint(model.parameters(), out_dir / "checkpoint.json");
    write_text(out_dir / "history.csv", history_csv(result.history));
    write_json(out_dir / "fit.json", fit_json(result));
    if (log && result.diverged) log("training diverged: " + result.message);
    return result;
}

ReportModel load_model(const fs::path& model_dir) {
    ModelConfig cfg;
    try {
        cfg = config_from_json(read_json(model_dir / "model_config.json"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model_config.json: ") + e.what());
    }
    return ReportModel(cfg, load_checkpoint(model_dir / "checkpoint.json"));
}

std::vector<GeneratedReport> run_generate(const fs::path& dataset_dir, const fs::path& model_dir,
                                          const std::string& split, const fs::path& out_file, std::size_t limit) {
    const PreparedDataset data = load_prepared(dataset_dir);
    const ReportModel model = load_model(model_dir);
    auto reports = generate_reports(model, data.vocabs.report, data.split(split), limit);
    write_generated(out_file, reports);
    return reports;
}

EvalReport run_evaluate(const fs::path& generated_file, const fs::path& out_dir, const EvalSettings& settings) {
    const auto reports = read_generated(generated_file);
    const auto provider = settings.provider();
    EvalReport rep = corpus_evaluate(to_eval_pairs(reports), *provider, settings.options);
    fs::create_directories(out_dir);
    write_json(out_dir / "eval_report.json", rep.to_json());
    write_text(out_dir / "per_sample.csv", rep.per_sample_csv());
    return rep;
}

// Ablation ------------------------------------------------------------------------

std::vector<AblationRow> AblationTable::summary() const {
    std::vector<AblationRow> out;
    for (const auto& r : runs) {
        auto it = std::find_if(out.begin(), out.end(), [&](const AblationRow& s) { return s.mask == r.mask; });
        if (it == out.end()) {
            AblationRow s;
            s.mask = r.mask;
            s.label = r.label;
            out.push_back(s);
            it = out.end() - 1;
        }
        it->seed += 1;  // run count until normalized below
        it->epochs += r.epochs;
        it->evaluated += r.evaluated;
        it->best_val_loss += r.best_val_loss;
        for (std::size_t n = 0; n < 4; ++n) it->bleu[n] += r.bleu[n];
        it->rouge_l += r.rouge_l;
        it->embedding_f1 += r.embedding_f1;
        it->planted_accuracy += r.planted_accuracy;
    }
    for (auto& s : out) {
        const double k = static_cast<double>(s.seed);
        s.best_val_loss /= k;
        for (double& b : s.bleu) b /= k;
        s.rouge_l /= k;
        s.embedding_f1 /= k;
        s.planted_accuracy /= k;
        s.epochs = static_cast<std::size_t>(std::llround(static_cast<double>(s.epochs) / k));
        s.seed = 0;
    }
    return out;
}

namespace {

nlohmann::json row_json(const AblationRow& r) {
    return {{"mask", r.mask},
            {"label", r.label},
            {"seed", r.seed},
            {"epochs", r.epochs},
            {"best_epoch", r.best_epoch},
            {"best_val_loss", r.best_val_loss},
            {"bleu1", r.bleu[0]},
            {"bleu2", r.bleu[1]},
            {"bleu3", r.bleu[2]},
            {"bleu4", r.bleu[3]},
            {"rouge_l", r.rouge_l},
            {"embedding_f1", r.embedding_f1},
            {"planted_accuracy", r.planted_accuracy},
            {"evaluated", r.evaluated}};
}

}  // namespace

nlohmann::json AblationTable::to_json() const {
    nlohmann::json runs_j = nlohmann::json::array(), summary_j = nlohmann::json::array();
    for (const auto& r : runs) runs_j.push_back(row_json(r));
    for (const auto& r : summary()) {
        auto j = row_json(r);
        j.erase("seed");
        j.erase("best_epoch");
        summary_j.push_back(j);
    }
    return {{"runs", runs_j}, {"summary", summary_j}};
}

std::string AblationTable::to_text() const {
    std::ostringstream ss;
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-16s %7s %7s %7s %7s %7s %7s %8s\n", "Configuration", "BLEU-1", "BLEU-2",
                  "BLEU-3", "BLEU-4", "ROUGE-L", "EmbF1", "Planted");
    ss << buf;
    for (const auto& r : summary()) {
        std::snprintf(buf, sizeof buf, "%-16s %7.3f %7.3f %7.3f %7.3f %7.3f %7.3f %8.3f\n", r.label.c_str(), r.bleu[0],
                      r.bleu[1], r.bleu[2], r.bleu[3], r.rouge_l, r.embedding_f1, r.planted_accuracy);
        ss << buf;
    }
    return ss.str();
}

AblationTable run_ablation(const PipelineConfig& cfg, const LogFn& log) {
    AblationTable table;
    const auto provider = cfg.evaluate.provider();
    for (const std::uint64_t seed : cfg.ablation.seeds) {
        SyntheticConfig sc = cfg.synthetic;
        sc.seed = seed;
        PreprocessOptions po = cfg.preprocess;
        po.split_seed = seed;
        po.balance_seed = seed;
        const PreparedDataset data = prepare_dataset(generate_synthetic(sc), po);
        for (const auto& mask : cfg.ablation.masks) {
            const auto t0 = std::chrono::steady_clock::now();
            ModelConfig mc = cfg.model;
            mc.inputs = InputMask::from_name(mask);
            ReportModel model(model_config_for(data, mc), seed);
            TrainConfig tc = cfg.train;
            tc.seed = seed;
            const FitResult fr = fit(model, data.train, data.val, tc, [&](const EpochRecord& e) {
                if (log) log("[" + ablation_label(mask) + " seed " + std::to_string(seed) + "] " + epoch_line(e));
            });
            if (fr.diverged) throw TrainingError("ablation run " + mask + " diverged: " + fr.message);
            const auto reports = generate_reports(model, data.vocabs.report, data.test, cfg.ablation.eval_limit);
            const EvalReport rep = corpus_evaluate(to_eval_pairs(reports), *provider, cfg.evaluate.options);
            AblationRow row;
            row.mask = mask;
            row.label = ablation_label(mask);
            row.seed = seed;
            row.epochs = fr.history.size();
            row.best_epoch = fr.best_epoch;
            row.best_val_loss = fr.best_val_loss;
            row.bleu = rep.mean_bleu;
            row.rouge_l = rep.mean_rouge_l;
            row.embedding_f1 = rep.mean_embedding_f1;
            row.planted_accuracy = planted_accuracy(reports, data.planted).value();
            row.evaluated = reports.size();
            table.runs.push_back(row);
            if (log) {
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                char buf[200];
                std::snprintf(buf, sizeof buf, "[%s seed %llu] BLEU-1 %.3f ROUGE-L %.3f planted %.3f (%.0fs)",
                              row.label.c_str(), static_cast<unsigned long long>(seed), row.bleu[0], row.rouge_l,
                              row.planted_accuracy, secs);
                log(buf);
            }
        }
    }
    return table;
}

}  // namespace cxrfuse
