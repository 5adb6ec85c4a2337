// SPDX-License-Identifier: Apache-2.0
// Command-line front end: synth, preprocess, train, generate, evaluate, ablate.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cxrfuse/errors.hpp"
#include "cxrfuse/pipeline.hpp"

using namespace cxrfuse;

namespace {

constexpr int kUsageExit = 2;

void log_line(const std::string& s) { std::cerr << s << '\n'; }

PipelineConfig resolve_config(const std::string& config_path, PipelineConfig base) {
    if (config_path.empty()) return base;
    return load_pipeline_config(config_path, std::move(base));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cxrfuse: multi-modal chest X-ray report generation"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n;
    std::string out, data_dir, model_dir, in_file, split = "test", format = "jsonl", inputs, abbreviations,
                                                         embeddings;
    std::optional<std::size_t> balance, limit, epochs;
    std::vector<std::string> masks;
    std::vector<std::uint64_t> seeds;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON pipeline configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Random seed");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with planted signal");
    add_common(synth);
    synth->add_option("--n", n, "Number of samples");
    synth->add_option("--out", out, "Output directory")->required();
    synth->add_option("--format", format, "Raw record format")->check(CLI::IsMember({"jsonl", "csv"}));

    auto* prep = app.add_subcommand("preprocess", "Fit statistics and vocabularies, emit model-ready records");
    add_common(prep);
    prep->add_option("--data", data_dir, "Synthetic or raw dataset directory")->required()->check(CLI::ExistingDirectory);
    prep->add_option("--out", out, "Output directory")->required();
    prep->add_option("--balance", balance, "Balanced subset size (by unique report)");
    prep->add_option("--abbreviations", abbreviations, "Extra abbreviation rules (JSON)")->check(CLI::ExistingFile);

    auto* train = app.add_subcommand("train", "Train a report generator");
    add_common(train);
    train->add_option("--data", data_dir, "Preprocessed dataset directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", out, "Model output directory")->required();
    train->add_option("--inputs", inputs, "Encoder inputs")->check(CLI::IsMember({"all", "image_only", "scalars", "text", "o2sat"}));
    train->add_option("--epochs", epochs, "Maximum epochs");

    auto* gen = app.add_subcommand("generate", "Greedy-decode reports for a split");
    gen->add_option("--data", data_dir, "Preprocessed dataset directory")->required()->check(CLI::ExistingDirectory);
    gen->add_option("--model", model_dir, "Model directory")->required()->check(CLI::ExistingDirectory);
    gen->add_option("--split", split, "Split to decode")->check(CLI::IsMember({"train", "val", "test"}));
    gen->add_option("--out", out, "Output JSONL file")->required();
    gen->add_option("--limit", limit, "Decode only the first N records");

    auto* eval = app.add_subcommand("evaluate", "Score generated reports");
    eval->add_option("--config", config_path, "JSON pipeline configuration")->check(CLI::ExistingFile);
    eval->add_option("--in", in_file, "Generated JSONL file")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", out, "Output directory")->required();
    eval->add_option("--embeddings", embeddings, "Embedding table (token v1 v2 ...)")->check(CLI::ExistingFile);

    auto* ablate = app.add_subcommand("ablate", "Compare fusion configurations on planted synthetic data");
    ablate->add_option("--config", config_path, "JSON pipeline configuration")->check(CLI::ExistingFile);
    ablate->add_option("--seed", seeds, "Seeds (repeatable)");
    ablate->add_option("--n", n, "Samples per synthetic dataset");
    ablate->add_option("--inputs", masks, "Input masks to compare (repeatable)")
        ->check(CLI::IsMember({"all", "image_only", "scalars", "text", "o2sat"}));
    ablate->add_option("--epochs", epochs, "Maximum epochs per run");
    ablate->add_option("--limit", limit, "Test records decoded per run");
    ablate->add_option("--out", out, "Write ablation.json into this directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kUsageExit;
    }

    try {
        if (synth->parsed()) {
            PipelineConfig cfg = resolve_config(config_path, {});
            if (n) cfg.synthetic.num_samples = *n;
            if (seed) cfg.synthetic.seed = *seed;
            const auto m = run_synth(cfg.synthetic, out, data_format_from_name(format));
            std::cout << m.content_hash << '\n';
        } else if (prep->parsed()) {
            PipelineConfig cfg = resolve_config(config_path, {});
            if (seed) cfg.preprocess.split_seed = cfg.preprocess.balance_seed = *seed;
            if (balance) cfg.preprocess.balance = *balance;
            if (!abbreviations.empty()) cfg.preprocess.abbreviations = abbreviations;
            const auto m = run_preprocess(data_dir, out, cfg.preprocess, log_line);
            std::cout << m.content_hash << '\n';
        } else if (train->parsed()) {
            PipelineConfig cfg = resolve_config(config_path, {});
            if (seed) cfg.init_seed = cfg.train.seed = *seed;
            if (!inputs.empty()) cfg.model.inputs = InputMask::from_name(inputs);
            if (epochs) cfg.train.max_epochs = *epochs;
            const FitResult r = run_train(data_dir, out, cfg, log_line);
            std::cout << "best epoch " << r.best_epoch << ", val loss " << r.best_val_loss << '\n';
            if (r.diverged) return 1;
        } else if (gen->parsed()) {
            const auto reports = run_generate(data_dir, model_dir, split, out, limit.value_or(0));
            std::cout << reports.size() << " reports written to " << out << '\n';
        } else if (eval->parsed()) {
            PipelineConfig cfg = resolve_config(config_path, {});
            if (!embeddings.empty()) cfg.evaluate.embeddings_file = embeddings;
            const EvalReport rep = run_evaluate(in_file, out, cfg.evaluate);
            std::printf("BLEU-1 %.4f  BLEU-2 %.4f  BLEU-3 %.4f  BLEU-4 %.4f  ROUGE-L %.4f  EmbF1 %.4f\n",
                        rep.mean_bleu[0], rep.mean_bleu[1], rep.mean_bleu[2], rep.mean_bleu[3], rep.mean_rouge_l,
                        rep.mean_embedding_f1);
        } else if (ablate->parsed()) {
            PipelineConfig cfg = resolve_config(config_path, desk_scale_config());
            if (!seeds.empty()) cfg.ablation.seeds = seeds;
            if (n) cfg.synthetic.num_samples = *n;
            if (!masks.empty()) cfg.ablation.masks = masks;
            if (epochs) cfg.train.max_epochs = *epochs;
            if (limit) cfg.ablation.eval_limit = *limit;
            const AblationTable table = run_ablation(cfg, log_line);
            std::cout << table.to_text();
            if (!out.empty()) {
                fs::create_directories(out);
                write_json(fs::path(out) / "ablation.json", table.to_json());
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kUsageExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
