// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cxrfuse/attention.hpp"
#include "cxrfuse/dataset.hpp"
#include "cxrfuse/errors.hpp"
#include "cxrfuse/metrics.hpp"
#include "cxrfuse/pipeline.hpp"
#include "cxrfuse/preprocess.hpp"
#include "cxrfuse/synthetic.hpp"
#include "cxrfuse/text.hpp"
#include "cxrfuse/training.hpp"
#include "support/op_cases.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace cxrfuse;
using namespace cxrfuse::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " FAILED[" << what << "]";
        }
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << x;
    return s.str();
}

// 1 -------------------------------------------------------------------------
void gradient_correctness(Outcome& out) {
    const auto t0 = Clock::now();
    const auto [worst_op, op_err] = check_all_ops(1e-5);
    out.require(op_err < 1e-5, "op " + worst_op);

    ModelConfig cfg = tiny_model_config();
    out.require(cfg.model_dim == 8 && cfg.num_heads == 2 && cfg.decoder_layers == 1 && cfg.report_vocab == 20,
                "tiny dims");
    ModelParameters params = initialize_parameters(cfg, 21);
    Rng rng(22);
    const PatientRecord rec = random_record(cfg, rng, 5);
    const auto tf = teacher_forcing_split(rec.report_ids);
    const GradCheckResult full = gradcheck(params, [&](const ParameterBinder& b) {
        Var enc = encode(b, cfg, rec);
        return sparse_ce_loss(teacher_forced_forward(b, cfg, enc, tf.inputs), tf.targets, tf.keep);
    });
    out.require(full.max_rel_error < 1e-5, "model " + full.worst_path);
    const double secs = seconds_since(t0);
    out.require(secs < 120.0, "runtime");
    out.detail << "worst op " << worst_op << " rel err " << fmt(op_err, 3) << "; full model " << full.checked
               << " entries, worst " << full.worst_path << " rel err " << fmt(full.max_rel_error, 3) << " (limit 1e-5); "
               << fmt(secs, 3) << " s";
}

// 2 -------------------------------------------------------------------------
void attention_invariants(Outcome& out) {
    Rng rng(2002);
    double worst_sum = 0.0;
    std::size_t negative = 0, masked_leak = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(8), m = 1 + rng.below(8), d = 1 + rng.below(8);
        AttentionMask mask(n, m);
        const int kind = static_cast<int>(rng.below(3));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (kind == 0) mask.set(i, j, true);
                else if (kind == 1) mask.set(i, j, j <= i || j == 0);
                else mask.set(i, j, rng.uniform() < 0.5);
            }
            if (kind == 2) mask.set(i, rng.below(m), true);
        }
        Tape tape;
        const double spread = rng.uniform(0.1, 30.0);
        const auto res = scaled_dot_product_attention(tape.constant(random_tensor({n, d}, rng, -spread, spread)),
                                                      tape.constant(random_tensor({m, d}, rng, -spread, spread)),
                                                      tape.constant(random_tensor({m, 3}, rng)), &mask);
        const Tensor& w = res.weights.value();
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                negative += w.at(i, j) < 0.0;
                masked_leak += !mask.allowed(i, j) && w.at(i, j) != 0.0;
                s += w.at(i, j);
            }
            worst_sum = std::max(worst_sum, std::abs(s - 1.0));
        }
    }
    out.require(worst_sum <= 1e-12, "row sums");
    out.require(negative == 0, "nonnegative");
    out.require(masked_leak == 0, "masked zero");
    out.detail << "1000 inputs; max |row sum - 1| = " << fmt(worst_sum, 3) << " (limit 1e-12); negative " << negative
               << "; masked nonzero " << masked_leak;
}

// 3 -------------------------------------------------------------------------
void architecture_conformance(Outcome& out) {
    const ModelConfig m;
    const TrainConfig t;
    const SequenceLengths l;
    out.require(m.model_dim == 512, "embedding 512");
    out.require(m.text_embed_dim == 512, "text embedding 512");
    out.require(m.num_heads == 3, "3 heads");
    out.require(m.ff_dim == 512, "ff 512");
    out.require(t.batch_size == 64, "batch 64");
    out.require(t.base_lr == 3e-4, "lr 3e-4");
    out.require(t.warmup_steps == 500, "warmup 500");
    out.require(t.max_epochs == 100, "epochs 100");
    out.require(t.early_stop_patience == 5, "patience 5");
    out.require(m.report_len == 43 && l.report == 43, "report 43");
    out.require(m.chief_len == 2 && l.chief == 2, "chief 2");
    out.require(m.icd_len == 6 && l.icd == 6, "icd 6");
    const auto j = config_to_json(m);
    out.require(j.at("model_dim") == 512 && j.at("num_heads") == 3, "serialized config");
    out.detail << "d=" << m.model_dim << " heads=" << m.num_heads << " ff=" << m.ff_dim << " batch=" << t.batch_size
               << " lr=" << t.base_lr << " warmup=" << t.warmup_steps << " epochs=" << t.max_epochs
               << " patience=" << t.early_stop_patience << " lengths=" << l.report << "/" << l.chief << "/" << l.icd;
}

// 4 -------------------------------------------------------------------------
void overfit_sanity(Outcome& out) {
    const auto t0 = Clock::now();
    PipelineConfig pc = desk_scale_config();
    pc.synthetic.num_samples = 200;
    pc.synthetic.seed = 404;
    const PreparedDataset data = prepare_dataset(generate_synthetic(pc.synthetic), pc.preprocess);
    const std::vector<PatientRecord> sixteen(data.train.begin(), data.train.begin() + 16);
    ModelConfig mc = model_config_for(data, pc.model);
    out.require(mc.model_dim == 32, "d_model 32");
    ReportModel model(mc, 5);
    TrainConfig tc = pc.train;
    tc.batch_size = 16;
    tc.warmup_steps = 10;
    tc.max_epochs = 300;
    tc.early_stop_patience = 300;
    tc.seed = 6;
    const FitResult fr = fit(model, sixteen, sixteen, tc);
    std::size_t first = 0;
    for (const auto& e : fr.history)
        if (first == 0 && e.val_acc >= 0.95) first = e.epoch;
    const SplitStats final_stats = evaluate_split(model, sixteen);
    std::size_t verbatim = 0;
    for (const auto& r : sixteen) {
        const auto gen = model.generate_greedy(r, mc.report_len);
        verbatim += data.vocabs.report.detokenize(gen) == data.vocabs.report.detokenize(r.report_ids);
    }
    const double secs = seconds_since(t0);
    out.require(first != 0 && final_stats.accuracy >= 0.95, "accuracy >= 0.95");
    out.require(verbatim >= 14, "verbatim >= 14/16");
    out.require(secs < 300.0, "runtime");
    out.detail << "masked accuracy " << fmt(final_stats.accuracy) << " (first >= 0.95 at epoch " << first
               << "); verbatim " << verbatim << "/16; " << fmt(secs, 3) << " s";
}

// 5 -------------------------------------------------------------------------
void metric_oracles(Outcome& out) {
    Rng rng(5005);
    auto seq = [&](std::size_t max_len) {
        oracle::Seq s(rng.below(max_len + 1));
        for (auto& x : s) x = std::to_string(rng.below(10));
        return s;
    };
    double bleu_err = 0.0, rouge_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto c = seq(12), r = seq(12);
        const auto expected = oracle::bleu(c, r);
        const BleuResult got = bleu(c, r);
        for (std::size_t n = 0; n < 4; ++n) bleu_err = std::max(bleu_err, std::abs(got.score[n] - expected[n]));
        const std::size_t lcs = oracle::lcs_recursive(c, r);
        const RougeLResult rl = rouge_l(c, r);
        rouge_err = std::max(rouge_err, std::abs(rl.f_score - oracle::rouge_l_f(lcs, c.size(), r.size(), 1.2)));
        rouge_err = std::max(rouge_err, std::abs(static_cast<double>(rl.lcs) - static_cast<double>(lcs)));
    }
    std::size_t lcs_mismatch = 0;
    for (int i = 0; i < 500; ++i) {
        const auto a = seq(8), b = seq(8);
        lcs_mismatch += lcs_length(a, b) != oracle::lcs_bruteforce(a, b);
    }
    out.require(bleu_err <= 1e-12, "bleu");
    out.require(rouge_err <= 1e-12, "rouge");
    out.require(lcs_mismatch == 0, "lcs");
    out.detail << "100 pairs: max BLEU diff " << fmt(bleu_err, 3) << ", max ROUGE-L diff " << fmt(rouge_err, 3)
               << " (limit 1e-12); 500 LCS enumerations, mismatches " << lcs_mismatch;
}

// 6 -------------------------------------------------------------------------
void preprocessing_golden(Outcome& out) {
    const std::vector<std::pair<std::string, std::string>> text{{"cp", "chest pain"},
                                                                {"sob", "dyspnea"},
                                                                {"chest pain, dyspnea", "chest pain and dyspnea"},
                                                                {"fevers", "fever"}};
    std::size_t ok = 0;
    for (const auto& [in, want] : text) {
        const bool pass = standardize_text(in) == want;
        out.require(pass, in);
        ok += pass;
    }
    out.require(encode_gender("Male") == 0.0, "Male");
    out.require(encode_gender("Female") == 1.0, "Female");
    out.require(std::abs(celsius_to_fahrenheit(37.0) - 98.6) < 1e-12, "37C");
    const FeatureStats s{50.0, 150.0};
    out.require(minmax_normalize(50.0, s) == 0.0, "min->0");
    out.require(minmax_normalize(150.0, s) == 1.0, "max->1");
    out.detail << ok << "/4 text rules; gender 0/1; 37 C -> " << fmt(celsius_to_fahrenheit(37.0), 6)
               << " F; min/max -> " << minmax_normalize(50.0, s) << "/" << minmax_normalize(150.0, s);
}

// 7 -------------------------------------------------------------------------
void fusion_ablation(Outcome& out) {
    const auto t0 = Clock::now();
    PipelineConfig cfg = desk_scale_config();
    out.require(cfg.synthetic.num_samples == 2000, "2000 samples");
    out.require(cfg.train.max_epochs <= 30, "<= 30 epochs");
    const AblationTable table = run_ablation(cfg, [](const std::string& line) {
        if (line.find("epoch") == std::string::npos) std::fprintf(stderr, "  %s\n", line.c_str());
    });
    std::map<std::uint64_t, std::map<std::string, AblationRow>> by_seed;
    for (const auto& r : table.runs) by_seed[r.seed][r.mask] = r;
    std::size_t seeds_ok = 0;
    for (const auto& [seed, rows] : by_seed) {
        const AblationRow& base = rows.at("image_only");
        const AblationRow& all = rows.at("all");
        const bool ok = all.bleu[0] - base.bleu[0] >= 0.05 && all.rouge_l - base.rouge_l >= 0.05 &&
                        all.planted_accuracy >= 0.9 && base.planted_accuracy < 0.6 && all.epochs <= 30 &&
                        base.epochs <= 30;
        seeds_ok += ok;
        out.detail << "seed " << seed << ": BLEU-1 " << fmt(base.bleu[0], 3) << "->" << fmt(all.bleu[0], 3)
                   << ", ROUGE-L " << fmt(base.rouge_l, 3) << "->" << fmt(all.rouge_l, 3) << ", planted "
                   << fmt(base.planted_accuracy, 3) << "->" << fmt(all.planted_accuracy, 3) << (ok ? "" : " (miss)")
                   << "; ";
    }
    const double secs = seconds_since(t0);
    out.require(by_seed.size() == 3 && seeds_ok == 3, "3 of 3 seeds");
    out.require(secs < 1800.0, "runtime");
    out.detail << seeds_ok << "/3 seeds; " << fmt(secs, 4) << " s";
    std::fprintf(stderr, "%s", table.to_text().c_str());
}

// 8 and 9 -------------------------------------------------------------------
std::string end_to_end(const fs::path& root, EvalReport* report) {
    PipelineConfig cfg = desk_scale_config();
    cfg.synthetic.num_samples = 300;
    cfg.synthetic.seed = 8;
    cfg.train.max_epochs = 3;
    cfg.train.seed = 8;
    cfg.init_seed = 8;
    run_synth(cfg.synthetic, root / "synth", DataFormat::Jsonl);
    run_preprocess(root / "synth", root / "prepared", cfg.preprocess);
    run_train(root / "prepared", root / "model", cfg);
    run_generate(root / "prepared", root / "model", "test", root / "generated.jsonl");
    const EvalReport r = run_evaluate(root / "generated.jsonl", root / "eval", cfg.evaluate);
    if (report != nullptr) *report = r;
    return read_text(root / "eval" / "eval_report.json");
}

void determinism(Outcome& out) {
    const auto t0 = Clock::now();
    const std::string a = end_to_end(scratch_dir("accept-run-a"), nullptr);
    const std::string b = end_to_end(scratch_dir("accept-run-b"), nullptr);
    out.require(!a.empty() && a == b, "byte-identical");
    out.detail << "eval_report.json " << a.size() << " bytes, sha256 " << sha256_hex(a).substr(0, 16) << " vs "
               << sha256_hex(b).substr(0, 16) << "; " << fmt(seconds_since(t0), 3) << " s";
}

void score_buckets(Outcome& out) {
    EvalReport pipeline_report;
    end_to_end(scratch_dir("accept-buckets"), &pipeline_report);
    Rng rng(909);
    std::vector<EvalPair> pairs;
    for (int i = 0; i < 997; ++i) {
        EvalPair p;
        p.sample_id = std::to_string(i);
        const std::size_t lc = 1 + rng.below(12), lr = 1 + rng.below(12);
        for (std::size_t k = 0; k < lc; ++k) p.candidate.push_back(std::to_string(rng.below(12)));
        for (std::size_t k = 0; k < lr; ++k) p.reference.push_back(std::to_string(rng.below(12)));
        pairs.push_back(p);
    }
    const EvalReport random_report = corpus_evaluate(pairs, HashEmbeddingProvider());
    double worst = 0.0;
    for (const EvalReport* r : std::vector<const EvalReport*>{&pipeline_report, &random_report}) {
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t b = 0; b < kBleuBuckets; ++b) {
            total += r->bleu1_fractions[b];
            count += r->bleu1_counts[b];
        }
        worst = std::max(worst, std::abs(total - 1.0));
        out.require(count == r->samples.size(), "counts cover samples");
        const auto j = r->to_json().at("bleu1_histogram");
        out.require(j.size() == kBleuBuckets && j.at(1).at("bucket") == "[0.1,0.3)", "bucket labels");
    }
    out.require(worst <= 1e-12, "fractions sum");
    out.detail << "buckets";
    for (std::size_t b = 0; b < kBleuBuckets; ++b)
        out.detail << " " << bleu_bucket_label(b) << "=" << fmt(random_report.bleu1_fractions[b], 3);
    out.detail << "; max |sum - 1| = " << fmt(worst, 3) << " (limit 1e-12)";
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
        {"gradient correctness", gradient_correctness},
        {"attention invariants", attention_invariants},
        {"architecture conformance", architecture_conformance},
        {"overfit sanity", overfit_sanity},
        {"metric oracle equivalence", metric_oracles},
        {"preprocessing golden rules", preprocessing_golden},
        {"fusion ablation ordering", fusion_ablation},
        {"end-to-end determinism", determinism},
        {"score-bucket reporting", score_buckets},
    };
    std::set<std::size_t> selected;
    for (int i = 1; i < argc; ++i) selected.insert(static_cast<std::size_t>(std::stoul(argv[i])));

    std::size_t failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!selected.empty() && !selected.count(i + 1)) continue;
        Outcome out;
        try {
            criteria[i].second(out);
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << " exception: " << e.what();
        }
        failed += !out.pass;
        std::printf("[%s] criterion %zu %s: %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    out.detail.str().c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
