// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cxrfuse/errors.hpp"
#include "cxrfuse/rng.hpp"

namespace cxrfuse {

namespace {

using NGram = std::vector<std::string>;

std::map<NGram, std::size_t> ngram_counts(std::span<const std::string> tokens, std::size_t n) {
    std::map<NGram, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts[NGram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

}  // namespace

BleuResult bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
                const BleuOptions& options) {
    if (options.max_n < 1 || options.max_n > 4) throw ContractError("bleu max_n must be in [1, 4]");
    BleuResult r;
    r.max_n = options.max_n;
    if (candidate.empty()) {
        r.empty_candidate = true;
        return r;
    }
    for (std::size_t n = 1; n <= options.max_n; ++n) {
        const auto cand = ngram_counts(candidate, n);
        const auto ref = ngram_counts(reference, n);
        std::size_t matched = 0, total = 0;
        for (const auto& [gram, count] : cand) {
            total += count;
            auto it = ref.find(gram);
            if (it != ref.end()) matched += std::min(count, it->second);
        }
        if (options.smoothing && n >= 2) {
            r.precision[n - 1] = (static_cast<double>(matched) + 1.0) / (static_cast<double>(total) + 1.0);
        } else {
            r.precision[n - 1] = total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
        }
    }
    const double c = static_cast<double>(candidate.size());
    const double ref_len = static_cast<double>(reference.size());
    r.brevity_penalty = c > ref_len ? 1.0 : std::exp(1.0 - ref_len / c);
    double log_sum = 0.0;
    bool zero = false;
    for (std::size_t n = 1; n <= options.max_n; ++n) {
        if (r.precision[n - 1] <= 0.0) zero = true;
        if (!zero) log_sum += std::log(r.precision[n - 1]);
        r.score[n - 1] = zero ? 0.0 : r.brevity_penalty * std::exp(log_sum / static_cast<double>(n));
    }
    return r;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeLResult rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference, double beta) {
    RougeLResult r;
    if (candidate.empty() || reference.empty()) {
        r.empty_input = true;
        return r;
    }
    r.lcs = lcs_length(candidate, reference);
    r.precision = static_cast<double>(r.lcs) / static_cast<double>(candidate.size());
    r.recall = static_cast<double>(r.lcs) / static_cast<double>(reference.size());
    const double b2 = beta * beta;
    const double denom = r.recall + b2 * r.precision;
    r.f_score = denom > 0.0 ? (1.0 + b2) * r.precision * r.recall / denom : 0.0;
    return r;
}

namespace {

std::vector<double> normalized(std::vector<double> v, const std::string& token) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw EvaluationError("embedding for '" + token + "' has no direction");
    for (double& x : v) x /= norm;
    return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

std::vector<double> HashEmbeddingProvider::embed(const std::string& token) const {
    Rng rng(fnv1a64(token) ^ (salt_ * 0x9e3779b97f4a7c15ULL));
    std::vector<double> v(dim_);
    for (double& x : v) x = rng.normal();
    return normalized(std::move(v), token);
}

TableEmbeddingProvider::TableEmbeddingProvider(std::map<std::string, std::vector<double>> table) {
    std::size_t dim = 0;
    for (auto& [token, vec] : table) {
        if (dim == 0) dim = vec.size();
        if (vec.size() != dim) throw EvaluationError("embedding for '" + token + "' has inconsistent width");
        table_.emplace(token, normalized(std::move(vec), token));
    }
}

TableEmbeddingProvider TableEmbeddingProvider::from_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw EvaluationError("cannot read embedding file " + file.string());
    std::map<std::string, std::vector<double>> table;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string token;
        if (!(ss >> token)) continue;
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        table[token] = std::move(v);
    }
    return TableEmbeddingProvider(std::move(table));
}

std::vector<double> TableEmbeddingProvider::embed(const std::string& token) const {
    auto it = table_.find(token);
    if (it == table_.end()) throw EvaluationError("no embedding for token '" + token + "'");
    return it->second;
}

EmbeddingF1Result embedding_f1(std::span<const std::string> candidate, std::span<const std::string> reference,
                               const EmbeddingProvider& provider) {
    EmbeddingF1Result r;
    if (candidate.empty() || reference.empty()) {
        r.empty_input = true;
        return r;
    }
    std::vector<std::vector<double>> c, f;
    for (const auto& t : candidate) c.push_back(provider.embed(t));
    for (const auto& t : reference) f.push_back(provider.embed(t));
    std::vector<double> best_c(c.size(), -1.0), best_f(f.size(), -1.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i].size() != f.front().size()) throw EvaluationError("embedding width mismatch for '" + candidate[i] + "'");
        for (std::size_t j = 0; j < f.size(); ++j) {
            const double s = std::clamp(dot(c[i], f[j]), -1.0, 1.0);
            best_c[i] = std::max(best_c[i], s);
            best_f[j] = std::max(best_f[j], s);
        }
    }
    for (double s : best_c) r.precision += s;
    for (double s : best_f) r.recall += s;
    r.precision /= static_cast<double>(c.size());
    r.recall /= static_cast<double>(f.size());
    const double denom = r.precision + r.recall;
    r.f1 = denom != 0.0 ? 2.0 * r.precision * r.recall / denom : 0.0;
    return r;
}

std::size_t bleu_bucket(double score) {
    for (std::size_t b = 0; b + 1 < kBleuBuckets; ++b) {
        if (score < kBleuBucketEdges[b + 1]) return b;
    }
    return kBleuBuckets - 1;
}

std::string bleu_bucket_label(std::size_t bucket) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(1) << '[' << kBleuBucketEdges[bucket] << ',' << kBleuBucketEdges[bucket + 1]
       << (bucket + 1 == kBleuBuckets ? ']' : ')');
    return ss.str();
}

EvalReport corpus_evaluate(const std::vector<EvalPair>& pairs, const EmbeddingProvider& provider,
                           const EvalOptions& options) {
    if (pairs.empty()) throw EvaluationError("corpus evaluation needs at least one pair");
    EvalReport rep;
    for (const auto& p : pairs) {
        SampleScores s;
        s.sample_id = p.sample_id;
        s.bleu = bleu(p.candidate, p.reference, options.bleu).score;
        s.rouge_l = rouge_l(p.candidate, p.reference, options.rouge_beta).f_score;
        s.embedding_f1 = embedding_f1(p.candidate, p.reference, provider).f1;
        for (std::size_t n = 0; n < 4; ++n) rep.mean_bleu[n] += s.bleu[n];
        rep.mean_rouge_l += s.rouge_l;
        rep.mean_embedding_f1 += s.embedding_f1;
        ++rep.bleu1_counts[bleu_bucket(s.bleu[0])];
        rep.samples.push_back(std::move(s));
    }
    const double n = static_cast<double>(pairs.size());
    for (double& b : rep.mean_bleu) b /= n;
    rep.mean_rouge_l /= n;
    rep.mean_embedding_f1 /= n;
    for (std::size_t b = 0; b < kBleuBuckets; ++b) rep.bleu1_fractions[b] = static_cast<double>(rep.bleu1_counts[b]) / n;
    return rep;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json hist = nlohmann::json::array();
    for (std::size_t b = 0; b < kBleuBuckets; ++b) {
        hist.push_back({{"bucket", bleu_bucket_label(b)},
                        {"lo", kBleuBucketEdges[b]},
                        {"hi", kBleuBucketEdges[b + 1]},
                        {"count", bleu1_counts[b]},
                        {"fraction", bleu1_fractions[b]}});
    }
    nlohmann::json per_sample = nlohmann::json::array();
    for (const auto& s : samples) {
        per_sample.push_back({{"sample_id", s.sample_id},
                              {"bleu1", s.bleu[0]},
                              {"bleu2", s.bleu[1]},
                              {"bleu3", s.bleu[2]},
                              {"bleu4", s.bleu[3]},
                              {"rouge_l", s.rouge_l},
                              {"embedding_f1", s.embedding_f1}});
    }
    return {{"count", samples.size()},
            {"means",
             {{"bleu1", mean_bleu[0]},
              {"bleu2", mean_bleu[1]},
              {"bleu3", mean_bleu[2]},
              {"bleu4", mean_bleu[3]},
              {"rouge_l", mean_rouge_l},
              {"embedding_f1", mean_embedding_f1}}},
            {"bleu1_histogram", hist},
            {"samples", per_sample}};
}

std::string EvalReport::per_sample_csv() const {
    std::ostringstream ss;
    ss.precision(17);
    ss << "sample_id,bleu1,bleu2,bleu3,bleu4,rouge_l,embedding_f1\n";
    for (const auto& s : samples) {
        ss << s.sample_id << ',' << s.bleu[0] << ',' << s.bleu[1] << ',' << s.bleu[2] << ',' << s.bleu[3] << ','
           << s.rouge_l << ',' << s.embedding_f1 << '\n';
    }
    return ss.str();
}

}  // namespace cxrfuse
