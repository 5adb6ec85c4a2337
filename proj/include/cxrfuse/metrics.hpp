// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cxrfuse {

using Tokens = std::vector<std::string>;

struct BleuResult {
    std::size_t max_n = 4;
    /// Clipped modified precision p_1..p_max_n (entries beyond max_n are 0).
    std::array<double, 4> precision{};
    double brevity_penalty = 0.0;
    /// BLEU-1..BLEU-max_n.
    std::array<double, 4> score{};
    bool empty_candidate = false;
};

struct BleuOptions {
    std::size_t max_n = 4;
    /// Add-one smoothing of p_n for n >= 2.
    bool smoothing = false;
};

/// Sentence-level Papineni BLEU. An empty candidate scores 0 with `empty_candidate` set.
BleuResult bleu(std::span<const std::string> candidate, std::span<const std::string> reference,
                const BleuOptions& options = {});

struct RougeLResult {
    std::size_t lcs = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f_score = 0.0;
    bool empty_input = false;
};

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// F = (1 + β²)PR / (R + β²P).
RougeLResult rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference,
                     double beta = 1.2);

/// Token -> unit-norm vector.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    /// Throws EvaluationError naming the token when no vector is available.
    virtual std::vector<double> embed(const std::string& token) const = 0;
};

/// Deterministic pseudo-random unit vectors seeded by a hash of the token.
class HashEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(std::size_t dim = 64, std::uint64_t salt = 0) : dim_(dim), salt_(salt) {}
    std::vector<double> embed(const std::string& token) const override;

private:
    std::size_t dim_;
    std::uint64_t salt_;
};

/// Fixed table; vectors are normalized on insertion.
class TableEmbeddingProvider final : public EmbeddingProvider {
public:
    TableEmbeddingProvider() = default;
    explicit TableEmbeddingProvider(std::map<std::string, std::vector<double>> table);
    /// Text format: one token per line followed by its components, whitespace separated.
    static TableEmbeddingProvider from_file(const std::filesystem::path& file);

    std::vector<double> embed(const std::string& token) const override;

private:
    std::map<std::string, std::vector<double>> table_;
};

struct EmbeddingF1Result {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool empty_input = false;
};

/// Greedy cosine matching: recall averages, over reference tokens, the best
/// match among candidate tokens; precision is the mirror image.
EmbeddingF1Result embedding_f1(std::span<const std::string> candidate, std::span<const std::string> reference,
                               const EmbeddingProvider& provider);

struct SampleScores {
    std::string sample_id;
    std::array<double, 4> bleu{};
    double rouge_l = 0.0;
    double embedding_f1 = 0.0;
};

inline constexpr std::array<double, 6> kBleuBucketEdges{0.0, 0.1, 0.3, 0.5, 0.7, 1.0};
inline constexpr std::size_t kBleuBuckets = 5;

/// Index of the histogram bucket holding `score`; the last bucket is closed.
std::size_t bleu_bucket(double score);
std::string bleu_bucket_label(std::size_t bucket);

struct EvalPair {
    std::string sample_id;
    Tokens candidate;
    Tokens reference;
};

struct EvalOptions {
    BleuOptions bleu;
    double rouge_beta = 1.2;
};

struct EvalReport {
    std::vector<SampleScores> samples;
    std::array<double, 4> mean_bleu{};
    double mean_rouge_l = 0.0;
    double mean_embedding_f1 = 0.0;
    std::array<std::size_t, kBleuBuckets> bleu1_counts{};
    std::array<double, kBleuBuckets> bleu1_fractions{};

    nlohmann::json to_json() const;
    std::string per_sample_csv() const;
};

/// Per-sample scores, their means, and the BLEU-1 histogram. Throws EvaluationError on no pairs.
EvalReport corpus_evaluate(const std::vector<EvalPair>& pairs, const EmbeddingProvider& provider,
                           const EvalOptions& options = {});

}  // namespace cxrfuse
