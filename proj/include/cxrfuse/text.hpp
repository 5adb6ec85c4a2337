// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cxrfuse {

/// Ordered whole-word rewrite rules. Patterns may span several words.
class AbbreviationMap {
public:
    struct Rule {
        std::string pattern;
        std::string replacement;
    };

    AbbreviationMap() = default;
    /// Throws ConfigError if a replacement would itself be rewritten by some
    /// rule (which would make standardization non-idempotent).
    explicit AbbreviationMap(std::vector<Rule> rules);

    /// cp -> chest pain, sob / shortness of breath -> dyspnea, fevers -> fever.
    static const AbbreviationMap& clinical_defaults();
    /// Defaults followed by the rules of a JSON file `[{"pattern": .., "replacement": ..}, ...]`.
    static AbbreviationMap with_extension_file(const std::filesystem::path& file);

    const std::vector<Rule>& rules() const noexcept { return rules_; }
    std::vector<std::string> apply(std::vector<std::string> words) const;

private:
    struct Compiled {
        std::vector<std::string> pattern;
        std::vector<std::string> replacement;
    };
    std::vector<Rule> rules_;
    std::vector<Compiled> compiled_;
};

/// Lowercase, drop punctuation, runs of periods to a space, comma-joined
/// phrases to "and", then whole-word abbreviation expansion. Idempotent.
std::string standardize_text(std::string_view text, const AbbreviationMap& map = AbbreviationMap::clinical_defaults());

/// Whitespace tokenization.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

/// Token <-> id map with PAD=0, START=1, END=2, UNK=3 reserved. Regular tokens
/// are numbered by descending corpus frequency, ties broken lexicographically.
class Vocabulary {
public:
    static Vocabulary fit(const std::vector<std::vector<std::string>>& corpus);

    std::size_t size() const noexcept { return tokens_.size(); }
    /// UNK for unseen tokens.
    std::size_t id(const std::string& token) const;
    const std::string& token(std::size_t id) const;
    bool contains(const std::string& token) const { return ids_.count(token) != 0; }

    std::vector<std::size_t> encode(std::span<const std::string> tokens) const;
    /// Drops PAD/START and stops at END.
    std::vector<std::string> decode(std::span<const std::size_t> ids) const;
    std::string detokenize(std::span<const std::size_t> ids) const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, std::size_t> ids_;
};

/// Exactly `length` ids: truncated, or right-padded with PAD.
std::vector<std::size_t> pad_truncate(std::vector<std::size_t> ids, std::size_t length);

/// START + content + END, content truncated so the result fits `length`, then PAD-padded.
std::vector<std::size_t> encode_target(const Vocabulary& vocab, std::span<const std::string> tokens,
                                       std::size_t length);

}  // namespace cxrfuse
