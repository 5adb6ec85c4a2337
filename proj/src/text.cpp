// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "cxrfuse/errors.hpp"
#include "cxrfuse/records.hpp"

namespace cxrfuse {

namespace {

bool matches_at(const std::vector<std::string>& words, std::size_t pos, const std::vector<std::string>& pattern) {
    if (pos + pattern.size() > words.size()) return false;
    return std::equal(pattern.begin(), pattern.end(), words.begin() + static_cast<std::ptrdiff_t>(pos));
}

}  // namespace

AbbreviationMap::AbbreviationMap(std::vector<Rule> rules) : rules_(std::move(rules)) {
    for (const auto& r : rules_) {
        auto pattern = tokenize(r.pattern);
        if (pattern.empty()) throw ConfigError("abbreviation rule with empty pattern");
        compiled_.push_back({std::move(pattern), tokenize(r.replacement)});
    }
    for (const auto& r : compiled_) {
        for (const auto& other : compiled_) {
            for (std::size_t i = 0; i < r.replacement.size(); ++i) {
                if (matches_at(r.replacement, i, other.pattern)) {
                    throw ConfigError("abbreviation replacement '" + join_tokens(r.replacement) +
                                      "' contains rewritable pattern '" + join_tokens(other.pattern) + "'");
                }
            }
        }
    }
}

const AbbreviationMap& AbbreviationMap::clinical_defaults() {
    static const AbbreviationMap map({
        {"shortness of breath", "dyspnea"},
        {"sob", "dyspnea"},
        {"cp", "chest pain"},
        {"fevers", "fever"},
    });
    return map;
}

AbbreviationMap AbbreviationMap::with_extension_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read abbreviation file " + file.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed abbreviation file " + file.string() + ": " + e.what());
    }
    std::vector<Rule> rules = clinical_defaults().rules();
    for (const auto& r : j) {
        // patterns are matched against standardized words, so normalize them the same way
        rules.push_back({standardize_text(r.at("pattern").get<std::string>(), AbbreviationMap{}),
                         standardize_text(r.at("replacement").get<std::string>(), AbbreviationMap{})});
    }
    return AbbreviationMap(std::move(rules));
}

std::vector<std::string> AbbreviationMap::apply(std::vector<std::string> words) const {
    for (const auto& rule : compiled_) {
        std::vector<std::string> out;
        out.reserve(words.size());
        for (std::size_t i = 0; i < words.size();) {
            if (matches_at(words, i, rule.pattern)) {
                out.insert(out.end(), rule.replacement.begin(), rule.replacement.end());
                i += rule.pattern.size();
            } else {
                out.push_back(words[i++]);
            }
        }
        words = std::move(out);
    }
    return words;
}

std::string standardize_text(std::string_view text, const AbbreviationMap& map) {
    static const std::regex period_runs(R"(\.{2,})");
    static const std::regex separators(R"([\r\n\t;:!?"()\[\]{}*])");

    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    s = std::regex_replace(s, separators, " ");
    s = std::regex_replace(s, period_runs, " ");
    s.erase(std::remove(s.begin(), s.end(), '.'), s.end());

    // comma-separated phrases become one phrase joined by "and"
    std::vector<std::string> phrases;
    {
        std::stringstream ss(s);
        std::string piece;
        while (std::getline(ss, piece, ',')) {
            auto words = tokenize(piece);
            if (!words.empty()) phrases.push_back(join_tokens(words));
        }
    }
    std::vector<std::string> words;
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        if (i > 0) words.emplace_back("and");
        for (auto& w : tokenize(phrases[i])) words.push_back(std::move(w));
    }
    words = map.apply(std::move(words));

    std::vector<std::string> cleaned;
    for (auto& w : words) {
        if (w == "and" && (cleaned.empty() || cleaned.back() == "and")) continue;
        cleaned.push_back(std::move(w));
    }
    while (!cleaned.empty() && cleaned.back() == "and") cleaned.pop_back();
    return join_tokens(cleaned);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

namespace {

const std::vector<std::string>& reserved_tokens() {
    static const std::vector<std::string> r{"<pad>", "<start>", "<end>", "<unk>"};
    return r;
}

}  // namespace

Vocabulary Vocabulary::fit(const std::vector<std::vector<std::string>>& corpus) {
    std::map<std::string, std::size_t> counts;
    for (const auto& doc : corpus)
        for (const auto& tok : doc) ++counts[tok];
    for (const auto& r : reserved_tokens()) counts.erase(r);
    if (counts.empty()) throw ConfigError("cannot fit a vocabulary on an empty corpus");
    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary v;
    v.tokens_ = reserved_tokens();
    for (auto& [tok, _] : items) v.tokens_.push_back(tok);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.ids_.emplace(v.tokens_[i], i);
    return v;
}

std::size_t Vocabulary::id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
    if (id >= tokens_.size()) throw ContractError("token id " + std::to_string(id) + " outside vocabulary");
    return tokens_[id];
}

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> tokens) const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const std::size_t> ids) const {
    std::vector<std::string> out;
    for (auto id : ids) {
        if (id == kEndId) break;
        if (id == kPadId || id == kStartId) continue;
        out.push_back(token(id));
    }
    return out;
}

std::string Vocabulary::detokenize(std::span<const std::size_t> ids) const {
    const auto words = decode(ids);
    return join_tokens(words);
}

nlohmann::json Vocabulary::to_json() const { return {{"tokens", tokens_}}; }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    Vocabulary v;
    v.tokens_ = j.at("tokens").get<std::vector<std::string>>();
    if (v.tokens_.size() < reserved_tokens().size() ||
        !std::equal(reserved_tokens().begin(), reserved_tokens().end(), v.tokens_.begin())) {
        throw DataError("vocabulary does not start with the reserved tokens");
    }
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.ids_.emplace(v.tokens_[i], i).second) throw DataError("duplicate vocabulary token '" + v.tokens_[i] + "'");
    }
    return v;
}

std::vector<std::size_t> pad_truncate(std::vector<std::size_t> ids, std::size_t length) {
    ids.resize(length, kPadId);
    return ids;
}

std::vector<std::size_t> encode_target(const Vocabulary& vocab, std::span<const std::string> tokens,
                                       std::size_t length) {
    if (length < 2) throw ContractError("target length must leave room for START and END");
    std::vector<std::size_t> ids{kStartId};
    const std::size_t content = std::min(tokens.size(), length - 2);
    for (std::size_t i = 0; i < content; ++i) ids.push_back(vocab.id(tokens[i]));
    ids.push_back(kEndId);
    return pad_truncate(std::move(ids), length);
}

}  // namespace cxrfuse
