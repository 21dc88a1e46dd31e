#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stancectx/corpus.hpp"
#include "stancectx/errors.hpp"
#include "stancectx/fsutil.hpp"
#include "stancectx/hashing.hpp"
#include "stancectx/text.hpp"

namespace stancectx {

// Tier index doubles as the axis of the topic-diversity vector, so it is
// stable and dense: 0 = general, 1 = party, 2 = hot-button.
inline constexpr int kLexiconTiers = 3;

struct LexiconEntry {
    std::string term;                 // display form, lowercased
    std::vector<std::string> tokens;  // tokenize(term), never empty
    int weight = 1;
    int tier = 0;
};

struct MatchCounts {
    std::int64_t weighted = 0;
    std::array<int, kLexiconTiers> tier_counts{};
    int total_matches = 0;
};

class WeightedLexicon {
public:
    // Entries with identical token sequences collapse to one: the higher
    // tier wins, and within a tier the higher weight wins.
    void add_term(std::string_view term, int weight, int tier) {
        if (tier < 0 || tier >= kLexiconTiers)
            throw ConfigError("lexicon tier out of range: " + std::to_string(tier));
        if (weight <= 0)
            throw ConfigError("lexicon weight must be positive for term \"" +
                              std::string(term) + "\"");
        LexiconEntry entry;
        entry.term = to_lower(trim(term));
        entry.tokens = tokenize(entry.term);
        if (entry.tokens.empty())
            throw ConfigError("lexicon term \"" + std::string(term) +
                              "\" contains no word characters");
        entry.weight = weight;
        entry.tier = tier;

        std::string key = sequence_key(entry.tokens);
        auto it = by_sequence_.find(key);
        if (it == by_sequence_.end()) {
            entries_.push_back(std::move(entry));
            by_sequence_[key] = entries_.size() - 1;
            index_dirty_ = true;
            return;
        }
        LexiconEntry& existing = entries_[it->second];
        if (entry.tier > existing.tier ||
            (entry.tier == existing.tier && entry.weight > existing.weight)) {
            existing = std::move(entry);
        }
    }

    void add_subforum(std::string_view name) {
        subforums_.insert(to_lower(trim(name)));
    }

    bool is_political_subforum(std::string_view subforum) const {
        return subforums_.count(to_lower(trim(subforum))) != 0;
    }

    const std::vector<LexiconEntry>& entries() const { return entries_; }
    const std::set<std::string>& subforums() const { return subforums_; }

    const LexiconEntry* find_term(std::string_view term) const {
        auto tokens = tokenize(to_lower(trim(term)));
        auto it = by_sequence_.find(sequence_key(tokens));
        if (it == by_sequence_.end()) return nullptr;
        return &entries_[it->second];
    }

    // Single left-to-right pass over the token stream; at each position the
    // longest matching phrase wins and its tokens are consumed, so "left-wing"
    // never also counts as "left".
    MatchCounts match(const std::vector<std::string>& tokens) const {
        build_index();
        MatchCounts counts;
        const std::size_t n = tokens.size();
        std::size_t i = 0;
        while (i < n) {
            auto it = first_token_index_.find(tokens[i]);
            bool matched = false;
            if (it != first_token_index_.end()) {
                for (std::size_t entry_idx : it->second) {
                    const LexiconEntry& e = entries_[entry_idx];
                    const std::size_t len = e.tokens.size();
                    if (i + len > n) continue;
                    bool equal = true;
                    for (std::size_t k = 1; k < len; ++k) {
                        if (tokens[i + k] != e.tokens[k]) {
                            equal = false;
                            break;
                        }
                    }
                    if (!equal) continue;
                    counts.weighted += e.weight;
                    counts.tier_counts[e.tier] += 1;
                    counts.total_matches += 1;
                    i += len;
                    matched = true;
                    break;
                }
            }
            if (!matched) ++i;
        }
        return counts;
    }

    MatchCounts match_text(std::string_view text) const { return match(tokenize(text)); }

private:
    static std::string sequence_key(const std::vector<std::string>& tokens) {
        std::string key;
        for (const auto& t : tokens) {
            key += t;
            key.push_back('\x1f');
        }
        return key;
    }

    void build_index() const {
        if (!index_dirty_) return;
        first_token_index_.clear();
        for (std::size_t i = 0; i < entries_.size(); ++i)
            first_token_index_[entries_[i].tokens.front()].push_back(i);
        for (auto& [token, ids] : first_token_index_)
            std::sort(ids.begin(), ids.end(), [this](std::size_t a, std::size_t b) {
                if (entries_[a].tokens.size() != entries_[b].tokens.size())
                    return entries_[a].tokens.size() > entries_[b].tokens.size();
                return a < b;
            });
        index_dirty_ = false;
    }

    std::vector<LexiconEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_sequence_;
    std::set<std::string> subforums_;
    mutable std::unordered_map<std::string, std::vector<std::size_t>> first_token_index_;
    mutable bool index_dirty_ = true;
};

// General political vocabulary at weight 1, party and ideology markers at
// weight 2, hot-button issue terms at weight 3. "socialism" appears in both
// the party and hot-button lists; the collapse rule keeps the higher tier.
inline WeightedLexicon default_lexicon() {
    WeightedLexicon lex;
    for (const char* t : {"politics", "political", "government", "policy", "policies",
                          "election", "vote", "voting", "democracy", "democratic"})
        lex.add_term(t, 1, 0);
    for (const char* t : {"democrat", "democratic party", "liberal", "progressive",
                          "socialism", "left", "left-wing", "republican", "gop",
                          "conservative", "right", "right-wing", "trump", "biden",
                          "obama", "maga", "tea party"})
        lex.add_term(t, 2, 1);
    for (const char* t : {"abortion", "gun", "immigration", "climate", "tax",
                          "healthcare", "obamacare", "socialism", "vaccine", "blm",
                          "black lives matter", "defund", "wall", "border"})
        lex.add_term(t, 3, 2);
    for (const char* s : {"politics", "political discussion", "current events", "elections"})
        lex.add_subforum(s);
    return lex;
}

// {"general_terms": {term: weight}, "party_terms": {...},
//  "hot_button_terms": {...}, "political_subforums": [...]}
inline WeightedLexicon load_lexicon(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("lexicon " + path.string() + ": " + e.what());
    }
    WeightedLexicon lex;
    static constexpr std::array<const char*, kLexiconTiers> kTierKeys = {
        "general_terms", "party_terms", "hot_button_terms"};
    for (int tier = 0; tier < kLexiconTiers; ++tier) {
        const char* key = kTierKeys[tier];
        if (!j.contains(key)) continue;
        if (!j[key].is_object())
            throw ConfigError("lexicon " + path.string() + ": \"" + key +
                              "\" must map terms to weights");
        for (const auto& [term, weight] : j[key].items()) {
            if (!weight.is_number_integer())
                throw ConfigError("lexicon " + path.string() + ": weight for \"" + term +
                                  "\" must be an integer");
            lex.add_term(term, weight.get<int>(), tier);
        }
    }
    if (j.contains("political_subforums")) {
        if (!j["political_subforums"].is_array())
            throw ConfigError("lexicon " + path.string() +
                              ": \"political_subforums\" must be an array");
        for (const auto& s : j["political_subforums"]) {
            if (!s.is_string())
                throw ConfigError("lexicon " + path.string() +
                                  ": subforum names must be strings");
            lex.add_subforum(s.get<std::string>());
        }
    }
    if (lex.entries().empty())
        throw ConfigError("lexicon " + path.string() + " defines no terms");
    return lex;
}

// Flat keyword list as a degenerate lexicon: every term tier 0, weight 1.
inline WeightedLexicon keyword_lexicon(const std::vector<std::string>& keywords) {
    WeightedLexicon lex;
    for (const auto& k : keywords) lex.add_term(k, 1, 0);
    return lex;
}

// ---------------------------------------------------------------------------
// Post scoring

struct ScoreOptions {
    bool include_quotes = false;
    double noise_range = 0.01;  // 0 disables tie-break noise
    std::uint64_t seed = 42;
};

inline constexpr double kSubforumBoost = 5.0;

struct PoliticalScore {
    double base = 0.0;
    double subforum_boost = 0.0;
    double noise = 0.0;
    MatchCounts counts;

    double total() const { return base + subforum_boost + noise; }
};

// Quoted spans are masked with spaces (offsets preserved) so that removing a
// quote cannot fuse its neighbors into a new token.
inline std::string masked_text(const RawPost& post) {
    std::string text = post.text;
    for (const auto& span : post.quoted_spans) {
        std::size_t end = std::min(span.end, text.size());
        for (std::size_t i = span.begin; i < end; ++i) text[i] = ' ';
    }
    return text;
}

inline double score_noise(std::uint64_t seed, std::string_view post_id, double range) {
    if (range == 0.0) return 0.0;
    SplitMix64 rng(derive_seed(seed, post_id));
    return rng.next_unit() * range;
}

inline PoliticalScore score_post(const RawPost& post, const WeightedLexicon& lexicon,
                                 const ScoreOptions& options = {}) {
    PoliticalScore score;
    std::string text = options.include_quotes ? post.text : masked_text(post);
    score.counts = lexicon.match_text(text);
    score.base = static_cast<double>(score.counts.weighted);
    if (lexicon.is_political_subforum(post.subforum)) score.subforum_boost = kSubforumBoost;
    score.noise = score_noise(options.seed, post.post_id, options.noise_range);
    return score;
}

}  // namespace stancectx
