#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stancectx/corpus.hpp"
#include "stancectx/errors.hpp"
#include "stancectx/hashing.hpp"
#include "stancectx/lexicon.hpp"
#include "stancectx/text.hpp"

namespace stancectx {

enum class StrategyKind { PoliticalSignal, Random, ControversialTopic, RecentPost, LongForm };

// Canonical report order; reports iterate strategies in this sequence.
inline constexpr std::array<StrategyKind, 5> kAllStrategies = {
    StrategyKind::PoliticalSignal, StrategyKind::Random, StrategyKind::ControversialTopic,
    StrategyKind::RecentPost, StrategyKind::LongForm};

inline std::string strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::PoliticalSignal: return "political_signal";
        case StrategyKind::Random: return "random";
        case StrategyKind::ControversialTopic: return "controversial_topic";
        case StrategyKind::RecentPost: return "recent_post";
        case StrategyKind::LongForm: return "long_form";
    }
    return "unknown";
}

inline std::optional<StrategyKind> parse_strategy(std::string_view name) {
    std::string v = to_lower(trim(name));
    for (StrategyKind kind : kAllStrategies)
        if (v == strategy_name(kind)) return kind;
    return std::nullopt;
}

// Issue-topic keywords for the ControversialTopic strategy. Strict superset
// of the hot-button lexicon tier. Kept in sync with
// data/controversial_keywords.json by a test; edit both together.
inline const std::vector<std::string>& default_controversial_keywords() {
    static const std::vector<std::string> keywords = {
        "abortion", "gun", "immigration", "climate", "tax", "healthcare", "obamacare",
        "socialism", "vaccine", "blm", "black lives matter", "defund", "wall", "border",
        "gun control", "gun rights", "second amendment", "pro-life", "pro-choice",
        "planned parenthood", "roe v wade", "death penalty", "capital punishment",
        "euthanasia", "assisted suicide", "stem cell", "medicare", "medicaid",
        "single payer", "universal healthcare", "welfare", "food stamps", "minimum wage",
        "living wage", "income inequality", "wealth tax", "estate tax", "flat tax",
        "tax cuts", "deficit", "national debt", "bailout", "stimulus", "austerity",
        "privatization", "deregulation", "tariff", "free trade", "nafta", "outsourcing",
        "labor unions", "collective bargaining", "right to work", "climate change",
        "global warming", "carbon tax", "green new deal", "fracking", "keystone pipeline",
        "fossil fuels", "renewable energy", "nuclear power", "paris agreement",
        "deportation", "amnesty", "daca", "dreamers", "sanctuary city", "border wall",
        "travel ban", "refugee", "asylum", "illegal immigration", "birthright citizenship",
        "voter id", "voter fraud", "gerrymandering", "electoral college",
        "citizens united", "campaign finance", "term limits", "filibuster",
        "supreme court", "court packing", "impeachment", "executive order",
        "states rights", "police brutality", "police reform", "mass incarceration",
        "private prisons", "war on drugs", "marijuana legalization", "opioid crisis",
        "criminal justice reform", "stop and frisk", "racial profiling",
        "affirmative action", "reparations", "systemic racism", "white privilege",
        "critical race theory", "confederate flag", "confederate statues", "hate speech",
        "free speech", "political correctness", "cancel culture", "censorship",
        "fake news", "mainstream media", "net neutrality", "surveillance",
        "patriot act", "whistleblower", "gay marriage", "same-sex marriage",
        "lgbt rights", "transgender", "bathroom bill", "religious freedom",
        "school prayer", "creationism", "evolution", "sex education", "school choice",
        "charter schools", "common core", "student debt", "college tuition",
        "gun show loophole", "assault weapons", "concealed carry", "open carry",
        "background checks", "mass shooting", "nra", "militia", "war on terror",
        "drone strikes", "torture", "guantanamo", "military spending", "the draft",
        "veterans affairs", "israel", "palestine", "iran deal", "north korea",
        "foreign aid", "isolationism", "antifa", "alt-right", "white nationalism",
        "qanon", "deep state", "lobbyists", "super pac", "dark money",
        "social security", "entitlements", "homelessness", "rent control",
        "gentrification", "eminent domain", "federal reserve", "gold standard",
    };
    return keywords;
}

// ["term", ...] or {"keywords": ["term", ...]}.
inline std::vector<std::string> load_keyword_file(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("keyword file " + path.string() + ": " + e.what());
    }
    const nlohmann::json* list = &j;
    if (j.is_object()) {
        if (!j.contains("keywords"))
            throw ConfigError("keyword file " + path.string() +
                              ": expected an array or a \"keywords\" field");
        list = &j["keywords"];
    }
    if (!list->is_array())
        throw ConfigError("keyword file " + path.string() + ": keywords must be an array");
    std::vector<std::string> out;
    for (const auto& item : *list) {
        if (!item.is_string())
            throw ConfigError("keyword file " + path.string() + ": keywords must be strings");
        out.push_back(item.get<std::string>());
    }
    if (out.empty())
        throw ConfigError("keyword file " + path.string() + " defines no keywords");
    return out;
}

struct SelectionStrategy {
    StrategyKind kind = StrategyKind::PoliticalSignal;
    std::uint64_t seed = 42;
    bool include_quotes = false;
    double noise_range = 0.01;
    // Empty means the built-in default list.
    std::vector<std::string> controversial_keywords;

    ScoreOptions score_options() const {
        ScoreOptions opts;
        opts.include_quotes = include_quotes;
        opts.noise_range = noise_range;
        opts.seed = seed;
        return opts;
    }
};

namespace detail {

using TierVector = std::array<double, kLexiconTiers>;

inline TierVector tier_vector(const MatchCounts& counts) {
    TierVector v{};
    for (int t = 0; t < kLexiconTiers; ++t) v[t] = static_cast<double>(counts.tier_counts[t]);
    return v;
}

// 1 - cosine similarity. Two zero vectors are identical (distance 0); a zero
// vector against a non-zero one is maximally far (distance 1).
inline double cosine_distance(const TierVector& a, const TierVector& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int t = 0; t < kLexiconTiers; ++t) {
        dot += a[t] * b[t];
        na += a[t] * a[t];
        nb += b[t] * b[t];
    }
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::vector<const RawPost*> in_input_order(const std::vector<RawPost>& posts,
                                                  std::vector<std::size_t> indices) {
    std::sort(indices.begin(), indices.end());
    std::vector<const RawPost*> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(&posts[i]);
    return out;
}

inline std::vector<std::size_t> select_political_signal(const std::vector<RawPost>& posts,
                                                        std::size_t n,
                                                        const SelectionStrategy& strategy,
                                                        const WeightedLexicon& lexicon) {
    const std::size_t total = posts.size();
    std::vector<PoliticalScore> scores(total);
    ScoreOptions opts = strategy.score_options();
    for (std::size_t i = 0; i < total; ++i) scores[i] = score_post(posts[i], lexicon, opts);

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a].total() > scores[b].total();
    });

    const std::size_t k_top = (6 * n + 9) / 10;  // ceil(0.6 * n), n >= 1 gives >= 1
    std::vector<std::size_t> chosen(order.begin(), order.begin() + k_top);
    std::vector<std::size_t> pool(order.begin() + k_top, order.end());

    TierVector centroid{};
    for (std::size_t i : chosen) {
        TierVector v = tier_vector(scores[i].counts);
        for (int t = 0; t < kLexiconTiers; ++t) centroid[t] += v[t];
    }
    for (int t = 0; t < kLexiconTiers; ++t) centroid[t] /= static_cast<double>(chosen.size());

    std::vector<TierVector> refs{centroid};
    while (chosen.size() < n) {
        std::size_t best_pos = 0;
        double best_dist = -1.0;
        for (std::size_t p = 0; p < pool.size(); ++p) {
            TierVector v = tier_vector(scores[pool[p]].counts);
            double dist = cosine_distance(v, refs.front());
            for (std::size_t r = 1; r < refs.size(); ++r)
                dist = std::min(dist, cosine_distance(v, refs[r]));
            bool better = dist > best_dist;
            if (!better && dist == best_dist) {
                const std::size_t cur = pool[p], best = pool[best_pos];
                better = scores[cur].total() > scores[best].total() ||
                         (scores[cur].total() == scores[best].total() && cur < best);
            }
            if (better) {
                best_dist = dist;
                best_pos = p;
            }
        }
        std::size_t picked = pool[best_pos];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best_pos));
        chosen.push_back(picked);
        refs.push_back(tier_vector(scores[picked].counts));
    }
    return chosen;
}

}  // namespace detail

// Always returns posts in their input order, never more than n, never a
// duplicate. n >= |posts| returns everything untouched regardless of strategy.
inline std::vector<const RawPost*> select_posts(const std::vector<RawPost>& posts, long n,
                                                const SelectionStrategy& strategy,
                                                const WeightedLexicon& lexicon) {
    if (n < 0) throw ConfigError("selection count must be non-negative, got " + std::to_string(n));
    const std::size_t want = static_cast<std::size_t>(n);
    if (want == 0) return {};
    if (want >= posts.size()) {
        std::vector<const RawPost*> all;
        all.reserve(posts.size());
        for (const auto& p : posts) all.push_back(&p);
        return all;
    }

    switch (strategy.kind) {
        case StrategyKind::PoliticalSignal:
            return detail::in_input_order(
                posts, detail::select_political_signal(posts, want, strategy, lexicon));

        case StrategyKind::Random: {
            std::vector<std::size_t> order(posts.size());
            std::iota(order.begin(), order.end(), 0);
            SplitMix64 rng(derive_seed(strategy.seed, posts.front().author) ^
                           fnv1a64("random_selection"));
            seeded_shuffle(order, rng);
            order.resize(want);
            return detail::in_input_order(posts, std::move(order));
        }

        case StrategyKind::ControversialTopic: {
            const std::vector<std::string>& keywords =
                strategy.controversial_keywords.empty() ? default_controversial_keywords()
                                                        : strategy.controversial_keywords;
            WeightedLexicon keyword_lex = keyword_lexicon(keywords);
            if (keyword_lex.entries().empty())
                throw ConfigError("controversial keyword list is empty");
            std::vector<int> hits(posts.size());
            for (std::size_t i = 0; i < posts.size(); ++i) {
                std::string text =
                    strategy.include_quotes ? posts[i].text : masked_text(posts[i]);
                hits[i] = keyword_lex.match_text(text).total_matches;
            }
            std::vector<std::size_t> order(posts.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return hits[a] > hits[b]; });
            order.resize(want);
            return detail::in_input_order(posts, std::move(order));
        }

        case StrategyKind::RecentPost: {
            std::vector<std::size_t> order(posts.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return posts[a].seq > posts[b].seq;
            });
            order.resize(want);
            return detail::in_input_order(posts, std::move(order));
        }

        case StrategyKind::LongForm: {
            std::vector<std::size_t> lengths(posts.size());
            for (std::size_t i = 0; i < posts.size(); ++i) {
                std::string text =
                    strategy.include_quotes ? posts[i].text : masked_text(posts[i]);
                lengths[i] = whitespace_token_count(text);
            }
            std::vector<std::size_t> order(posts.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (lengths[a] != lengths[b]) return lengths[a] > lengths[b];
                return posts[a].seq > posts[b].seq;
            });
            order.resize(want);
            return detail::in_input_order(posts, std::move(order));
        }
    }
    throw ConfigError("unknown selection strategy");
}

}  // namespace stancectx
