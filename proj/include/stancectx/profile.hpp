#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stancectx/backend.hpp"
#include "stancectx/corpus.hpp"
#include "stancectx/errors.hpp"
#include "stancectx/fsutil.hpp"
#include "stancectx/lexicon.hpp"
#include "stancectx/prompts.hpp"
#include "stancectx/selection.hpp"

namespace stancectx {

enum class Confidence { High, Medium, Low };

inline std::string confidence_name(Confidence c) {
    switch (c) {
        case Confidence::High: return "high";
        case Confidence::Medium: return "medium";
        default: return "low";
    }
}

inline std::optional<Confidence> parse_confidence(std::string_view s) {
    std::string v = to_lower(trim(s));
    if (v == "high") return Confidence::High;
    if (v == "medium") return Confidence::Medium;
    if (v == "low") return Confidence::Low;
    return std::nullopt;
}

struct UserProfile {
    std::string username;
    Leaning political_leaning = Leaning::Unknown;
    Confidence confidence = Confidence::Low;
    std::vector<std::string> key_indicators;
    std::vector<std::string> recurring_topics;
    std::string language_style;
    std::string sentiment_patterns;
    std::string context_notes;

    // Fixed key order; this exact serialization is embedded in context
    // prompts and hashed for cross-classifier reuse checks.
    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["username"] = username;
        j["political_leaning"] = leaning_lower(political_leaning);
        j["confidence"] = confidence_name(confidence);
        j["key_indicators"] = key_indicators;
        j["recurring_topics"] = recurring_topics;
        j["language_style"] = language_style;
        j["sentiment_patterns"] = sentiment_patterns;
        j["context_notes"] = context_notes;
        return j;
    }

    std::string canonical_json() const { return to_json().dump(2); }
};

// key_indicators must hold 3-5 entries once a leaning is declared; an
// unknown-leaning profile may hold 0-5.
inline std::vector<std::string> validate_profile(const UserProfile& profile) {
    std::vector<std::string> bad;
    if (profile.key_indicators.size() > 5 ||
        (profile.political_leaning != Leaning::Unknown && profile.key_indicators.size() < 3))
        bad.push_back("key_indicators");
    return bad;
}

enum class ProfileParseStatus { Ok, NoJson, SchemaViolation };

struct ProfileParseResult {
    ProfileParseStatus status = ProfileParseStatus::NoJson;
    UserProfile profile;
    std::vector<std::string> bad_fields;
    std::string raw;
};

// First syntactically valid JSON object anywhere in the text; tolerates code
// fences, prose, and trailing junk.
inline std::optional<nlohmann::json> extract_first_json_object(std::string_view raw) {
    for (std::size_t start = raw.find('{'); start != std::string_view::npos;
         start = raw.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) {
                    auto candidate = raw.substr(start, i - start + 1);
                    nlohmann::json parsed =
                        nlohmann::json::parse(candidate, nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

inline ProfileParseResult parse_profile_response(const std::string& raw) {
    ProfileParseResult result;
    result.raw = raw;
    auto j = extract_first_json_object(raw);
    if (!j) {
        result.status = ProfileParseStatus::NoJson;
        return result;
    }

    auto& bad = result.bad_fields;
    UserProfile& p = result.profile;

    auto read_string = [&](const char* field, std::string& out, bool null_ok) {
        if (!j->contains(field) || (*j)[field].is_null()) {
            if (!null_ok) bad.push_back(field);
            return;
        }
        if (!(*j)[field].is_string()) {
            bad.push_back(field);
            return;
        }
        out = (*j)[field].get<std::string>();
    };

    auto read_string_list = [&](const char* field, std::vector<std::string>& out) {
        if (!j->contains(field) || (*j)[field].is_null()) return true;  // treated as empty
        if (!(*j)[field].is_array()) {
            bad.push_back(field);
            return false;
        }
        for (const auto& item : (*j)[field]) {
            if (!item.is_string()) {
                bad.push_back(field);
                return false;
            }
            out.push_back(item.get<std::string>());
        }
        return true;
    };

    read_string("username", p.username, true);

    if (!j->contains("political_leaning") || !(*j)["political_leaning"].is_string()) {
        bad.push_back("political_leaning");
    } else if (auto leaning =
                   parse_leaning((*j)["political_leaning"].get<std::string>())) {
        p.political_leaning = *leaning;
    } else {
        bad.push_back("political_leaning");
    }

    if (!j->contains("confidence") || !(*j)["confidence"].is_string()) {
        bad.push_back("confidence");
    } else if (auto confidence = parse_confidence((*j)["confidence"].get<std::string>())) {
        p.confidence = *confidence;
    } else {
        bad.push_back("confidence");
    }

    bool indicators_ok = read_string_list("key_indicators", p.key_indicators);
    read_string_list("recurring_topics", p.recurring_topics);
    read_string("language_style", p.language_style, true);
    read_string("sentiment_patterns", p.sentiment_patterns, true);
    read_string("context_notes", p.context_notes, true);

    if (indicators_ok &&
        std::find(bad.begin(), bad.end(), "political_leaning") == bad.end()) {
        for (const auto& field : validate_profile(p))
            if (std::find(bad.begin(), bad.end(), field) == bad.end()) bad.push_back(field);
    }

    result.status = bad.empty() ? ProfileParseStatus::Ok : ProfileParseStatus::SchemaViolation;
    return result;
}

// ---------------------------------------------------------------------------
// On-disk cache

// Layout: <root>/<model>/<strategy>/<n|all>/<username>.json. A parse failure
// is cached as status "unavailable" so reruns do not re-ask; backend failures
// are never cached.
class ProfileCache {
public:
    explicit ProfileCache(std::filesystem::path root) : root_(std::move(root)) {}

    struct Entry {
        bool ok = false;
        UserProfile profile;
        std::string error;
    };

    static std::string count_label(long n_posts) {
        return n_posts < 0 ? "all" : std::to_string(n_posts);
    }

    std::filesystem::path entry_path(const std::string& model, const std::string& strategy,
                                     long n_posts, const std::string& username) const {
        return root_ / sanitize_path_component(model) / sanitize_path_component(strategy) /
               sanitize_path_component(count_label(n_posts)) /
               (sanitize_path_component(username) + ".json");
    }

    std::optional<Entry> lookup(const std::string& model, const std::string& strategy,
                                long n_posts, const std::string& username,
                                const std::string& corpus_hash, std::uint64_t seed) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto path = entry_path(model, strategy, n_posts, username);
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) return std::nullopt;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
            if (j.at("corpus_hash").get<std::string>() != corpus_hash) return std::nullopt;
            if (j.at("seed").get<std::uint64_t>() != seed) return std::nullopt;
            Entry entry;
            std::string status = j.at("status").get<std::string>();
            if (status == "ok") {
                auto parsed = parse_profile_response(j.at("profile").dump());
                if (parsed.status != ProfileParseStatus::Ok) return std::nullopt;
                entry.ok = true;
                entry.profile = parsed.profile;
            } else if (status == "unavailable") {
                entry.ok = false;
                entry.error = j.value("error", "");
            } else {
                return std::nullopt;
            }
            return entry;
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;  // corrupt entries are regenerated, not fatal
        } catch (const IoError&) {
            return std::nullopt;
        }
    }

    void store(const std::string& model, const std::string& strategy, long n_posts,
               const std::string& username, const std::string& corpus_hash,
               std::uint64_t seed, const Entry& entry) {
        std::lock_guard<std::mutex> lock(mu_);
        nlohmann::ordered_json j;
        j["model"] = model;
        j["strategy"] = strategy;
        j["n_posts"] = count_label(n_posts);
        j["username"] = username;
        j["corpus_hash"] = corpus_hash;
        j["seed"] = seed;
        if (entry.ok) {
            j["status"] = "ok";
            j["profile"] = entry.profile.to_json();
        } else {
            j["status"] = "unavailable";
            j["error"] = entry.error;
        }
        write_file_atomic(entry_path(model, strategy, n_posts, username), j.dump(2) + "\n");
    }

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Generation

struct ProfileOutcome {
    bool available = false;
    UserProfile profile;
    std::string error;
    bool from_cache = false;
    int backend_calls = 0;
};

// n_posts < 0 means "all profile-set posts". One re-ask on a parse failure;
// two failures cache and return unavailable. Backend failures propagate and
// leave no cache entry.
inline ProfileOutcome generate_profile(const std::string& username,
                                       const std::vector<RawPost>& profile_posts,
                                       const SelectionStrategy& strategy, long n_posts,
                                       const ModelSpec& spec, Backend& backend,
                                       const WeightedLexicon& lexicon,
                                       ProfileCache* cache, const std::string& corpus_hash) {
    if (profile_posts.empty())
        throw UsageError("user \"" + username + "\" has no profile posts");

    const std::string strategy_label = strategy_name(strategy.kind);
    if (cache) {
        if (auto hit = cache->lookup(spec.model_name, strategy_label, n_posts, username,
                                     corpus_hash, strategy.seed)) {
            ProfileOutcome out;
            out.available = hit->ok;
            out.profile = hit->profile;
            out.error = hit->error;
            out.from_cache = true;
            return out;
        }
    }

    std::vector<const RawPost*> selected;
    if (n_posts < 0) {
        selected.reserve(profile_posts.size());
        for (const auto& p : profile_posts) selected.push_back(&p);
    } else {
        selected = select_posts(profile_posts, n_posts, strategy, lexicon);
    }

    const std::string prompt = build_profile_prompt(selected);
    ProfileOutcome out;

    auto try_once = [&](const std::string& p) -> std::optional<ProfileParseResult> {
        CompletionExchange ex = backend.complete(spec, p);
        ++out.backend_calls;
        return parse_profile_response(ex.response);
    };

    auto describe = [](const ProfileParseResult& r) {
        if (r.status == ProfileParseStatus::NoJson) return std::string("no JSON object found");
        std::string s = "schema violation in field(s): ";
        for (std::size_t i = 0; i < r.bad_fields.size(); ++i) {
            if (i) s += ", ";
            s += r.bad_fields[i];
        }
        return s;
    };

    auto first = try_once(prompt);
    ProfileParseResult parsed = *first;
    if (parsed.status != ProfileParseStatus::Ok) {
        auto second = try_once(prompt + kReaskSuffix);
        if (second->status == ProfileParseStatus::Ok) {
            parsed = *second;
        } else {
            out.available = false;
            out.error = "profile unavailable after re-ask: " + describe(*first) +
                        "; then: " + describe(*second);
            if (cache)
                cache->store(spec.model_name, strategy_label, n_posts, username, corpus_hash,
                             strategy.seed, ProfileCache::Entry{false, {}, out.error});
            return out;
        }
    }

    parsed.profile.username = username;
    out.available = true;
    out.profile = parsed.profile;
    if (cache)
        cache->store(spec.model_name, strategy_label, n_posts, username, corpus_hash,
                     strategy.seed, ProfileCache::Entry{true, out.profile, ""});
    return out;
}

}  // namespace stancectx
