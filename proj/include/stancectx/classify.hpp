#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "stancectx/backend.hpp"
#include "stancectx/corpus.hpp"
#include "stancectx/errors.hpp"
#include "stancectx/profile.hpp"
#include "stancectx/prompts.hpp"

namespace stancectx {

enum class ClassifyMode { Baseline, Context };

inline std::string mode_name(ClassifyMode mode) {
    return mode == ClassifyMode::Baseline ? "baseline" : "context";
}

enum class Outcome { Correct, Incorrect, ParseFailure, BackendFailure };

inline std::string outcome_name(Outcome outcome) {
    switch (outcome) {
        case Outcome::Correct: return "correct";
        case Outcome::Incorrect: return "incorrect";
        case Outcome::ParseFailure: return "parse_failure";
        default: return "backend_failure";
    }
}

inline std::optional<Outcome> parse_outcome(std::string_view s) {
    std::string v = to_lower(trim(s));
    if (v == "correct") return Outcome::Correct;
    if (v == "incorrect") return Outcome::Incorrect;
    if (v == "parse_failure") return Outcome::ParseFailure;
    if (v == "backend_failure") return Outcome::BackendFailure;
    return std::nullopt;
}

struct ClassificationParse {
    bool ok = false;
    Leaning orientation = Leaning::Unknown;
    std::string explanation;
};

// Same JSON-extraction tolerance as profile parsing; the orientation value is
// case-normalized, and anything outside LEFT/RIGHT/UNKNOWN is a parse failure.
inline ClassificationParse parse_classification(const std::string& raw) {
    ClassificationParse result;
    auto j = extract_first_json_object(raw);
    if (!j) return result;
    if (!j->contains("orientation") || !(*j)["orientation"].is_string()) return result;
    auto orientation = parse_leaning((*j)["orientation"].get<std::string>());
    if (!orientation) return result;
    result.ok = true;
    result.orientation = *orientation;
    if (j->contains("explanation") && (*j)["explanation"].is_string())
        result.explanation = (*j)["explanation"].get<std::string>();
    return result;
}

inline std::string build_context_prompt(const RawPost& post, const UserProfile& profile) {
    auto bad = validate_profile(profile);
    if (!bad.empty()) {
        std::string fields;
        for (std::size_t i = 0; i < bad.size(); ++i) {
            if (i) fields += ", ";
            fields += bad[i];
        }
        throw DataError("profile for \"" + profile.username +
                        "\" fails validation in field(s): " + fields);
    }
    return build_context_prompt_json(post, profile.canonical_json());
}

struct ClassificationResult {
    std::string post_id;
    Leaning gold = Leaning::Unknown;
    Leaning predicted = Leaning::Unknown;
    std::string explanation;
    ClassifyMode mode = ClassifyMode::Baseline;
    std::string classifier_model;
    std::string profile_model;  // empty in baseline mode
    std::string raw_response;
    Outcome outcome = Outcome::Incorrect;
    bool profile_fallback = false;  // context instance ran baseline: profile unavailable
    std::string error;
};

// Baseline when profile is null, context otherwise. A backend failure is
// captured in the result rather than thrown so one dead cell cannot take
// down a whole condition.
inline ClassificationResult classify_post(const RawPost& post, Leaning gold,
                                          const UserProfile* profile,
                                          const std::string& profile_model,
                                          const ModelSpec& classifier, Backend& backend) {
    ClassificationResult result;
    result.post_id = post.post_id;
    result.gold = gold;
    result.mode = profile ? ClassifyMode::Context : ClassifyMode::Baseline;
    result.classifier_model = classifier.model_name;
    result.profile_model = profile ? profile_model : "";

    const std::string prompt =
        profile ? build_context_prompt(post, *profile) : build_baseline_prompt(post);

    CompletionExchange ex;
    try {
        ex = backend.complete(classifier, prompt);
    } catch (const CassetteMiss&) {
        throw;  // an incomplete cassette set is operator error, not a dead cell
    } catch (const BackendFailure& e) {
        result.outcome = Outcome::BackendFailure;
        // Name the model here: journals aggregate errors across model pairs.
        result.error = classifier.model_name + ": " + e.what();
        return result;
    }
    result.raw_response = ex.response;

    ClassificationParse parsed = parse_classification(ex.response);
    if (!parsed.ok) {
        result.outcome = Outcome::ParseFailure;
        return result;
    }
    result.predicted = parsed.orientation;
    result.explanation = parsed.explanation;
    result.outcome = parsed.orientation == gold ? Outcome::Correct : Outcome::Incorrect;
    return result;
}

}  // namespace stancectx
