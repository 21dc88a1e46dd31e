#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stancectx/backend.hpp"
#include "stancectx/errors.hpp"
#include "stancectx/fsutil.hpp"
#include "stancectx/hashing.hpp"
#include "stancectx/selection.hpp"
#include "stancectx/text.hpp"

namespace stancectx {

enum class Experiment { Enrichment, Grid, CrossModel };

inline std::string experiment_name(Experiment e) {
    switch (e) {
        case Experiment::Enrichment: return "exp1";
        case Experiment::Grid: return "exp2";
        default: return "exp3";
    }
}

inline std::optional<Experiment> parse_experiment(std::string_view s) {
    std::string v = to_lower(trim(s));
    if (v == "exp1" || v == "enrichment") return Experiment::Enrichment;
    if (v == "exp2" || v == "grid") return Experiment::Grid;
    if (v == "exp3" || v == "cross_model") return Experiment::CrossModel;
    return std::nullopt;
}

// Full effective settings for one experiment run. The config hash covers
// everything that can change results (including the content of any lexicon or
// keyword file), and deliberately not jobs, which only reorders journal lines.
struct ExperimentConfig {
    Experiment experiment = Experiment::Enrichment;
    std::vector<ModelSpec> models;
    std::string profile_model_name;  // enrichment generator; defaults to models[0]
    std::vector<StrategyKind> strategies;
    std::vector<long> post_counts;  // -1 means all profile posts
    long user_limit = 50;
    long test_post_limit = 5;
    long test_set_size = 200;
    std::uint64_t seed = 42;
    double noise_range = 0.01;
    bool include_quotes = false;
    std::string lexicon_file;
    std::string keyword_file;
    std::string lexicon_content_hash;  // sha256 of lexicon_file when set
    std::string keyword_content_hash;
    int jobs = 1;

    static ExperimentConfig defaults_for(Experiment experiment) {
        ExperimentConfig c;
        c.experiment = experiment;
        switch (experiment) {
            case Experiment::Enrichment:
                c.strategies = {StrategyKind::PoliticalSignal};
                c.post_counts = {-1};
                break;
            case Experiment::Grid:
                c.strategies.assign(kAllStrategies.begin(), kAllStrategies.end());
                c.post_counts = {1, 2, 3, 5, 10, 20, 30, 50};
                break;
            case Experiment::CrossModel:
                c.strategies = {StrategyKind::PoliticalSignal};
                c.post_counts = {50};
                break;
        }
        return c;
    }

    const ModelSpec& profile_model() const {
        if (models.empty()) throw ConfigError("no models configured");
        if (profile_model_name.empty()) return models.front();
        for (const auto& m : models)
            if (m.model_name == profile_model_name) return m;
        throw ConfigError("profile_model \"" + profile_model_name +
                          "\" is not in the configured model list");
    }

    SelectionStrategy strategy_for(StrategyKind kind) const {
        SelectionStrategy s;
        s.kind = kind;
        s.seed = seed;
        s.include_quotes = include_quotes;
        s.noise_range = noise_range;
        if (!keyword_file.empty()) s.controversial_keywords = load_keyword_file(keyword_file);
        return s;
    }

    void validate() const {
        if (models.empty()) throw ConfigError("no models configured");
        if (strategies.empty()) throw ConfigError("no strategies configured");
        if (post_counts.empty()) throw ConfigError("no post counts configured");
        for (long n : post_counts)
            if (n == 0 || n < -1)
                throw ConfigError("post count must be positive or -1 (all), got " +
                                  std::to_string(n));
        if (user_limit < 1) throw ConfigError("user_limit must be at least 1");
        if (test_post_limit < 1) throw ConfigError("test_post_limit must be at least 1");
        if (test_set_size < 1) throw ConfigError("test_set_size must be at least 1");
        if (noise_range < 0) throw ConfigError("noise_range must be non-negative");
        if (jobs < 1) throw ConfigError("jobs must be at least 1");
        for (const auto& m : models) {
            if (m.model_name.empty()) throw ConfigError("model with empty name");
            if (m.temperature < 0)
                throw ConfigError("temperature must be non-negative for " + m.model_name);
        }
    }

    // Stable text form of everything result-affecting; its hash ties a
    // journal to the settings that produced it.
    std::string canonical_text() const {
        std::ostringstream out;
        out << "experiment=" << experiment_name(experiment) << "\n";
        out << "seed=" << seed << "\n";
        out << "test_set_size=" << test_set_size << "\n";
        out << "user_limit=" << user_limit << "\n";
        out << "test_post_limit=" << test_post_limit << "\n";
        char noise[32];
        std::snprintf(noise, sizeof noise, "%.17g", noise_range);
        out << "noise_range=" << noise << "\n";
        out << "include_quotes=" << (include_quotes ? "true" : "false") << "\n";
        out << "profile_model=" << profile_model_name << "\n";
        out << "post_counts=";
        for (std::size_t i = 0; i < post_counts.size(); ++i)
            out << (i ? " " : "") << post_counts[i];
        out << "\n";
        out << "strategies=";
        for (std::size_t i = 0; i < strategies.size(); ++i)
            out << (i ? " " : "") << strategy_name(strategies[i]);
        out << "\n";
        out << "lexicon_sha256=" << lexicon_content_hash << "\n";
        out << "keywords_sha256=" << keyword_content_hash << "\n";
        for (const auto& m : models) {
            char temp[32];
            std::snprintf(temp, sizeof temp, "%.17g", m.temperature);
            out << "model=" << m.provider << ":" << m.model_name << " temperature=" << temp
                << " max_tokens=" << m.max_tokens << "\n";
        }
        return out.str();
    }

    std::string config_hash() const { return Sha256::hex_digest(canonical_text()); }
};

namespace detail {

inline bool parse_bool(const std::string& value, const std::string& key) {
    std::string v = to_lower(trim(value));
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("config key \"" + key + "\" expects a boolean, got \"" + value + "\"");
}

inline long parse_long(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        long v = std::stol(trim_string(value), &pos);
        if (pos != trim_string(value).size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key \"" + key + "\" expects an integer, got \"" + value +
                          "\"");
    }
}

inline double parse_double(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        double v = std::stod(trim_string(value), &pos);
        if (pos != trim_string(value).size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key \"" + key + "\" expects a number, got \"" + value +
                          "\"");
    }
}

inline std::vector<std::string> split_words(const std::string& value) {
    std::vector<std::string> words;
    std::istringstream in(value);
    std::string word;
    while (in >> word) words.push_back(word);
    return words;
}

}  // namespace detail

// Plain-text key/value file with repeated [model] tables:
//
//   seed = 42
//   post_counts = 1 2 3 5
//   strategies = political_signal random
//
//   [model]
//   provider = openai
//   name = gpt-4o
//
// '#' starts a comment. Unknown keys and sections are errors. The experiment
// key is optional; when present it must match the subcommand being run.
inline ExperimentConfig load_config(const std::filesystem::path& path,
                                    Experiment experiment) {
    ExperimentConfig config = ExperimentConfig::defaults_for(experiment);
    std::istringstream in(read_file(path));

    std::string line;
    long line_no = 0;
    bool in_model = false;
    ModelSpec current_model;
    bool model_has_name = false;

    auto flush_model = [&]() {
        if (!in_model) return;
        if (!model_has_name)
            throw ConfigError(path.string() + ": [model] section without a name key");
        if (current_model.provider.empty()) current_model.provider = "custom";
        config.models.push_back(current_model);
        current_model = ModelSpec{};
        model_has_name = false;
        in_model = false;
    };

    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string content = trim_string(line);
        if (content.empty()) continue;
        auto where = [&] { return path.string() + " line " + std::to_string(line_no); };

        if (content.front() == '[') {
            if (content.back() != ']')
                throw ConfigError(where() + ": malformed section header " + content);
            std::string section = to_lower(trim(content.substr(1, content.size() - 2)));
            flush_model();
            if (section == "model")
                in_model = true;
            else
                throw ConfigError(where() + ": unknown section [" + section + "]");
            continue;
        }

        auto eq = content.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where() + ": expected key = value, got \"" + content + "\"");
        std::string key = to_lower(trim(std::string_view(content).substr(0, eq)));
        std::string value = trim_string(content.substr(eq + 1));

        if (in_model) {
            if (key == "provider")
                current_model.provider = to_lower(trim(value));
            else if (key == "name") {
                current_model.model_name = value;
                model_has_name = true;
            } else if (key == "temperature")
                current_model.temperature = detail::parse_double(value, key);
            else if (key == "max_tokens")
                current_model.max_tokens = static_cast<int>(detail::parse_long(value, key));
            else if (key == "timeout_seconds")
                current_model.request_timeout =
                    std::chrono::seconds(detail::parse_long(value, key));
            else
                throw ConfigError(where() + ": unknown [model] key \"" + key + "\"");
            continue;
        }

        if (key == "experiment") {
            auto parsed = parse_experiment(value);
            if (!parsed) throw ConfigError(where() + ": unknown experiment \"" + value + "\"");
            if (*parsed != experiment)
                throw ConfigError(path.string() + " is for " +
                                  experiment_name(*parsed) + " but the " +
                                  experiment_name(experiment) + " subcommand was invoked");
        } else if (key == "seed") {
            config.seed = static_cast<std::uint64_t>(detail::parse_long(value, key));
        } else if (key == "test_set_size") {
            config.test_set_size = detail::parse_long(value, key);
        } else if (key == "user_limit") {
            config.user_limit = detail::parse_long(value, key);
        } else if (key == "test_post_limit") {
            config.test_post_limit = detail::parse_long(value, key);
        } else if (key == "noise_range") {
            config.noise_range = detail::parse_double(value, key);
        } else if (key == "include_quotes") {
            config.include_quotes = detail::parse_bool(value, key);
        } else if (key == "profile_model") {
            config.profile_model_name = value;
        } else if (key == "jobs") {
            config.jobs = static_cast<int>(detail::parse_long(value, key));
        } else if (key == "lexicon_file") {
            config.lexicon_file = value;
        } else if (key == "keyword_file") {
            config.keyword_file = value;
        } else if (key == "post_counts") {
            config.post_counts.clear();
            for (const auto& word : detail::split_words(value))
                config.post_counts.push_back(word == "all"
                                                 ? -1
                                                 : detail::parse_long(word, key));
            if (config.post_counts.empty())
                throw ConfigError(where() + ": post_counts is empty");
        } else if (key == "strategies") {
            config.strategies.clear();
            for (const auto& word : detail::split_words(value)) {
                auto kind = parse_strategy(word);
                if (!kind)
                    throw ConfigError(where() + ": unknown strategy \"" + word + "\"");
                config.strategies.push_back(*kind);
            }
            if (config.strategies.empty())
                throw ConfigError(where() + ": strategies is empty");
        } else {
            throw ConfigError(where() + ": unknown key \"" + key + "\"");
        }
    }
    flush_model();

    if (!config.lexicon_file.empty())
        config.lexicon_content_hash = Sha256::hex_digest(read_file(config.lexicon_file));
    if (!config.keyword_file.empty())
        config.keyword_content_hash = Sha256::hex_digest(read_file(config.keyword_file));
    return config;
}

}  // namespace stancectx
