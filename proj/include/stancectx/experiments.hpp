#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "stancectx/backend.hpp"
#include "stancectx/classify.hpp"
#include "stancectx/config.hpp"
#include "stancectx/corpus.hpp"
#include "stancectx/errors.hpp"
#include "stancectx/journal.hpp"
#include "stancectx/lexicon.hpp"
#include "stancectx/profile.hpp"
#include "stancectx/selection.hpp"

namespace stancectx {

// Runs fn over 0..count-1. With jobs > 1 the order is unspecified; the first
// exception stops new work and is rethrown after all workers drain.
template <typename Fn>
inline void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            {
                std::lock_guard<std::mutex> lock(err_mu);
                if (first_error) return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// A user's resolved manifest entry: actual posts, not ids.
struct UserSplit {
    const UserRecord* user = nullptr;
    std::vector<RawPost> profile_posts;
    std::vector<RawPost> test_posts;
};

inline std::vector<UserSplit> build_user_splits(const Corpus& corpus,
                                                const SplitManifest& manifest) {
    std::vector<UserSplit> splits;
    splits.reserve(manifest.users.size());
    for (const auto& assignment : manifest.users) {
        const UserRecord* user = corpus.find_user(assignment.username);
        if (!user)
            throw DataError("manifest user \"" + assignment.username +
                            "\" is not in the corpus");
        UserSplit split;
        split.user = user;
        split.profile_posts = posts_by_ids(*user, assignment.profile_posts);
        split.test_posts = posts_by_ids(*user, assignment.test_posts);
        splits.push_back(std::move(split));
    }
    return splits;
}

struct TestInstance {
    const UserSplit* split = nullptr;
    const RawPost* post = nullptr;
};

// Stratified draw: up to half the instances from each side, topped up from
// the larger side when one pool runs dry, seeded independently per side.
// Output is sorted by (username, seq) so iteration order is reproducible.
inline std::vector<TestInstance> select_balanced_test_set(
    const std::vector<UserSplit>& splits, long size, std::uint64_t seed) {
    std::vector<TestInstance> left, right;
    for (const auto& split : splits) {
        if (split.user->leaning == Leaning::Unknown) continue;
        auto& pool = split.user->leaning == Leaning::Left ? left : right;
        for (const auto& post : split.test_posts) pool.push_back({&split, &post});
    }
    SplitMix64 left_rng(derive_seed(seed, "test_set:left"));
    SplitMix64 right_rng(derive_seed(seed, "test_set:right"));
    seeded_shuffle(left, left_rng);
    seeded_shuffle(right, right_rng);

    const std::size_t want = static_cast<std::size_t>(size);
    std::size_t n_left = std::min(want / 2, left.size());
    std::size_t n_right = std::min(want - n_left, right.size());
    n_left = std::min(left.size(), want - n_right);

    std::vector<TestInstance> chosen;
    chosen.reserve(n_left + n_right);
    chosen.insert(chosen.end(), left.begin(), left.begin() + n_left);
    chosen.insert(chosen.end(), right.begin(), right.begin() + n_right);
    std::sort(chosen.begin(), chosen.end(), [](const TestInstance& a, const TestInstance& b) {
        if (a.split->user->username != b.split->user->username)
            return a.split->user->username < b.split->user->username;
        return a.post->seq < b.post->seq;
    });
    return chosen;
}

// Grid users: everyone with at least one post on each side of the split,
// most active first (total corpus posts), capped at user_limit.
inline std::vector<const UserSplit*> select_grid_users(const std::vector<UserSplit>& splits,
                                                       long user_limit) {
    std::vector<const UserSplit*> eligible;
    for (const auto& split : splits)
        if (!split.profile_posts.empty() && !split.test_posts.empty())
            eligible.push_back(&split);
    std::sort(eligible.begin(), eligible.end(), [](const UserSplit* a, const UserSplit* b) {
        if (a->user->posts.size() != b->user->posts.size())
            return a->user->posts.size() > b->user->posts.size();
        return a->user->username < b->user->username;
    });
    if (eligible.size() > static_cast<std::size_t>(user_limit))
        eligible.resize(static_cast<std::size_t>(user_limit));
    return eligible;
}

// ---------------------------------------------------------------------------
// Journal record plumbing

inline std::string profile_key(const std::string& exp, const std::string& generator,
                               const std::string& strategy, const std::string& n_label,
                               const std::string& username) {
    return "prof|" + exp + "|" + generator + "|" + strategy + "|" + n_label + "|" + username;
}

inline std::string classification_key(const std::string& exp, const std::string& classifier,
                                      const std::string& generator,
                                      const std::string& strategy, const std::string& n_label,
                                      const std::string& mode, const std::string& post_id) {
    return "cls|" + exp + "|" + classifier + "|" + generator + "|" + strategy + "|" +
           n_label + "|" + mode + "|" + post_id;
}

enum class ProfileStatus { Ok, Unavailable, BackendFailed };

struct ProfileStep {
    ProfileStatus status = ProfileStatus::Unavailable;
    UserProfile profile;
    std::string error;
};

struct RunContext {
    const ExperimentConfig* config = nullptr;
    const WeightedLexicon* lexicon = nullptr;
    Backend* backend = nullptr;
    JournalWriter* journal = nullptr;
    ProfileCache* cache = nullptr;
    std::string corpus_hash;
    // Records already present when resuming; the journal, not the backend, is
    // the source of truth for anything listed here.
    std::map<std::string, nlohmann::json> resumed;
};

inline void ensure_header(RunContext& ctx, const std::string& exp) {
    const std::string hash = ctx.config->config_hash();
    auto it = ctx.resumed.find("header");
    if (it != ctx.resumed.end()) {
        if (it->second.value("experiment", "") != exp)
            throw ConfigError("journal belongs to " + it->second.value("experiment", "?") +
                              ", not " + exp);
        if (it->second.value("config_hash", "") != hash)
            throw ConfigError(
                "journal was produced under a different configuration (config hash " +
                it->second.value("config_hash", "?") + ", current " + hash +
                "); use a fresh journal or restore the old settings");
        return;
    }
    if (ctx.journal->contains("header")) return;
    nlohmann::ordered_json rec;
    rec["kind"] = "header";
    rec["experiment"] = exp;
    rec["seed"] = ctx.config->seed;
    rec["config_hash"] = hash;
    ctx.journal->append("header", rec);
}

// Profile for (generator, user, strategy, n): resumed journal record if
// present, else generated (through the cache) and journaled. Backend failures
// are journaled too; a resumed run does not retry them.
inline ProfileStep ensure_profile(RunContext& ctx, const std::string& exp,
                                  const ModelSpec& generator, const UserSplit& split,
                                  const SelectionStrategy& strategy, long n_posts) {
    const std::string strategy_label = strategy_name(strategy.kind);
    const std::string n_label = ProfileCache::count_label(n_posts);
    const std::string& username = split.user->username;
    const std::string key =
        profile_key(exp, generator.model_name, strategy_label, n_label, username);

    auto it = ctx.resumed.find(key);
    if (it != ctx.resumed.end()) {
        ProfileStep step;
        const std::string status = it->second.value("status", "");
        if (status == "ok") {
            auto parsed = parse_profile_response(it->second.at("profile").dump());
            if (parsed.status != ProfileParseStatus::Ok)
                throw DataError("journal profile record for \"" + username +
                                "\" is not a valid profile");
            step.status = ProfileStatus::Ok;
            step.profile = parsed.profile;
        } else if (status == "unavailable") {
            step.status = ProfileStatus::Unavailable;
            step.error = it->second.value("error", "");
        } else {
            step.status = ProfileStatus::BackendFailed;
            step.error = it->second.value("error", "");
        }
        return step;
    }

    ProfileStep step;
    try {
        ProfileOutcome outcome =
            generate_profile(username, split.profile_posts, strategy, n_posts, generator,
                             *ctx.backend, *ctx.lexicon, ctx.cache, ctx.corpus_hash);
        step.status = outcome.available ? ProfileStatus::Ok : ProfileStatus::Unavailable;
        step.profile = outcome.profile;
        step.error = outcome.error;
    } catch (const CassetteMiss&) {
        throw;
    } catch (const BackendFailure& e) {
        step.status = ProfileStatus::BackendFailed;
        step.error = e.what();
    }

    nlohmann::ordered_json rec;
    rec["kind"] = "profile";
    rec["experiment"] = exp;
    rec["generator"] = generator.model_name;
    rec["username"] = username;
    rec["strategy"] = strategy_label;
    rec["n_posts"] = n_label;
    switch (step.status) {
        case ProfileStatus::Ok: rec["status"] = "ok"; break;
        case ProfileStatus::Unavailable: rec["status"] = "unavailable"; break;
        case ProfileStatus::BackendFailed: rec["status"] = "backend_failure"; break;
    }
    if (step.status == ProfileStatus::Ok) {
        rec["profile"] = step.profile.to_json();
        rec["profile_sha256"] = Sha256::hex_digest(step.profile.canonical_json());
    } else {
        rec["profile"] = nullptr;
        rec["profile_sha256"] = "";
    }
    rec["error"] = step.error;
    ctx.journal->append(key, rec);
    return step;
}

// One classification instance, journal-guarded. step == nullptr means a plain
// baseline instance; otherwise the requested mode is context, with fallback
// to a baseline prompt when the profile is unavailable.
inline void run_instance(RunContext& ctx, const std::string& exp, const ModelSpec& classifier,
                         const std::string& generator_name, const std::string& strategy_label,
                         const std::string& n_label, const UserSplit& split,
                         const RawPost& post, const ProfileStep* step) {
    const std::string requested_mode = step ? "context" : "baseline";
    const std::string key =
        classification_key(exp, classifier.model_name, generator_name, strategy_label,
                           n_label, requested_mode, post.post_id);
    if (ctx.journal->contains(key)) return;

    const Leaning gold = split.user->leaning;
    ClassificationResult result;
    if (step && step->status == ProfileStatus::BackendFailed) {
        result.post_id = post.post_id;
        result.gold = gold;
        result.mode = ClassifyMode::Context;
        result.classifier_model = classifier.model_name;
        result.profile_model = generator_name;
        result.outcome = Outcome::BackendFailure;
        result.error = "profile generation failed: " + step->error;
    } else if (step && step->status == ProfileStatus::Unavailable) {
        result = classify_post(post, gold, nullptr, "", classifier, *ctx.backend);
        result.profile_model = generator_name;
        result.profile_fallback = true;
    } else {
        result = classify_post(post, gold, step ? &step->profile : nullptr, generator_name,
                               classifier, *ctx.backend);
    }

    nlohmann::ordered_json rec;
    rec["kind"] = "classification";
    rec["experiment"] = exp;
    rec["classifier"] = classifier.model_name;
    rec["generator"] = generator_name;
    rec["mode"] = mode_name(result.mode);
    rec["strategy"] = strategy_label;
    rec["n_posts"] = n_label;
    rec["username"] = split.user->username;
    rec["post_id"] = post.post_id;
    rec["gold"] = leaning_upper(result.gold);
    rec["predicted"] = leaning_upper(result.predicted);
    rec["outcome"] = outcome_name(result.outcome);
    rec["explanation"] = result.explanation;
    rec["raw_response"] = result.raw_response;
    rec["fallback"] = result.profile_fallback;
    rec["error"] = result.error;
    ctx.journal->append(key, rec);
}

namespace detail {

// Distinct users of a test set, in the set's (sorted) order.
inline std::vector<const UserSplit*> test_set_users(const std::vector<TestInstance>& test) {
    std::vector<const UserSplit*> users;
    for (const auto& instance : test)
        if (users.empty() || users.back() != instance.split) users.push_back(instance.split);
    return users;
}

inline std::map<std::string, ProfileStep> profile_phase(
    RunContext& ctx, const std::string& exp, const ModelSpec& generator,
    const std::vector<const UserSplit*>& users, const SelectionStrategy& strategy,
    long n_posts) {
    std::map<std::string, ProfileStep> steps;
    std::mutex mu;
    parallel_for(users.size(), ctx.config->jobs, [&](std::size_t i) {
        ProfileStep step = ensure_profile(ctx, exp, generator, *users[i], strategy, n_posts);
        std::lock_guard<std::mutex> lock(mu);
        steps[users[i]->user->username] = std::move(step);
    });
    return steps;
}

inline void run_enrichment(RunContext& ctx, const std::vector<UserSplit>& splits) {
    const ExperimentConfig& config = *ctx.config;
    const std::string exp = "exp1";
    auto test = select_balanced_test_set(splits, config.test_set_size, config.seed);
    if (test.empty()) throw DataError("no test posts available for the test set");

    SelectionStrategy strategy = config.strategy_for(config.strategies.front());
    const long n_posts = config.post_counts.front();
    const std::string strategy_label = strategy_name(strategy.kind);
    const std::string n_label = ProfileCache::count_label(n_posts);

    for (const auto& model : config.models)
        parallel_for(test.size(), config.jobs, [&](std::size_t i) {
            run_instance(ctx, exp, model, "", strategy_label, n_label, *test[i].split,
                         *test[i].post, nullptr);
        });

    const ModelSpec& generator = config.profile_model();
    auto users = test_set_users(test);
    auto steps = profile_phase(ctx, exp, generator, users, strategy, n_posts);

    for (const auto& model : config.models)
        parallel_for(test.size(), config.jobs, [&](std::size_t i) {
            const ProfileStep& step = steps.at(test[i].split->user->username);
            run_instance(ctx, exp, model, generator.model_name, strategy_label, n_label,
                         *test[i].split, *test[i].post, &step);
        });
}

inline void run_grid(RunContext& ctx, const std::vector<UserSplit>& splits) {
    const ExperimentConfig& config = *ctx.config;
    const std::string exp = "exp2";
    if (config.models.size() != 1)
        throw ConfigError("the grid experiment uses exactly one model, got " +
                          std::to_string(config.models.size()));
    const ModelSpec& model = config.models.front();

    auto users = select_grid_users(splits, config.user_limit);
    if (users.empty()) throw DataError("no users eligible for the grid experiment");

    for (long n_posts : config.post_counts) {
        for (StrategyKind kind : config.strategies) {
            SelectionStrategy strategy = config.strategy_for(kind);
            const std::string strategy_label = strategy_name(kind);
            const std::string n_label = ProfileCache::count_label(n_posts);
            parallel_for(users.size(), config.jobs, [&](std::size_t i) {
                const UserSplit& split = *users[i];
                ProfileStep step =
                    ensure_profile(ctx, exp, model, split, strategy, n_posts);
                std::size_t limit =
                    std::min<std::size_t>(split.test_posts.size(),
                                          static_cast<std::size_t>(config.test_post_limit));
                for (std::size_t p = 0; p < limit; ++p)
                    run_instance(ctx, exp, model, model.model_name, strategy_label, n_label,
                                 split, split.test_posts[p], &step);
            });
        }
    }
}

inline void run_cross_model(RunContext& ctx, const std::vector<UserSplit>& splits) {
    const ExperimentConfig& config = *ctx.config;
    const std::string exp = "exp3";
    auto test = select_balanced_test_set(splits, config.test_set_size, config.seed);
    if (test.empty()) throw DataError("no test posts available for the test set");

    SelectionStrategy strategy = config.strategy_for(config.strategies.front());
    const long n_posts = config.post_counts.front();
    const std::string strategy_label = strategy_name(strategy.kind);
    const std::string n_label = ProfileCache::count_label(n_posts);
    auto users = test_set_users(test);

    for (const auto& generator : config.models) {
        auto steps = profile_phase(ctx, exp, generator, users, strategy, n_posts);
        for (const auto& classifier : config.models)
            parallel_for(test.size(), config.jobs, [&](std::size_t i) {
                const ProfileStep& step = steps.at(test[i].split->user->username);
                run_instance(ctx, exp, classifier, generator.model_name, strategy_label,
                             n_label, *test[i].split, *test[i].post, &step);
            });
    }
}

}  // namespace detail

struct ExperimentRun {
    const Corpus* corpus = nullptr;  // filtered to known leanings
    const SplitManifest* manifest = nullptr;
    ExperimentConfig config;
    Backend* backend = nullptr;
    std::filesystem::path journal_path;
    bool resume = false;
    ProfileCache* cache = nullptr;
};

inline void run_experiment(const ExperimentRun& run) {
    run.config.validate();
    const std::string corpus_hash = corpus_sha256(*run.corpus);
    if (run.manifest->corpus_hash != corpus_hash)
        throw DataError(
            "split manifest does not match this corpus (hash mismatch); re-run the split");

    WeightedLexicon lexicon = run.config.lexicon_file.empty()
                                  ? default_lexicon()
                                  : load_lexicon(run.config.lexicon_file);
    auto splits = build_user_splits(*run.corpus, *run.manifest);

    RunContext ctx;
    ctx.config = &run.config;
    ctx.lexicon = &lexicon;
    ctx.backend = run.backend;
    ctx.cache = run.cache;
    ctx.corpus_hash = corpus_hash;
    if (run.resume)
        for (auto& rec : read_journal(run.journal_path))
            ctx.resumed.emplace(rec.key, std::move(rec.data));

    JournalWriter journal(run.journal_path, run.resume);
    ctx.journal = &journal;
    ensure_header(ctx, experiment_name(run.config.experiment));

    switch (run.config.experiment) {
        case Experiment::Enrichment: detail::run_enrichment(ctx, splits); break;
        case Experiment::Grid: detail::run_grid(ctx, splits); break;
        case Experiment::CrossModel: detail::run_cross_model(ctx, splits); break;
    }
    journal.flush();
}

}  // namespace stancectx
