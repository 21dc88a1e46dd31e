#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stancectx/backend.hpp"
#include "stancectx/classify.hpp"
#include "stancectx/config.hpp"
#include "stancectx/corpus.hpp"
#include "stancectx/errors.hpp"
#include "stancectx/experiments.hpp"
#include "stancectx/http_backend.hpp"
#include "stancectx/journal.hpp"
#include "stancectx/lexicon.hpp"
#include "stancectx/mock_llm.hpp"
#include "stancectx/profile.hpp"
#include "stancectx/reports.hpp"
#include "stancectx/selection.hpp"

namespace {

using namespace stancectx;

int exit_code_for(const Error& e) {
    if (e.category() == "usage" || e.category() == "data") return 2;
    if (e.category() == "config") return 3;
    if (e.category() == "backend") return 4;
    return 1;  // io
}

// Owns whichever backends the chosen mode needs; get() is the one to call.
struct BackendBundle {
    std::shared_ptr<RateLimiter> limiter;
    std::unique_ptr<Backend> inner;
    std::unique_ptr<Backend> outer;

    Backend* get() { return outer ? outer.get() : inner.get(); }
};

BackendBundle make_backend(const std::string& kind, const std::string& cassettes,
                           const std::string& record_inner,
                           const std::vector<ModelSpec>& models, int jobs) {
    BackendBundle b;
    auto make_live = [&]() -> std::unique_ptr<Backend> {
        require_credentials(models);
        b.limiter = std::make_shared<RateLimiter>(std::max(1, jobs),
                                                  std::chrono::milliseconds(250));
        return std::make_unique<HttpChatBackend>(RetryPolicy{}, b.limiter);
    };
    if (kind == "mock") {
        b.inner = std::make_unique<HeuristicMockBackend>();
    } else if (kind == "live") {
        b.inner = make_live();
    } else if (kind == "record" || kind == "replay") {
        if (cassettes.empty())
            throw ConfigError("--backend " + kind + " requires --cassettes <dir>");
        if (kind == "record") {
            b.inner = record_inner == "mock" ? std::make_unique<HeuristicMockBackend>()
                                             : make_live();
            b.outer = std::make_unique<RecordReplayBackend>(cassettes, CassetteMode::Record,
                                                            b.inner.get());
        } else {
            b.outer = std::make_unique<RecordReplayBackend>(cassettes, CassetteMode::Replay);
        }
    } else {
        throw ConfigError("unknown backend \"" + kind +
                          "\" (expected live, mock, record, or replay)");
    }
    return b;
}

struct CommonExperimentArgs {
    std::string corpus_path;
    std::string manifest_path;
    std::string config_path;
    std::string outdir = "results";
    std::string backend = "mock";
    std::string cassettes;
    std::string record_inner = "live";
    std::string profile_cache;
    bool resume = false;
    long seed = -1;  // <0 means keep the config's seed
    int jobs = 0;    // 0 means keep the config's jobs
};

void add_experiment_flags(CLI::App* cmd, CommonExperimentArgs& args) {
    cmd->add_option("--corpus", args.corpus_path, "Canonical corpus JSONL")->required();
    cmd->add_option("--manifest", args.manifest_path, "Split manifest JSON")->required();
    cmd->add_option("--config", args.config_path, "Experiment config file");
    cmd->add_option("--outdir", args.outdir,
                    "Output directory for journal.jsonl and reports/");
    cmd->add_option("--backend", args.backend, "Backend: live, mock, record, replay");
    cmd->add_option("--cassettes", args.cassettes, "Cassette directory (record/replay)");
    cmd->add_option("--record-inner", args.record_inner,
                    "Backend recorded from in record mode: live or mock");
    cmd->add_option("--profile-cache", args.profile_cache,
                    "Directory for cached user profiles");
    cmd->add_flag("--resume", args.resume, "Continue an existing journal");
    cmd->add_option("--seed", args.seed, "Override the config seed");
    cmd->add_option("--jobs", args.jobs, "Override worker count (default 1)");
}

void run_experiment_command(Experiment experiment, const CommonExperimentArgs& args) {
    ExperimentConfig config = args.config_path.empty()
                                  ? ExperimentConfig::defaults_for(experiment)
                                  : load_config(args.config_path, experiment);
    const bool offline_backend =
        args.backend == "mock" || args.backend == "replay" ||
        (args.backend == "record" && args.record_inner == "mock");
    if (config.models.empty() && offline_backend) {
        // Offline runs need no real endpoints; give exp1/exp2 one stand-in
        // model and exp3 seven so the default grids have their full shape.
        int n = experiment == Experiment::CrossModel ? 7 : 1;
        for (int i = 1; i <= n; ++i) {
            ModelSpec spec;
            spec.provider = "custom";
            spec.model_name = "mock-model-" + std::to_string(i);
            config.models.push_back(spec);
        }
    }
    if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
    if (args.jobs > 0) config.jobs = args.jobs;

    Corpus corpus = filter_known(parse_corpus_file(args.corpus_path));
    SplitManifest manifest = SplitManifest::load(args.manifest_path);
    BackendBundle backend = make_backend(args.backend, args.cassettes, args.record_inner,
                                         config.models, config.jobs);

    std::unique_ptr<ProfileCache> cache;
    if (!args.profile_cache.empty()) cache = std::make_unique<ProfileCache>(args.profile_cache);

    std::filesystem::create_directories(args.outdir);
    ExperimentRun run;
    run.corpus = &corpus;
    run.manifest = &manifest;
    run.config = config;
    run.backend = backend.get();
    run.journal_path = std::filesystem::path(args.outdir) / "journal.jsonl";
    run.resume = args.resume;
    run.cache = cache.get();
    run_experiment(run);

    auto written =
        emit_reports_from_journal(run.journal_path, std::filesystem::path(args.outdir) / "reports");
    std::cout << "journal " << run.journal_path.string() << "\n";
    for (const auto& path : written) std::cout << "report " << path.string() << "\n";
}

int run(int argc, char** argv) {
    CLI::App app{"Political stance classification pipeline and evaluation harness"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse raw posts into the canonical corpus");
    std::string ingest_input, ingest_format = "jsonl", ingest_affiliations, ingest_out;
    bool keep_unknown = false;
    ingest->add_option("input", ingest_input, "Raw JSONL or CSV file")->required();
    ingest->add_option("--format", ingest_format, "Input format: jsonl or csv");
    ingest->add_option("--affiliations", ingest_affiliations,
                       "Affiliation map JSON (default: built-in table)");
    ingest->add_option("--out", ingest_out, "Canonical corpus output path")->required();
    ingest->add_flag("--keep-unknown", keep_unknown,
                     "Keep users whose affiliation maps to UNKNOWN");
    ingest->callback([&] {
        AffiliationMap table = ingest_affiliations.empty()
                                   ? AffiliationMap::builtin()
                                   : AffiliationMap::load(ingest_affiliations);
        Corpus corpus;
        if (ingest_format == "jsonl") {
            corpus = parse_corpus_file(ingest_input, table);
        } else if (ingest_format == "csv") {
            std::ifstream in(ingest_input, std::ios::binary);
            if (!in) throw IoError("cannot open corpus file " + ingest_input);
            corpus = parse_corpus_csv(in, table);
        } else {
            throw ConfigError("unknown input format \"" + ingest_format + "\"");
        }
        if (!keep_unknown) corpus = filter_known(corpus);
        write_file_atomic(ingest_out, serialize_corpus_string(corpus));
        std::cout << "users " << corpus.users.size() << "\n"
                  << "posts " << corpus.total_posts() << "\n"
                  << "corpus_sha256 " << corpus_sha256(corpus) << "\n";
    });

    // split
    auto* split = app.add_subcommand("split", "Derive the per-user profile/test split");
    std::string split_corpus, split_out;
    long split_seed = 42;
    double split_ratio = 0.7;
    split->add_option("--corpus", split_corpus, "Canonical corpus JSONL")->required();
    split->add_option("--out", split_out, "Manifest output path")->required();
    split->add_option("--seed", split_seed, "Split seed");
    split->add_option("--ratio", split_ratio, "Profile-set fraction per user");
    split->callback([&] {
        Corpus corpus = filter_known(parse_corpus_file(split_corpus));
        SplitManifest manifest =
            make_split_manifest(corpus, split_ratio, static_cast<std::uint64_t>(split_seed));
        manifest.save(split_out);
        std::cout << "users " << manifest.users.size() << "\n"
                  << "corpus_sha256 " << manifest.corpus_hash << "\n";
    });

    // profile
    auto* profile = app.add_subcommand("profile", "Generate one user's profile");
    CommonExperimentArgs prof_args;
    std::string prof_user, prof_strategy = "political_signal", prof_count = "all";
    std::string prof_out;
    prof_args.backend = "mock";
    profile->add_option("--corpus", prof_args.corpus_path, "Canonical corpus JSONL")
        ->required();
    profile->add_option("--manifest", prof_args.manifest_path, "Split manifest JSON")
        ->required();
    profile->add_option("--config", prof_args.config_path, "Experiment config file");
    profile->add_option("--user", prof_user, "Username to profile")->required();
    profile->add_option("--strategy", prof_strategy, "Post selection strategy");
    profile->add_option("--n-posts", prof_count, "Posts to select (number or \"all\")");
    profile->add_option("--backend", prof_args.backend, "Backend: live, mock, record, replay");
    profile->add_option("--cassettes", prof_args.cassettes, "Cassette directory");
    profile->add_option("--record-inner", prof_args.record_inner,
                        "Backend recorded from in record mode: live or mock");
    profile->add_option("--profile-cache", prof_args.profile_cache,
                        "Directory for cached user profiles");
    profile->add_option("--out", prof_out, "Write the profile JSON here instead of stdout");
    profile->callback([&] {
        ExperimentConfig config =
            prof_args.config_path.empty()
                ? ExperimentConfig::defaults_for(Experiment::Enrichment)
                : load_config(prof_args.config_path, Experiment::Enrichment);
        if (config.models.empty()) {
            ModelSpec spec;
            spec.provider = "custom";
            spec.model_name = "mock-model-1";
            config.models.push_back(spec);
        }
        Corpus corpus = filter_known(parse_corpus_file(prof_args.corpus_path));
        SplitManifest manifest = SplitManifest::load(prof_args.manifest_path);
        auto splits = build_user_splits(corpus, manifest);
        const UserSplit* split_rec = nullptr;
        for (const auto& s : splits)
            if (s.user->username == prof_user) split_rec = &s;
        if (!split_rec) throw DataError("user \"" + prof_user + "\" is not in the manifest");

        auto kind = parse_strategy(prof_strategy);
        if (!kind) throw ConfigError("unknown strategy \"" + prof_strategy + "\"");
        long n = prof_count == "all" ? -1 : std::stol(prof_count);

        BackendBundle backend = make_backend(prof_args.backend, prof_args.cassettes,
                                             prof_args.record_inner, config.models, 1);
        std::unique_ptr<ProfileCache> cache;
        if (!prof_args.profile_cache.empty())
            cache = std::make_unique<ProfileCache>(prof_args.profile_cache);

        WeightedLexicon lexicon = config.lexicon_file.empty()
                                      ? default_lexicon()
                                      : load_lexicon(config.lexicon_file);
        ProfileOutcome outcome = generate_profile(
            prof_user, split_rec->profile_posts, config.strategy_for(*kind), n,
            config.profile_model(), *backend.get(), lexicon, cache.get(),
            corpus_sha256(corpus));
        if (!outcome.available)
            throw BackendFailure("profile unavailable for \"" + prof_user +
                                 "\": " + outcome.error);
        std::string text = outcome.profile.canonical_json() + "\n";
        if (prof_out.empty())
            std::cout << text;
        else
            write_file_atomic(prof_out, text);
    });

    // classify
    auto* classify = app.add_subcommand("classify", "Classify one post");
    CommonExperimentArgs cls_args;
    std::string cls_post, cls_profile_file;
    cls_args.backend = "mock";
    classify->add_option("--corpus", cls_args.corpus_path, "Canonical corpus JSONL")
        ->required();
    classify->add_option("--config", cls_args.config_path, "Experiment config file");
    classify->add_option("--post", cls_post, "post_id to classify")->required();
    classify->add_option("--profile", cls_profile_file,
                         "Profile JSON file; omit for baseline mode");
    classify->add_option("--backend", cls_args.backend, "Backend: live, mock, record, replay");
    classify->add_option("--cassettes", cls_args.cassettes, "Cassette directory");
    classify->add_option("--record-inner", cls_args.record_inner,
                         "Backend recorded from in record mode: live or mock");
    classify->callback([&] {
        ExperimentConfig config =
            cls_args.config_path.empty()
                ? ExperimentConfig::defaults_for(Experiment::Enrichment)
                : load_config(cls_args.config_path, Experiment::Enrichment);
        if (config.models.empty()) {
            ModelSpec spec;
            spec.provider = "custom";
            spec.model_name = "mock-model-1";
            config.models.push_back(spec);
        }
        Corpus corpus = filter_known(parse_corpus_file(cls_args.corpus_path));
        const RawPost* post = nullptr;
        const UserRecord* author = nullptr;
        for (const auto& user : corpus.users)
            for (const auto& p : user.posts)
                if (p.post_id == cls_post) {
                    post = &p;
                    author = &user;
                }
        if (!post) throw DataError("post \"" + cls_post + "\" is not in the corpus");

        std::optional<UserProfile> profile;
        if (!cls_profile_file.empty()) {
            auto parsed = parse_profile_response(read_file(cls_profile_file));
            if (parsed.status != ProfileParseStatus::Ok)
                throw DataError("profile file " + cls_profile_file +
                                " is not a valid profile");
            profile = parsed.profile;
        }
        BackendBundle backend = make_backend(cls_args.backend, cls_args.cassettes,
                                             cls_args.record_inner, config.models, 1);
        ClassificationResult result = classify_post(
            *post, author->leaning, profile ? &*profile : nullptr,
            profile ? config.profile_model().model_name : "", config.models.front(),
            *backend.get());
        nlohmann::ordered_json j;
        j["post_id"] = result.post_id;
        j["mode"] = mode_name(result.mode);
        j["gold"] = leaning_upper(result.gold);
        j["predicted"] = leaning_upper(result.predicted);
        j["outcome"] = outcome_name(result.outcome);
        j["explanation"] = result.explanation;
        if (!result.error.empty()) j["error"] = result.error;
        std::cout << j.dump(2) << "\n";
    });

    // exp1 / exp2 / exp3
    CommonExperimentArgs exp1_args, exp2_args, exp3_args;
    auto* exp1 = app.add_subcommand("exp1", "Baseline vs context-enriched classification");
    add_experiment_flags(exp1, exp1_args);
    exp1->callback([&] { run_experiment_command(Experiment::Enrichment, exp1_args); });
    auto* exp2 = app.add_subcommand("exp2", "Selection strategy and post count grid");
    add_experiment_flags(exp2, exp2_args);
    exp2->callback([&] { run_experiment_command(Experiment::Grid, exp2_args); });
    auto* exp3 = app.add_subcommand("exp3", "Cross-model generator/classifier matrix");
    add_experiment_flags(exp3, exp3_args);
    exp3->callback([&] { run_experiment_command(Experiment::CrossModel, exp3_args); });

    // report
    auto* report = app.add_subcommand("report", "Rebuild reports from a journal");
    std::string report_journal, report_outdir = "reports";
    report->add_option("--journal", report_journal, "Journal JSONL path")->required();
    report->add_option("--outdir", report_outdir, "Report output directory");
    report->callback([&] {
        auto written = emit_reports_from_journal(report_journal, report_outdir);
        for (const auto& path : written) std::cout << "report " << path.string() << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        msg << e.what();
        std::cerr << "error[usage]: " << msg.str() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const stancectx::Error& e) {
        std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 1;
    }
}
