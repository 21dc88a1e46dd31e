#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "stancectx/config.hpp"

#include "helpers.hpp"

using namespace stancectx;
using Catch::Matchers::ContainsSubstring;

namespace {

std::filesystem::path write_config(const fixtures::TempDir& dir, const std::string& text) {
    auto path = dir.path() / "run.conf";
    std::ofstream(path, std::ios::binary) << text;
    return path;
}

}  // namespace

TEST_CASE("experiment names parse both styles") {
    CHECK(parse_experiment("exp1") == Experiment::Enrichment);
    CHECK(parse_experiment("enrichment") == Experiment::Enrichment);
    CHECK(parse_experiment("exp2") == Experiment::Grid);
    CHECK(parse_experiment("grid") == Experiment::Grid);
    CHECK(parse_experiment("exp3") == Experiment::CrossModel);
    CHECK(parse_experiment(" Cross_Model ") == Experiment::CrossModel);
    CHECK_FALSE(parse_experiment("exp4").has_value());
    CHECK(experiment_name(Experiment::Grid) == "exp2");
}

TEST_CASE("defaults differ per experiment") {
    auto e1 = ExperimentConfig::defaults_for(Experiment::Enrichment);
    CHECK(e1.strategies == std::vector<StrategyKind>{StrategyKind::PoliticalSignal});
    CHECK(e1.post_counts == std::vector<long>{-1});
    CHECK(e1.seed == 42);
    CHECK(e1.test_set_size == 200);
    CHECK(e1.jobs == 1);

    auto e2 = ExperimentConfig::defaults_for(Experiment::Grid);
    CHECK(e2.strategies.size() == 5);
    CHECK(e2.post_counts == std::vector<long>{1, 2, 3, 5, 10, 20, 30, 50});
    CHECK(e2.user_limit == 50);
    CHECK(e2.test_post_limit == 5);

    auto e3 = ExperimentConfig::defaults_for(Experiment::CrossModel);
    CHECK(e3.strategies == std::vector<StrategyKind>{StrategyKind::PoliticalSignal});
    CHECK(e3.post_counts == std::vector<long>{50});
}

TEST_CASE("profile_model resolves by name with a front default") {
    ExperimentConfig config = ExperimentConfig::defaults_for(Experiment::Enrichment);
    CHECK_THROWS_AS(config.profile_model(), ConfigError);

    ModelSpec a;
    a.provider = "openai";
    a.model_name = "alpha";
    ModelSpec b;
    b.provider = "anthropic";
    b.model_name = "beta";
    config.models = {a, b};

    CHECK(config.profile_model().model_name == "alpha");
    config.profile_model_name = "beta";
    CHECK(config.profile_model().model_name == "beta");
    config.profile_model_name = "gamma";
    CHECK_THROWS_AS(config.profile_model(), ConfigError);
}

TEST_CASE("strategy_for copies run-wide knobs") {
    ExperimentConfig config = ExperimentConfig::defaults_for(Experiment::Grid);
    config.seed = 7;
    config.noise_range = 0.5;
    config.include_quotes = true;
    auto s = config.strategy_for(StrategyKind::LongForm);
    CHECK(s.kind == StrategyKind::LongForm);
    CHECK(s.seed == 7);
    CHECK(s.noise_range == 0.5);
    CHECK(s.include_quotes);
    CHECK(s.controversial_keywords.empty());
}

TEST_CASE("validate rejects out-of-range settings") {
    ExperimentConfig config = ExperimentConfig::defaults_for(Experiment::Grid);
    ModelSpec m;
    m.provider = "custom";
    m.model_name = "m";
    config.models = {m};
    CHECK_NOTHROW(config.validate());

    SECTION("no models") {
        config.models.clear();
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
    SECTION("zero post count") {
        config.post_counts = {1, 0};
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
    SECTION("count below -1") {
        config.post_counts = {-2};
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
    SECTION("bad user limit") {
        config.user_limit = 0;
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
    SECTION("negative noise") {
        config.noise_range = -0.1;
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
    SECTION("bad jobs") {
        config.jobs = 0;
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
    SECTION("negative temperature") {
        config.models[0].temperature = -1;
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
}

TEST_CASE("config hash covers results-affecting keys and ignores jobs") {
    ExperimentConfig config = ExperimentConfig::defaults_for(Experiment::Grid);
    ModelSpec m;
    m.provider = "custom";
    m.model_name = "m";
    config.models = {m};

    const std::string base = config.config_hash();
    CHECK(base == config.config_hash());

    ExperimentConfig jobs_differ = config;
    jobs_differ.jobs = 8;
    CHECK(jobs_differ.config_hash() == base);

    ExperimentConfig seed_differs = config;
    seed_differs.seed = 43;
    CHECK(seed_differs.config_hash() != base);

    ExperimentConfig counts_differ = config;
    counts_differ.post_counts = {1, 2};
    CHECK(counts_differ.config_hash() != base);

    ExperimentConfig temp_differs = config;
    temp_differs.models[0].temperature = 0.2;
    CHECK(temp_differs.config_hash() != base);

    CHECK_THAT(config.canonical_text(), ContainsSubstring("experiment=exp2"));
    CHECK_THAT(config.canonical_text(), ContainsSubstring("post_counts=1 2 3 5 10 20 30 50"));
    CHECK_THAT(config.canonical_text(), !ContainsSubstring("jobs"));
}

TEST_CASE("load_config parses keys, comments, and model sections") {
    fixtures::TempDir dir("config");
    auto path = write_config(dir,
                             "# run settings\n"
                             "experiment = grid\n"
                             "seed = 7\n"
                             "post_counts = 1 2 all\n"
                             "strategies = random recent_post\n"
                             "include_quotes = yes\n"
                             "noise_range = 0.25\n"
                             "test_set_size = 50  # small smoke run\n"
                             "\n"
                             "[model]\n"
                             "provider = OpenAI\n"
                             "name = gpt-4o\n"
                             "temperature = 0.3\n"
                             "max_tokens = 256\n"
                             "timeout_seconds = 30\n"
                             "\n"
                             "[model]\n"
                             "name = local-llama\n");

    auto config = load_config(path, Experiment::Grid);
    CHECK(config.seed == 7);
    CHECK(config.post_counts == std::vector<long>{1, 2, -1});
    CHECK(config.strategies ==
          std::vector<StrategyKind>{StrategyKind::Random, StrategyKind::RecentPost});
    CHECK(config.include_quotes);
    CHECK(config.noise_range == 0.25);
    CHECK(config.test_set_size == 50);
    REQUIRE(config.models.size() == 2);
    CHECK(config.models[0].provider == "openai");
    CHECK(config.models[0].model_name == "gpt-4o");
    CHECK(config.models[0].temperature == 0.3);
    CHECK(config.models[0].max_tokens == 256);
    CHECK(config.models[0].request_timeout == std::chrono::seconds(30));
    CHECK(config.models[1].provider == "custom");
    CHECK(config.models[1].model_name == "local-llama");
}

TEST_CASE("load_config keeps defaults for unset keys") {
    fixtures::TempDir dir("config-defaults");
    auto path = write_config(dir, "[model]\nname = m\n");
    auto config = load_config(path, Experiment::Grid);
    CHECK(config.seed == 42);
    CHECK(config.post_counts.size() == 8);
    CHECK(config.strategies.size() == 5);
    CHECK(config.user_limit == 50);
}

TEST_CASE("load_config rejects malformed input with file and line") {
    fixtures::TempDir dir("config-errors");

    SECTION("experiment mismatch") {
        auto path = write_config(dir, "experiment = exp1\n");
        CHECK_THROWS_MATCHES(load_config(path, Experiment::Grid), ConfigError,
                             Catch::Matchers::MessageMatches(ContainsSubstring("exp1")));
    }
    SECTION("unknown key") {
        auto path = write_config(dir, "seed = 1\nspeling = off\n");
        CHECK_THROWS_MATCHES(load_config(path, Experiment::Grid), ConfigError,
                             Catch::Matchers::MessageMatches(ContainsSubstring("line 2")));
    }
    SECTION("unknown section") {
        auto path = write_config(dir, "[backend]\n");
        CHECK_THROWS_AS(load_config(path, Experiment::Grid), ConfigError);
    }
    SECTION("model section without a name") {
        auto path = write_config(dir, "[model]\nprovider = openai\n");
        CHECK_THROWS_MATCHES(load_config(path, Experiment::Grid), ConfigError,
                             Catch::Matchers::MessageMatches(ContainsSubstring("name")));
    }
    SECTION("unknown model key") {
        auto path = write_config(dir, "[model]\nname = m\nsampler = top_k\n");
        CHECK_THROWS_AS(load_config(path, Experiment::Grid), ConfigError);
    }
    SECTION("non-numeric seed") {
        auto path = write_config(dir, "seed = soon\n");
        CHECK_THROWS_MATCHES(load_config(path, Experiment::Grid), ConfigError,
                             Catch::Matchers::MessageMatches(ContainsSubstring("integer")));
    }
    SECTION("unknown strategy") {
        auto path = write_config(dir, "strategies = newest_first\n");
        CHECK_THROWS_AS(load_config(path, Experiment::Grid), ConfigError);
    }
    SECTION("bare word without equals") {
        auto path = write_config(dir, "resume\n");
        CHECK_THROWS_AS(load_config(path, Experiment::Grid), ConfigError);
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(load_config(dir.path() / "absent.conf", Experiment::Grid), IoError);
    }
}

TEST_CASE("load_config hashes referenced lexicon and keyword files") {
    fixtures::TempDir dir("config-files");
    auto lexicon = dir.path() / "lex.json";
    std::ofstream(lexicon, std::ios::binary) << "{}";
    auto path = write_config(dir, "lexicon_file = " + lexicon.string() + "\n[model]\nname = m\n");

    auto config = load_config(path, Experiment::Grid);
    CHECK(config.lexicon_content_hash == Sha256::hex_digest("{}"));
    CHECK_THAT(config.canonical_text(),
               ContainsSubstring("lexicon_sha256=" + config.lexicon_content_hash));

    std::ofstream(lexicon, std::ios::binary) << "{\"general_terms\":{}}";
    auto reloaded = load_config(path, Experiment::Grid);
    CHECK(reloaded.lexicon_content_hash != config.lexicon_content_hash);
    CHECK(reloaded.config_hash() != config.config_hash());
}
