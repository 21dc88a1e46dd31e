#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stancectx/classify.hpp"
#include "stancectx/errors.hpp"
#include "stancectx/fsutil.hpp"
#include "stancectx/journal.hpp"
#include "stancectx/metrics.hpp"
#include "stancectx/selection.hpp"

namespace stancectx {

struct EnrichmentRow {
    std::string model;
    OutcomeCounts baseline;
    OutcomeCounts context;
};

struct ConditionRow {
    std::string strategy;
    long n_posts = 0;  // -1 means all
    OutcomeCounts counts;
};

struct Aggregation {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string config_hash;

    long long profiles_total = 0;
    long long profiles_unavailable = 0;
    long long profiles_failed = 0;
    long long classifications = 0;
    long long fallbacks = 0;
    long long backend_failures = 0;

    std::vector<EnrichmentRow> enrichment;  // sorted by model name
    std::vector<ConditionRow> conditions;   // canonical strategy order, counts ascending
    std::map<std::string, std::map<std::string, OutcomeCounts>> cells;  // gen -> cls
    std::vector<std::string> generators;   // sorted
    std::vector<std::string> classifiers;  // sorted
};

namespace detail {

inline std::size_t strategy_rank(const std::string& label) {
    for (std::size_t i = 0; i < kAllStrategies.size(); ++i)
        if (label == strategy_name(kAllStrategies[i])) return i;
    return kAllStrategies.size();
}

inline long parse_count_label(const std::string& label) {
    if (label == "all") return -1;
    try {
        return std::stol(label);
    } catch (const std::exception&) {
        throw DataError("journal has an invalid n_posts label \"" + label + "\"");
    }
}

}  // namespace detail

// Pure fold over journal records; line order within the journal never changes
// the result, so interrupted-and-resumed runs aggregate identically.
inline Aggregation aggregate_journal(const std::vector<JournalRecord>& records) {
    Aggregation agg;
    bool have_header = false;

    std::map<std::string, std::pair<OutcomeCounts, OutcomeCounts>> by_model;
    std::map<std::pair<std::size_t, long>, ConditionRow> by_condition;
    std::set<std::string> classifier_names;

    for (const auto& rec : records) {
        const std::string kind = rec.data.value("kind", "");
        if (kind == "header") {
            agg.experiment = rec.data.value("experiment", "");
            agg.seed = rec.data.value("seed", std::uint64_t{0});
            agg.config_hash = rec.data.value("config_hash", "");
            have_header = true;
        } else if (kind == "profile") {
            ++agg.profiles_total;
            const std::string status = rec.data.value("status", "");
            if (status == "unavailable") ++agg.profiles_unavailable;
            if (status == "backend_failure") ++agg.profiles_failed;
        } else if (kind == "classification") {
            ++agg.classifications;
            if (rec.data.value("fallback", false)) ++agg.fallbacks;
            auto outcome = parse_outcome(rec.data.value("outcome", ""));
            if (!outcome)
                throw DataError("journal has an invalid outcome in record " + rec.key);
            if (*outcome == Outcome::BackendFailure) ++agg.backend_failures;

            const std::string experiment = rec.data.value("experiment", "");
            const std::string classifier = rec.data.value("classifier", "");
            const std::string generator = rec.data.value("generator", "");
            if (experiment == "exp1") {
                auto& buckets = by_model[classifier];
                (generator.empty() ? buckets.first : buckets.second).add(*outcome);
            } else if (experiment == "exp2") {
                const std::string strategy = rec.data.value("strategy", "");
                long n = detail::parse_count_label(rec.data.value("n_posts", ""));
                auto key = std::make_pair(detail::strategy_rank(strategy), n);
                auto [it, inserted] = by_condition.try_emplace(key);
                if (inserted) {
                    it->second.strategy = strategy;
                    it->second.n_posts = n;
                }
                it->second.counts.add(*outcome);
            } else if (experiment == "exp3") {
                agg.cells[generator][classifier].add(*outcome);
                classifier_names.insert(classifier);
            }
        }
    }
    if (!have_header) throw DataError("journal has no header record");

    for (auto& [model, buckets] : by_model)
        agg.enrichment.push_back({model, buckets.first, buckets.second});
    for (auto& [key, row] : by_condition) agg.conditions.push_back(std::move(row));
    for (const auto& [generator, row] : agg.cells) agg.generators.push_back(generator);
    agg.classifiers.assign(classifier_names.begin(), classifier_names.end());
    return agg;
}

namespace detail {

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline std::string accuracy_cell(const OutcomeCounts& counts) {
    if (counts.denominator() <= 0) return "";
    return format_tenths(accuracy_pct_tenths(counts.correct, counts.denominator()));
}

inline std::string count_label_string(long n) {
    return n < 0 ? "all" : std::to_string(n);
}

inline std::string report_stamp(const Aggregation& agg) {
    return "# seed=" + std::to_string(agg.seed) + " config_hash=" + agg.config_hash + "\n";
}

// Mean of per-cell accuracy fractions, in tenths of a percent; empty when no
// cell has a defined accuracy.
inline std::string mean_cell(const std::vector<const OutcomeCounts*>& cells) {
    double sum = 0.0;
    long available = 0;
    for (const OutcomeCounts* c : cells) {
        if (!c || c->denominator() <= 0) continue;
        sum += accuracy_fraction(*c);
        ++available;
    }
    if (available == 0) return "";
    return format_tenths(std::llround(1000.0 * sum / static_cast<double>(available)));
}

inline const OutcomeCounts* find_cell(const Aggregation& agg, const std::string& generator,
                                      const std::string& classifier) {
    auto git = agg.cells.find(generator);
    if (git == agg.cells.end()) return nullptr;
    auto cit = git->second.find(classifier);
    if (cit == git->second.end()) return nullptr;
    return &cit->second;
}

}  // namespace detail

inline std::string render_enrichment_csv(const Aggregation& agg) {
    std::ostringstream out;
    out << detail::report_stamp(agg);
    out << "model,baseline_correct,baseline_total,baseline_accuracy,"
           "context_correct,context_total,context_accuracy,improvement_points\n";
    for (const auto& row : agg.enrichment) {
        out << detail::csv_escape(row.model) << "," << row.baseline.correct << ","
            << row.baseline.denominator() << "," << detail::accuracy_cell(row.baseline) << ","
            << row.context.correct << "," << row.context.denominator() << ","
            << detail::accuracy_cell(row.context) << ",";
        if (row.baseline.denominator() > 0 && row.context.denominator() > 0)
            out << format_signed_tenths(
                improvement_tenths(row.context.correct, row.context.denominator(),
                                   row.baseline.correct, row.baseline.denominator()));
        out << "\n";
    }
    return out.str();
}

inline std::string render_grid_conditions_csv(const Aggregation& agg) {
    std::ostringstream out;
    out << detail::report_stamp(agg);
    out << "strategy,n_posts,instances,correct,incorrect,parse_failures,backend_failures,"
           "accuracy\n";
    for (const auto& row : agg.conditions) {
        out << detail::csv_escape(row.strategy) << ","
            << detail::count_label_string(row.n_posts) << "," << row.counts.instances()
            << "," << row.counts.correct << "," << row.counts.incorrect << ","
            << row.counts.parse_failures << "," << row.counts.backend_failures << ","
            << detail::accuracy_cell(row.counts) << "\n";
    }
    return out.str();
}

inline std::string render_grid_matrix_csv(const Aggregation& agg) {
    std::vector<long> counts;
    std::vector<std::string> strategies;
    for (const auto& row : agg.conditions) {
        if (std::find(counts.begin(), counts.end(), row.n_posts) == counts.end())
            counts.push_back(row.n_posts);
        if (std::find(strategies.begin(), strategies.end(), row.strategy) == strategies.end())
            strategies.push_back(row.strategy);
    }
    std::sort(counts.begin(), counts.end());
    std::sort(strategies.begin(), strategies.end(),
              [](const std::string& a, const std::string& b) {
                  return detail::strategy_rank(a) < detail::strategy_rank(b);
              });

    std::ostringstream out;
    out << detail::report_stamp(agg);
    out << "strategy";
    for (long n : counts) out << "," << detail::count_label_string(n);
    out << "\n";
    for (const auto& strategy : strategies) {
        out << detail::csv_escape(strategy);
        for (long n : counts) {
            out << ",";
            for (const auto& row : agg.conditions)
                if (row.strategy == strategy && row.n_posts == n) {
                    out << detail::accuracy_cell(row.counts);
                    break;
                }
        }
        out << "\n";
    }
    return out.str();
}

inline std::string render_cross_model_csv(const Aggregation& agg) {
    std::ostringstream out;
    out << detail::report_stamp(agg);
    out << "generator";
    for (const auto& classifier : agg.classifiers) out << "," << detail::csv_escape(classifier);
    out << ",generator_mean\n";

    for (const auto& generator : agg.generators) {
        out << detail::csv_escape(generator);
        std::vector<const OutcomeCounts*> row_cells;
        for (const auto& classifier : agg.classifiers) {
            const OutcomeCounts* cell = detail::find_cell(agg, generator, classifier);
            row_cells.push_back(cell);
            out << "," << (cell ? detail::accuracy_cell(*cell) : "");
        }
        out << "," << detail::mean_cell(row_cells) << "\n";
    }

    out << "classifier_mean";
    std::vector<const OutcomeCounts*> all_cells;
    for (const auto& classifier : agg.classifiers) {
        std::vector<const OutcomeCounts*> column_cells;
        for (const auto& generator : agg.generators) {
            const OutcomeCounts* cell = detail::find_cell(agg, generator, classifier);
            column_cells.push_back(cell);
            all_cells.push_back(cell);
        }
        out << "," << detail::mean_cell(column_cells);
    }
    out << "," << detail::mean_cell(all_cells) << "\n";
    return out.str();
}

inline std::string render_summary_md(const Aggregation& agg) {
    std::ostringstream out;
    if (agg.experiment == "exp1")
        out << "# Context enrichment summary\n";
    else if (agg.experiment == "exp2")
        out << "# Selection strategy grid summary\n";
    else
        out << "# Cross-model profile transfer summary\n";
    out << "\n";
    out << "- Seed: " << agg.seed << "\n";
    out << "- Config hash: `" << agg.config_hash << "`\n";
    out << "- Profiles: " << agg.profiles_total << " (" << agg.profiles_unavailable
        << " unavailable, " << agg.profiles_failed << " backend failures)\n";
    out << "- Classifications: " << agg.classifications << " (" << agg.fallbacks
        << " baseline fallbacks, " << agg.backend_failures << " backend failures)\n";
    out << "\n";

    auto cell = [](const std::string& s) { return s.empty() ? std::string("-") : s; };

    if (agg.experiment == "exp1") {
        out << "| Model | Baseline % | Context % | Improvement |\n";
        out << "|---|---|---|---|\n";
        for (const auto& row : agg.enrichment) {
            std::string improvement;
            if (row.baseline.denominator() > 0 && row.context.denominator() > 0)
                improvement = format_signed_tenths(
                    improvement_tenths(row.context.correct, row.context.denominator(),
                                       row.baseline.correct, row.baseline.denominator()));
            out << "| " << row.model << " | " << cell(detail::accuracy_cell(row.baseline))
                << " | " << cell(detail::accuracy_cell(row.context)) << " | "
                << cell(improvement) << " |\n";
        }
    } else if (agg.experiment == "exp2") {
        out << "| Strategy | Posts | Instances | Accuracy % |\n";
        out << "|---|---|---|---|\n";
        for (const auto& row : agg.conditions)
            out << "| " << row.strategy << " | " << detail::count_label_string(row.n_posts)
                << " | " << row.counts.instances() << " | "
                << cell(detail::accuracy_cell(row.counts)) << " |\n";
    } else {
        out << "| Generator \\ Classifier |";
        for (const auto& classifier : agg.classifiers) out << " " << classifier << " |";
        out << " Mean |\n|---|";
        for (std::size_t i = 0; i <= agg.classifiers.size(); ++i) out << "---|";
        out << "\n";
        for (const auto& generator : agg.generators) {
            out << "| " << generator << " |";
            std::vector<const OutcomeCounts*> row_cells;
            for (const auto& classifier : agg.classifiers) {
                const OutcomeCounts* c = detail::find_cell(agg, generator, classifier);
                row_cells.push_back(c);
                out << " " << cell(c ? detail::accuracy_cell(*c) : "") << " |";
            }
            out << " " << cell(detail::mean_cell(row_cells)) << " |\n";
        }
    }
    return out.str();
}

// Writes the report files for whichever experiment the journal belongs to
// and returns their paths.
inline std::vector<std::filesystem::path> emit_reports(
    const std::vector<JournalRecord>& records, const std::filesystem::path& outdir) {
    Aggregation agg = aggregate_journal(records);
    std::filesystem::create_directories(outdir);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const char* name, const std::string& content) {
        auto path = outdir / name;
        write_file_atomic(path, content);
        written.push_back(path);
    };
    if (agg.experiment == "exp1") {
        emit("enrichment.csv", render_enrichment_csv(agg));
    } else if (agg.experiment == "exp2") {
        emit("grid_conditions.csv", render_grid_conditions_csv(agg));
        emit("grid_matrix.csv", render_grid_matrix_csv(agg));
    } else if (agg.experiment == "exp3") {
        emit("cross_model_matrix.csv", render_cross_model_csv(agg));
    } else {
        throw DataError("journal header names an unknown experiment \"" + agg.experiment +
                        "\"");
    }
    emit("summary.md", render_summary_md(agg));
    return written;
}

inline std::vector<std::filesystem::path> emit_reports_from_journal(
    const std::filesystem::path& journal_path, const std::filesystem::path& outdir) {
    return emit_reports(read_journal(journal_path), outdir);
}

}  // namespace stancectx
