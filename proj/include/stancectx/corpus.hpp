#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "stancectx/errors.hpp"
#include "stancectx/fsutil.hpp"
#include "stancectx/hashing.hpp"
#include "stancectx/text.hpp"

namespace stancectx {

// LEFT / RIGHT / UNKNOWN. Used both for ground-truth leanings and for model
// predictions; prompts use the uppercase form, profile JSON the lowercase one.
enum class Leaning { Left, Right, Unknown };

inline std::string leaning_upper(Leaning l) {
    switch (l) {
        case Leaning::Left: return "LEFT";
        case Leaning::Right: return "RIGHT";
        default: return "UNKNOWN";
    }
}

inline std::string leaning_lower(Leaning l) {
    switch (l) {
        case Leaning::Left: return "left";
        case Leaning::Right: return "right";
        default: return "unknown";
    }
}

inline std::optional<Leaning> parse_leaning(std::string_view s) {
    std::string v = to_lower(trim(s));
    if (v == "left") return Leaning::Left;
    if (v == "right") return Leaning::Right;
    if (v == "unknown") return Leaning::Unknown;
    return std::nullopt;
}

// Half-open is deliberate: [begin, end) byte offsets into RawPost::text.
struct QuotedSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct RawPost {
    std::string post_id;
    std::string author;
    std::string subforum;   // may be empty
    std::string thread_id;  // may be empty
    std::int64_t seq = 0;   // chronological order within the author's posts
    std::string text;
    std::vector<QuotedSpan> quoted_spans;
};

struct UserRecord {
    std::string username;
    std::string declared_affiliation;
    Leaning leaning = Leaning::Unknown;
    std::vector<RawPost> posts;  // ordered by seq, strictly increasing
};

struct Corpus {
    std::vector<UserRecord> users;  // sorted by username

    std::size_t total_posts() const {
        std::size_t n = 0;
        for (const auto& u : users) n += u.posts.size();
        return n;
    }

    const UserRecord* find_user(std::string_view username) const {
        auto it = std::lower_bound(
            users.begin(), users.end(), username,
            [](const UserRecord& u, std::string_view name) { return u.username < name; });
        if (it != users.end() && it->username == username) return &*it;
        return nullptr;
    }
};

// Declared-affiliation label -> broad leaning. The table is data: the built-in
// default can be replaced by a JSON file with the same three buckets.
class AffiliationMap {
public:
    static const AffiliationMap& builtin() {
        static const AffiliationMap instance = make_builtin();
        return instance;
    }

    static AffiliationMap load(const std::filesystem::path& path) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("affiliation map " + path.string() + ": " + e.what());
        }
        AffiliationMap m;
        auto add_bucket = [&](const char* key, Leaning leaning) {
            if (!j.contains(key) || !j[key].is_array())
                throw ConfigError("affiliation map " + path.string() +
                                  ": missing array field \"" + key + "\"");
            for (const auto& item : j[key]) {
                if (!item.is_string())
                    throw ConfigError("affiliation map " + path.string() +
                                      ": non-string label under \"" + key + "\"");
                m.add(item.get<std::string>(), leaning);
            }
        };
        add_bucket("left", Leaning::Left);
        add_bucket("right", Leaning::Right);
        add_bucket("unknown", Leaning::Unknown);
        return m;
    }

    void add(std::string_view label, Leaning leaning) {
        table_[to_lower(trim(label))] = leaning;
    }

    // Total: unrecognized labels (including empty) map to UNKNOWN.
    Leaning map(std::string_view label) const {
        auto it = table_.find(to_lower(trim(label)));
        if (it == table_.end()) return Leaning::Unknown;
        return it->second;
    }

private:
    static AffiliationMap make_builtin() {
        AffiliationMap m;
        for (const char* s : {"democrat", "liberal", "l-fringe", "left-fringe"})
            m.add(s, Leaning::Left);
        for (const char* s : {"republican", "conservative", "r-fringe", "right-fringe"})
            m.add(s, Leaning::Right);
        for (const char* s : {"centrist", "independent", "libertarian", "green", "unknown"})
            m.add(s, Leaning::Unknown);
        return m;
    }

    std::unordered_map<std::string, Leaning> table_;
};

inline Leaning map_affiliation(std::string_view label,
                               const AffiliationMap& table = AffiliationMap::builtin()) {
    return table.map(label);
}

namespace detail {

struct PostRecord {
    RawPost post;
    std::string affiliation;
    long line = -1;
};

inline void validate_spans(const RawPost& post, long line) {
    std::vector<QuotedSpan> spans = post.quoted_spans;
    std::sort(spans.begin(), spans.end(),
              [](const QuotedSpan& a, const QuotedSpan& b) { return a.begin < b.begin; });
    std::size_t prev_end = 0;
    bool first = true;
    for (const auto& s : spans) {
        if (s.begin > s.end || s.end > post.text.size())
            throw DataError("post " + post.post_id + ": quoted span [" +
                                std::to_string(s.begin) + ", " + std::to_string(s.end) +
                                ") out of bounds",
                            line);
        if (!first && s.begin < prev_end)
            throw DataError("post " + post.post_id + ": overlapping quoted spans", line);
        prev_end = s.end;
        first = false;
    }
}

inline Corpus group_records(std::vector<PostRecord> records, const AffiliationMap& table) {
    std::unordered_set<std::string> seen_ids;
    seen_ids.reserve(records.size());
    std::map<std::string, UserRecord> by_user;
    std::map<std::string, std::unordered_map<std::int64_t, long>> seq_lines;

    for (auto& rec : records) {
        if (!seen_ids.insert(rec.post.post_id).second)
            throw DataError("duplicate post_id \"" + rec.post.post_id + "\"", rec.line);
        validate_spans(rec.post, rec.line);

        auto [it, inserted] = by_user.try_emplace(rec.post.author);
        UserRecord& user = it->second;
        if (inserted) {
            user.username = rec.post.author;
            user.declared_affiliation = rec.affiliation;
            user.leaning = table.map(rec.affiliation);
        } else if (to_lower(trim(user.declared_affiliation)) !=
                   to_lower(trim(rec.affiliation))) {
            throw DataError("user \"" + user.username + "\" declares affiliation \"" +
                                rec.affiliation + "\" but earlier posts declared \"" +
                                user.declared_affiliation + "\"",
                            rec.line);
        }

        auto [seq_it, seq_new] = seq_lines[user.username].try_emplace(rec.post.seq, rec.line);
        if (!seq_new)
            throw DataError("user \"" + user.username + "\" has two posts with seq " +
                                std::to_string(rec.post.seq),
                            rec.line);
        user.posts.push_back(std::move(rec.post));
    }

    Corpus corpus;
    corpus.users.reserve(by_user.size());
    for (auto& [name, user] : by_user) {
        std::sort(user.posts.begin(), user.posts.end(),
                  [](const RawPost& a, const RawPost& b) { return a.seq < b.seq; });
        corpus.users.push_back(std::move(user));
    }
    return corpus;
}

inline std::vector<QuotedSpan> spans_from_json(const nlohmann::json& j, long line) {
    std::vector<QuotedSpan> spans;
    if (!j.is_array()) throw DataError("field \"quoted_spans\" must be an array", line);
    for (const auto& item : j) {
        if (!item.is_array() || item.size() != 2 || !item[0].is_number_unsigned() ||
            !item[1].is_number_unsigned())
            throw DataError(
                "field \"quoted_spans\" entries must be [begin, end] offset pairs", line);
        spans.push_back({item[0].get<std::size_t>(), item[1].get<std::size_t>()});
    }
    std::sort(spans.begin(), spans.end(),
              [](const QuotedSpan& a, const QuotedSpan& b) { return a.begin < b.begin; });
    return spans;
}

}  // namespace detail

// One post per line, JSON objects with fields post_id, author, affiliation,
// subforum, thread_id, seq, text, quoted_spans. subforum, thread_id and
// quoted_spans are optional; everything else is required.
inline Corpus parse_corpus(std::istream& in,
                           const AffiliationMap& table = AffiliationMap::builtin()) {
    std::vector<detail::PostRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        if (!j.is_object()) throw DataError("record is not a JSON object", line_no);

        auto require_string = [&](const char* field) -> std::string {
            if (!j.contains(field))
                throw DataError(std::string("missing field \"") + field + "\"", line_no);
            if (!j[field].is_string())
                throw DataError(std::string("field \"") + field + "\" must be a string",
                                line_no);
            return j[field].get<std::string>();
        };

        detail::PostRecord rec;
        rec.line = line_no;
        rec.post.post_id = require_string("post_id");
        rec.post.author = require_string("author");
        rec.affiliation = require_string("affiliation");
        rec.post.text = require_string("text");
        if (!j.contains("seq"))
            throw DataError("missing field \"seq\"", line_no);
        if (!j["seq"].is_number_integer())
            throw DataError("field \"seq\" must be an integer", line_no);
        rec.post.seq = j["seq"].get<std::int64_t>();
        if (j.contains("subforum")) {
            if (!j["subforum"].is_string())
                throw DataError("field \"subforum\" must be a string", line_no);
            rec.post.subforum = j["subforum"].get<std::string>();
        }
        if (j.contains("thread_id")) {
            if (!j["thread_id"].is_string())
                throw DataError("field \"thread_id\" must be a string", line_no);
            rec.post.thread_id = j["thread_id"].get<std::string>();
        }
        if (j.contains("quoted_spans"))
            rec.post.quoted_spans = detail::spans_from_json(j["quoted_spans"], line_no);
        records.push_back(std::move(rec));
    }
    return detail::group_records(std::move(records), table);
}

inline Corpus parse_corpus_file(const std::filesystem::path& path,
                                const AffiliationMap& table = AffiliationMap::builtin()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file " + path.string());
    return parse_corpus(in, table);
}

// Canonical JSONL: users sorted by username, posts by seq, fixed field order.
// parse(serialize(c)) == c, and serialize is stable, so the output doubles as
// the content hashed for reproducibility checks.
inline void serialize_corpus(const Corpus& corpus, std::ostream& out) {
    for (const auto& user : corpus.users) {
        for (const auto& post : user.posts) {
            nlohmann::ordered_json j;
            j["post_id"] = post.post_id;
            j["author"] = post.author;
            j["affiliation"] = user.declared_affiliation;
            j["subforum"] = post.subforum;
            j["thread_id"] = post.thread_id;
            j["seq"] = post.seq;
            j["text"] = post.text;
            auto spans = nlohmann::ordered_json::array();
            for (const auto& s : post.quoted_spans)
                spans.push_back({s.begin, s.end});
            j["quoted_spans"] = std::move(spans);
            out << j.dump() << '\n';
        }
    }
}

inline std::string serialize_corpus_string(const Corpus& corpus) {
    std::ostringstream out;
    serialize_corpus(corpus, out);
    return out.str();
}

inline std::string corpus_sha256(const Corpus& corpus) {
    return Sha256::hex_digest(serialize_corpus_string(corpus));
}

// Keeps only users whose mapped leaning is LEFT or RIGHT; surviving records
// are untouched.
inline Corpus filter_known(const Corpus& corpus) {
    Corpus out;
    for (const auto& user : corpus.users)
        if (user.leaning == Leaning::Left || user.leaning == Leaning::Right)
            out.users.push_back(user);
    return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion (one-shot converter; same columns as the JSONL schema)

namespace detail {

// RFC 4180-ish: quoted fields, doubled quotes, embedded commas and newlines.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in,
                                                       std::vector<long>* row_lines = nullptr) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    long line_no = 1;
    long row_start_line = 1;
    int c;
    auto end_field = [&]() {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&]() {
        end_field();
        rows.push_back(std::move(row));
        if (row_lines) row_lines->push_back(row_start_line);
        row.clear();
        row_started = false;
    };
    while ((c = in.get()) != EOF) {
        char ch = static_cast<char>(c);
        if (!row_started) {
            row_start_line = line_no;
            row_started = true;
        }
        if (in_quotes) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line_no;
                field.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            end_field();
        } else if (ch == '\r') {
            // swallowed; \r\n handled at \n
        } else if (ch == '\n') {
            ++line_no;
            end_row();
        } else {
            field.push_back(ch);
        }
    }
    if (in_quotes) throw DataError("unterminated quoted CSV field", row_start_line);
    if (row_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

}  // namespace detail

inline Corpus parse_corpus_csv(std::istream& in,
                               const AffiliationMap& table = AffiliationMap::builtin()) {
    std::vector<long> row_lines;
    auto rows = detail::parse_csv(in, &row_lines);
    if (rows.empty()) return Corpus{};

    const auto& header = rows.front();
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i)
        col[std::string(trim(header[i]))] = i;
    for (const char* required :
         {"post_id", "author", "affiliation", "seq", "text"})
        if (!col.count(required))
            throw DataError(std::string("missing CSV column \"") + required + "\"", 1);

    auto cell = [&](const std::vector<std::string>& row, const char* name,
                    long line) -> std::string {
        auto it = col.find(name);
        if (it == col.end() || it->second >= row.size()) {
            if (it == col.end()) return "";
            throw DataError(std::string("row is missing column \"") + name + "\"", line);
        }
        return row[it->second];
    };

    std::vector<detail::PostRecord> records;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        long line = row_lines[r];
        const auto& row = rows[r];
        if (row.size() == 1 && trim(row[0]).empty()) continue;
        detail::PostRecord rec;
        rec.line = line;
        rec.post.post_id = cell(row, "post_id", line);
        rec.post.author = cell(row, "author", line);
        rec.affiliation = cell(row, "affiliation", line);
        rec.post.subforum = col.count("subforum") ? cell(row, "subforum", line) : "";
        rec.post.thread_id = col.count("thread_id") ? cell(row, "thread_id", line) : "";
        rec.post.text = cell(row, "text", line);
        std::string seq_raw = std::string(trim(cell(row, "seq", line)));
        try {
            std::size_t pos = 0;
            rec.post.seq = std::stoll(seq_raw, &pos);
            if (pos != seq_raw.size()) throw std::invalid_argument(seq_raw);
        } catch (const std::exception&) {
            throw DataError("column \"seq\" must be an integer, got \"" + seq_raw + "\"",
                            line);
        }
        if (col.count("quoted_spans")) {
            std::string spans_raw = std::string(trim(cell(row, "quoted_spans", line)));
            if (!spans_raw.empty()) {
                nlohmann::json sj;
                try {
                    sj = nlohmann::json::parse(spans_raw);
                } catch (const nlohmann::json::parse_error& e) {
                    throw DataError(std::string("column \"quoted_spans\": ") + e.what(),
                                    line);
                }
                rec.post.quoted_spans = detail::spans_from_json(sj, line);
            }
        }
        records.push_back(std::move(rec));
    }
    return detail::group_records(std::move(records), table);
}

// ---------------------------------------------------------------------------
// Profile / test split

struct SplitAssignment {
    std::string username;
    Leaning leaning = Leaning::Unknown;
    std::vector<std::string> profile_posts;  // post_ids, chronological
    std::vector<std::string> test_posts;     // post_ids, chronological
    std::uint64_t seed = 0;
};

inline std::uint64_t user_split_seed(std::uint64_t seed, std::string_view username) {
    return derive_seed(seed, username);
}

// round(ratio * n), half away from zero.
inline std::size_t profile_set_size(std::size_t n, double ratio) {
    return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
}

// Deterministic per (username, ratio, seed): a SplitMix64-driven Fisher-Yates
// permutation of the user's posts; the first round(ratio*n) land in the
// profile set. A user with a single post keeps it in the profile set; with
// two or more, at least one post always stays in the test set.
inline SplitAssignment split_user_posts(const UserRecord& user, double ratio = 0.7,
                                        std::uint64_t seed = 42) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ConfigError("split ratio must be inside (0, 1), got " + std::to_string(ratio));
    const std::size_t n = user.posts.size();
    if (n == 0) throw UsageError("cannot split user \"" + user.username + "\" with no posts");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    SplitMix64 rng(user_split_seed(seed, user.username));
    seeded_shuffle(order, rng);

    std::size_t k;
    if (n == 1) {
        k = 1;
    } else {
        k = profile_set_size(n, ratio);
        if (k > n - 1) k = n - 1;
    }

    std::vector<std::size_t> profile_idx(order.begin(), order.begin() + k);
    std::vector<std::size_t> test_idx(order.begin() + k, order.end());
    std::sort(profile_idx.begin(), profile_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    SplitAssignment out;
    out.username = user.username;
    out.leaning = user.leaning;
    out.seed = seed;
    for (std::size_t i : profile_idx) out.profile_posts.push_back(user.posts[i].post_id);
    for (std::size_t i : test_idx) out.test_posts.push_back(user.posts[i].post_id);
    return out;
}

// The reproducibility contract consumed by every experiment: which posts feed
// profile generation and which are reserved for evaluation, per user.
struct SplitManifest {
    std::uint64_t seed = 42;
    double ratio = 0.7;
    std::string corpus_hash;
    std::vector<SplitAssignment> users;  // sorted by username

    const SplitAssignment* find(std::string_view username) const {
        auto it = std::lower_bound(users.begin(), users.end(), username,
                                   [](const SplitAssignment& a, std::string_view name) {
                                       return a.username < name;
                                   });
        if (it != users.end() && it->username == username) return &*it;
        return nullptr;
    }

    std::string to_json_string() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["ratio"] = ratio;
        j["corpus_hash"] = corpus_hash;
        auto arr = nlohmann::json::array();
        for (const auto& u : users) {
            nlohmann::json uj;
            uj["username"] = u.username;
            uj["leaning"] = leaning_upper(u.leaning);
            uj["profile_posts"] = u.profile_posts;
            uj["test_posts"] = u.test_posts;
            arr.push_back(std::move(uj));
        }
        j["users"] = std::move(arr);
        return j.dump(2) + "\n";
    }

    static SplitManifest from_json_string(const std::string& content) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(content);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(std::string("invalid manifest JSON: ") + e.what());
        }
        SplitManifest m;
        try {
            m.seed = j.at("seed").get<std::uint64_t>();
            m.ratio = j.at("ratio").get<double>();
            m.corpus_hash = j.at("corpus_hash").get<std::string>();
            for (const auto& uj : j.at("users")) {
                SplitAssignment u;
                u.username = uj.at("username").get<std::string>();
                auto leaning = parse_leaning(uj.at("leaning").get<std::string>());
                if (!leaning) throw DataError("manifest user \"" + u.username +
                                              "\" has an invalid leaning");
                u.leaning = *leaning;
                u.profile_posts = uj.at("profile_posts").get<std::vector<std::string>>();
                u.test_posts = uj.at("test_posts").get<std::vector<std::string>>();
                u.seed = m.seed;
                m.users.push_back(std::move(u));
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("invalid manifest: ") + e.what());
        }
        std::sort(m.users.begin(), m.users.end(),
                  [](const SplitAssignment& a, const SplitAssignment& b) {
                      return a.username < b.username;
                  });
        return m;
    }

    void save(const std::filesystem::path& path) const {
        write_file_atomic(path, to_json_string());
    }

    static SplitManifest load(const std::filesystem::path& path) {
        return from_json_string(read_file(path));
    }
};

// Splits every user in the given corpus. Callers wanting the standard
// pipeline filter to known leanings first.
inline SplitManifest make_split_manifest(const Corpus& corpus, double ratio = 0.7,
                                         std::uint64_t seed = 42) {
    SplitManifest m;
    m.seed = seed;
    m.ratio = ratio;
    m.corpus_hash = corpus_sha256(corpus);
    for (const auto& user : corpus.users)
        m.users.push_back(split_user_posts(user, ratio, seed));
    return m;
}

// Resolve manifest post ids back to posts, preserving chronological order.
inline std::vector<RawPost> posts_by_ids(const UserRecord& user,
                                         const std::vector<std::string>& ids) {
    std::unordered_set<std::string> wanted(ids.begin(), ids.end());
    std::vector<RawPost> out;
    out.reserve(ids.size());
    for (const auto& post : user.posts)
        if (wanted.count(post.post_id)) out.push_back(post);
    if (out.size() != ids.size())
        throw DataError("manifest references post ids that are not in the corpus for user \"" +
                        user.username + "\"");
    return out;
}

}  // namespace stancectx
