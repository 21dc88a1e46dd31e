#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "stancectx/corpus.hpp"
#include "stancectx/hashing.hpp"
#include "stancectx/profile.hpp"

namespace fixtures {

using namespace stancectx;

// Unique scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& label) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("stancectx-" + label + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Scoped environment variable override restoring the prior value.
class EnvVar {
public:
    EnvVar(const char* name, const char* value) : name_(name) {
        const char* old = std::getenv(name);
        if (old) saved_ = old;
        had_value_ = old != nullptr;
        if (value)
            ::setenv(name, value, 1);
        else
            ::unsetenv(name);
    }
    ~EnvVar() {
        if (had_value_)
            ::setenv(name_.c_str(), saved_.c_str(), 1);
        else
            ::unsetenv(name_.c_str());
    }
    EnvVar(const EnvVar&) = delete;
    EnvVar& operator=(const EnvVar&) = delete;

private:
    std::string name_, saved_;
    bool had_value_ = false;
};

// Token unique to one post, embedded in its text so scripted backends can
// recognize which post a prompt carries. Hex keeps it clear of lexicon terms.
inline std::string marker(const std::string& post_id) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "mk%016llx",
                  static_cast<unsigned long long>(fnv1a64(post_id)));
    return buf;
}

// Deterministic corpus: users alternate left/right, texts mix political cue
// sentences with neutral filler, every 7th post drags in a quoted span, and
// every post embeds its marker token. Affiliation labels are real ones so the
// built-in mapping applies.
inline Corpus make_synthetic_corpus(int n_users, int posts_per_user, std::uint64_t seed = 7) {
    static const std::vector<std::string> kLeftSentences = {
        "Universal healthcare is worth funding properly.",
        "Climate policy needs teeth, not slogans.",
        "The progressive wing had the better argument last night.",
        "Expanding voting access should not be controversial.",
    };
    static const std::vector<std::string> kRightSentences = {
        "Lower the tax burden and the economy follows.",
        "Border security comes before any amnesty talk.",
        "The conservative case for smaller government still stands.",
        "Gun rights are not up for renegotiation.",
    };
    static const std::vector<std::string> kNeutralSentences = {
        "My sourdough starter finally doubled overnight.",
        "That remaster ran at a smooth framerate the whole weekend.",
        "The trailhead parking lot fills up before eight.",
        "New strings made the old guitar sound alive again.",
    };
    static const std::vector<std::string> kSubforums = {
        "politics", "gaming", "cooking", "current events", "movies",
    };
    static const std::vector<std::string> kLeftLabels = {"democrat", "liberal"};
    static const std::vector<std::string> kRightLabels = {"republican", "conservative"};

    Corpus corpus;
    for (int u = 0; u < n_users; ++u) {
        const bool left = u % 2 == 0;
        char name[40];
        std::snprintf(name, sizeof name, "%s_user_%02d", left ? "left" : "right", u);

        UserRecord user;
        user.username = name;
        user.declared_affiliation =
            left ? kLeftLabels[u % kLeftLabels.size()] : kRightLabels[u % kRightLabels.size()];
        user.leaning = left ? Leaning::Left : Leaning::Right;

        SplitMix64 rng(derive_seed(seed, user.username));
        const auto& own = left ? kLeftSentences : kRightSentences;
        const auto& other = left ? kRightSentences : kLeftSentences;
        for (int i = 0; i < posts_per_user; ++i) {
            RawPost post;
            char pid[48];
            std::snprintf(pid, sizeof pid, "%s-p%03d", name, i);
            post.post_id = pid;
            post.author = user.username;
            post.thread_id = "t" + std::to_string(i / 5);
            post.seq = i;
            post.subforum = kSubforums[rng.next_below(kSubforums.size())];

            std::string text;
            if (i % 7 == 3) {
                std::string quote = other[rng.next_below(other.size())];
                post.quoted_spans.push_back({0, quote.size()});
                text = quote + "\n";
            }
            std::uint64_t pick = rng.next_below(3);
            if (pick == 0)
                text += kNeutralSentences[rng.next_below(kNeutralSentences.size())];
            else
                text += own[rng.next_below(own.size())];
            if (pick == 2) text += " " + own[rng.next_below(own.size())];
            text += " " + marker(post.post_id);
            post.text = text;
            user.posts.push_back(std::move(post));
        }
        corpus.users.push_back(std::move(user));
    }
    std::sort(corpus.users.begin(), corpus.users.end(),
              [](const UserRecord& a, const UserRecord& b) { return a.username < b.username; });
    return corpus;
}

// The two posts and the profile behind the prompt golden files.
inline RawPost golden_post_plain() {
    RawPost post;
    post.post_id = "rb-001";
    post.author = "riverbend";
    post.subforum = "politics";
    post.thread_id = "t1";
    post.seq = 1;
    post.text = "I vote in every election. Healthcare policy matters to me.";
    return post;
}

inline RawPost golden_post_quoted() {
    RawPost post;
    post.post_id = "rb-002";
    post.author = "riverbend";
    post.subforum = "politics";
    post.thread_id = "t1";
    post.seq = 2;
    post.text = "Lower taxes would help.\nMy neighbor said the border wall works.";
    post.quoted_spans.push_back({24, 63});
    return post;
}

inline UserProfile golden_profile() {
    UserProfile p;
    p.username = "riverbend";
    p.political_leaning = Leaning::Right;
    p.confidence = Confidence::Medium;
    p.key_indicators = {"supports lower taxes", "echoes border wall talking points",
                        "skeptical of public programs"};
    p.recurring_topics = {"taxes", "immigration"};
    p.language_style = "short declarative sentences";
    p.sentiment_patterns = "criticizes government spending";
    p.context_notes = "sample fixture";
    return p;
}

}  // namespace fixtures
