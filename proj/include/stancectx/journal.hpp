#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#ifndef _WIN32
#include <unistd.h>
#endif

#include <json.hpp>

#include "stancectx/errors.hpp"
#include "stancectx/text.hpp"

namespace stancectx {

struct JournalRecord {
    std::string key;
    nlohmann::json data;
};

// Tolerant reader: a truncated final line (crash mid-append) is skipped, and
// if a key somehow appears twice the first occurrence wins.
inline std::vector<JournalRecord> read_journal(const std::filesystem::path& path) {
    std::vector<JournalRecord> records;
    std::ifstream in(path, std::ios::binary);
    if (!in) return records;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("key") ||
            !j["key"].is_string())
            continue;
        JournalRecord rec;
        rec.key = j["key"].get<std::string>();
        if (!seen.insert(rec.key).second) continue;
        rec.data = std::move(j);
        records.push_back(std::move(rec));
    }
    return records;
}

// Append-only JSONL sink. Every record carries a unique key; callers consult
// contains() to skip work already journaled, which is the whole resume story.
// Appends carry no timestamps so a replayed run is byte-identical.
class JournalWriter {
public:
    JournalWriter(const std::filesystem::path& path, bool resume, int fsync_interval = 64)
        : path_(path), fsync_interval_(fsync_interval) {
        std::error_code ec;
        const bool exists = std::filesystem::exists(path, ec);
        const bool nonempty = exists && std::filesystem::file_size(path, ec) > 0;
        if (nonempty && !resume)
            throw ConfigError("journal " + path.string() +
                              " already exists; pass --resume to continue it or remove it");
        if (resume)
            for (const auto& rec : read_journal(path)) keys_.insert(rec.key);
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        file_ = std::fopen(path.string().c_str(), resume && nonempty ? "ab" : "wb");
        if (!file_) throw IoError("cannot open journal " + path.string() + " for writing");
    }

    JournalWriter(const JournalWriter&) = delete;
    JournalWriter& operator=(const JournalWriter&) = delete;

    ~JournalWriter() {
        if (file_) {
            sync();
            std::fclose(file_);
        }
    }

    bool contains(const std::string& key) const {
        std::lock_guard<std::mutex> lock(mu_);
        return keys_.count(key) != 0;
    }

    // Writes {"key": key, ...record fields...} as one compact line.
    void append(const std::string& key, const nlohmann::ordered_json& record) {
        nlohmann::ordered_json line;
        line["key"] = key;
        for (const auto& [k, v] : record.items()) line[k] = v;
        const std::string text = line.dump() + "\n";

        std::lock_guard<std::mutex> lock(mu_);
        if (!keys_.insert(key).second)
            throw UsageError("journal key appended twice: " + key);
        if (std::fwrite(text.data(), 1, text.size(), file_) != text.size())
            throw IoError("short write to journal " + path_.string());
        if (++appends_since_sync_ >= fsync_interval_) sync_locked();
    }

    void flush() {
        std::lock_guard<std::mutex> lock(mu_);
        sync_locked();
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return keys_.size();
    }

    const std::filesystem::path& path() const { return path_; }

private:
    void sync() {
        std::lock_guard<std::mutex> lock(mu_);
        sync_locked();
    }

    void sync_locked() {
        std::fflush(file_);
#ifndef _WIN32
        ::fsync(fileno(file_));
#endif
        appends_since_sync_ = 0;
    }

    std::filesystem::path path_;
    FILE* file_ = nullptr;
    mutable std::mutex mu_;
    std::set<std::string> keys_;
    int fsync_interval_;
    int appends_since_sync_ = 0;
};

}  // namespace stancectx
