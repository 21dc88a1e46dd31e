#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "stancectx/errors.hpp"
#include "stancectx/hashing.hpp"

namespace stancectx {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// Write-then-rename so readers never observe a half-written file. Callers that
// share a directory across threads rely on this.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() +
                          ": " + ec.message());
}

// Path components derived from user-controlled strings (model names, user
// names). Anything outside [A-Za-z0-9._-] is replaced, and a short hash is
// appended whenever a replacement happened so distinct inputs cannot collide.
inline std::string sanitize_path_component(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    bool changed = false;
    for (char c : name) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        if (ok) {
            out.push_back(c);
        } else {
            out.push_back('_');
            changed = true;
        }
    }
    if (out.empty() || out == "." || out == "..") {
        out = "_";
        changed = true;
    }
    if (changed) {
        char buf[20];
        std::snprintf(buf, sizeof buf, "-%08llx",
                      static_cast<unsigned long long>(fnv1a64(name) & 0xffffffffULL));
        out += buf;
    }
    return out;
}

}  // namespace stancectx
