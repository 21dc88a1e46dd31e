#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace stancectx {

// Error categories map onto CLI exit codes: usage/data -> 2, config -> 3,
// backend -> 4, io -> 1.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error("usage", message) {}
};

// Bad input data (malformed corpus records, schema violations). Carries the
// 1-based input line when known.
class DataError : public Error {
public:
    explicit DataError(const std::string& message, long line = -1)
        : Error("data", with_line(message, line)), line_(line) {}

    long line() const noexcept { return line_; }

private:
    static std::string with_line(const std::string& message, long line) {
        if (line < 0) return message;
        return "line " + std::to_string(line) + ": " + message;
    }

    long line_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

// A completion could not be obtained even after retries. attempts() reports
// how many attempts were made before giving up.
class BackendFailure : public Error {
public:
    explicit BackendFailure(const std::string& message, int attempts = 1)
        : Error("backend", message), attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

// Replay-mode request for a prompt that was never recorded.
class CassetteMiss : public BackendFailure {
public:
    explicit CassetteMiss(const std::string& prompt_hash)
        : BackendFailure("cassette miss for prompt hash " + prompt_hash),
          prompt_hash_(prompt_hash) {}

    const std::string& prompt_hash() const noexcept { return prompt_hash_; }

private:
    std::string prompt_hash_;
};

}  // namespace stancectx
