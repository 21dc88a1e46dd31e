#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "stancectx/errors.hpp"
#include "stancectx/fsutil.hpp"
#include "stancectx/hashing.hpp"
#include "stancectx/text.hpp"

namespace stancectx {

struct ModelSpec {
    std::string provider;
    std::string model_name;
    double temperature = 0.1;
    int max_tokens = 512;
    std::chrono::seconds request_timeout{60};
};

struct CompletionExchange {
    std::string prompt;
    std::string response;
    std::chrono::milliseconds latency{0};
    int attempt_count = 1;
    ModelSpec model;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionExchange complete(const ModelSpec& spec, const std::string& prompt) = 0;
    virtual std::string name() const = 0;
};

// Thrown by individual attempts for failures worth retrying (timeouts,
// throttling, 5xx). Internal to the retry loop; callers see BackendFailure
// once attempts are exhausted.
class TransientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds initial_delay{500};
    double backoff_factor = 2.0;
    std::chrono::milliseconds max_delay{8000};

    // Delay after the given 1-based failed attempt. Nondecreasing in attempt.
    std::chrono::milliseconds delay_for(int attempt) const {
        double ms = static_cast<double>(initial_delay.count());
        for (int i = 1; i < attempt; ++i) ms *= backoff_factor;
        double cap = static_cast<double>(max_delay.count());
        if (ms > cap) ms = cap;
        return std::chrono::milliseconds(static_cast<long long>(ms));
    }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

inline Sleeper null_sleeper() {
    return [](std::chrono::milliseconds) {};
}

// Callers bound both how many requests are in flight and how closely spaced
// their starts are. Departure slots are handed out under the lock; the actual
// wait happens outside it so permits do not serialize each other.
class RateLimiter {
public:
    RateLimiter(int max_concurrent, std::chrono::milliseconds min_interval)
        : max_concurrent_(max_concurrent), interval_(min_interval) {
        if (max_concurrent < 1)
            throw ConfigError("rate limiter concurrency must be at least 1");
    }

    class Permit {
    public:
        Permit() = default;
        explicit Permit(RateLimiter* limiter) : limiter_(limiter) {}
        Permit(Permit&& other) noexcept : limiter_(other.limiter_) { other.limiter_ = nullptr; }
        Permit& operator=(Permit&& other) noexcept {
            if (this != &other) {
                release();
                limiter_ = other.limiter_;
                other.limiter_ = nullptr;
            }
            return *this;
        }
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        ~Permit() { release(); }

    private:
        void release() {
            if (limiter_) {
                limiter_->release();
                limiter_ = nullptr;
            }
        }
        RateLimiter* limiter_ = nullptr;
    };

    Permit acquire() {
        std::chrono::steady_clock::time_point my_start;
        {
            std::unique_lock<std::mutex> lock(mu_);
            cv_.wait(lock, [this] { return in_flight_ < max_concurrent_; });
            ++in_flight_;
            auto now = std::chrono::steady_clock::now();
            my_start = std::max(now, next_start_);
            next_start_ = my_start + interval_;
        }
        std::this_thread::sleep_until(my_start);
        return Permit(this);
    }

    int in_flight() const {
        std::lock_guard<std::mutex> lock(mu_);
        return in_flight_;
    }

private:
    friend class Permit;
    void release() {
        std::lock_guard<std::mutex> lock(mu_);
        --in_flight_;
        cv_.notify_one();
    }

    mutable std::mutex mu_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    int max_concurrent_;
    std::chrono::milliseconds interval_;
    std::chrono::steady_clock::time_point next_start_{};
};

// Implements the retry loop once; concrete backends supply attempt_once and
// signal retryable conditions with TransientError.
class RetryingBackend : public Backend {
public:
    CompletionExchange complete(const ModelSpec& spec, const std::string& prompt) final {
        auto start = std::chrono::steady_clock::now();
        std::string last_error = "no attempts made";
        for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
            try {
                CompletionExchange ex;
                ex.prompt = prompt;
                ex.response = attempt_once(spec, prompt);
                ex.attempt_count = attempt;
                ex.model = spec;
                ex.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start);
                return ex;
            } catch (const TransientError& e) {
                last_error = e.what();
                if (attempt < policy_.max_attempts) sleep_(policy_.delay_for(attempt));
            }
        }
        throw BackendFailure(spec.model_name + ": " + last_error, policy_.max_attempts);
    }

protected:
    explicit RetryingBackend(RetryPolicy policy = {}, Sleeper sleeper = real_sleeper())
        : policy_(policy), sleep_(std::move(sleeper)) {}

    virtual std::string attempt_once(const ModelSpec& spec, const std::string& prompt) = 0;

    RetryPolicy policy_;
    Sleeper sleep_;
};

// ---------------------------------------------------------------------------
// Provider registry

struct ProviderInfo {
    std::string name;
    std::string base_url;  // scheme://host[/prefix], no trailing slash
    std::string key_env;
};

// All live providers speak the OpenAI chat-completions wire shape, natively
// or via a compatibility endpoint. "custom" reads its base URL from the
// environment for anything not listed.
inline const std::vector<ProviderInfo>& provider_registry() {
    static const std::vector<ProviderInfo> providers = {
        {"openai", "https://api.openai.com/v1", "OPENAI_API_KEY"},
        {"anthropic", "https://api.anthropic.com/v1", "ANTHROPIC_API_KEY"},
        {"google", "https://generativelanguage.googleapis.com/v1beta/openai",
         "GEMINI_API_KEY"},
        {"xai", "https://api.x.ai/v1", "XAI_API_KEY"},
        {"mistral", "https://api.mistral.ai/v1", "MISTRAL_API_KEY"},
        {"meta", "https://openrouter.ai/api/v1", "OPENROUTER_API_KEY"},
        {"openrouter", "https://openrouter.ai/api/v1", "OPENROUTER_API_KEY"},
        {"alibaba", "https://dashscope-intl.aliyuncs.com/compatible-mode/v1",
         "DASHSCOPE_API_KEY"},
        {"custom", "", "OPENAI_COMPAT_API_KEY"},
    };
    return providers;
}

inline const ProviderInfo* find_provider(std::string_view name) {
    std::string v = to_lower(trim(name));
    for (const auto& p : provider_registry())
        if (p.name == v) return &p;
    return nullptr;
}

inline std::string provider_base_url(const ProviderInfo& provider) {
    if (provider.name == "custom") {
        const char* url = std::getenv("OPENAI_COMPAT_BASE_URL");
        if (!url || !*url)
            throw ConfigError("provider \"custom\" requires OPENAI_COMPAT_BASE_URL to be set");
        std::string s = url;
        while (!s.empty() && s.back() == '/') s.pop_back();
        return s;
    }
    return provider.base_url;
}

// Startup check so a missing key fails before any work is journaled.
inline void require_credentials(const std::vector<ModelSpec>& specs) {
    std::vector<std::string> missing;
    for (const auto& spec : specs) {
        const ProviderInfo* provider = find_provider(spec.provider);
        if (!provider)
            throw ConfigError("unknown provider \"" + spec.provider + "\" for model " +
                              spec.model_name);
        const char* key = std::getenv(provider->key_env.c_str());
        if (!key || !*key) {
            if (std::find(missing.begin(), missing.end(), provider->key_env) == missing.end())
                missing.push_back(provider->key_env);
        }
        if (provider->name == "custom") provider_base_url(*provider);  // validates base URL
    }
    if (!missing.empty()) {
        std::string joined;
        for (const auto& v : missing) {
            if (!joined.empty()) joined += ", ";
            joined += v;
        }
        throw ConfigError("missing API credentials: set " + joined);
    }
}

// ---------------------------------------------------------------------------
// Test backends

// Scripted backend: exact prompt map first, then the fallback handler. The
// handler may throw TransientError to exercise the retry path.
class MockBackend : public RetryingBackend {
public:
    using Handler = std::function<std::string(const ModelSpec&, const std::string&)>;

    explicit MockBackend(RetryPolicy policy = {}, Sleeper sleeper = null_sleeper())
        : RetryingBackend(policy, std::move(sleeper)) {}

    std::string name() const override { return "mock"; }

    void add_response(std::string prompt, std::string response) {
        std::lock_guard<std::mutex> lock(mu_);
        responses_[std::move(prompt)] = std::move(response);
    }

    void set_handler(Handler handler) {
        std::lock_guard<std::mutex> lock(mu_);
        handler_ = std::move(handler);
    }

    int call_count() const {
        std::lock_guard<std::mutex> lock(mu_);
        return calls_;
    }

    std::vector<std::string> prompts() const {
        std::lock_guard<std::mutex> lock(mu_);
        return prompts_;
    }

protected:
    std::string attempt_once(const ModelSpec& spec, const std::string& prompt) override {
        Handler handler;
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++calls_;
            prompts_.push_back(prompt);
            auto it = responses_.find(prompt);
            if (it != responses_.end()) return it->second;
            handler = handler_;
        }
        if (handler) return handler(spec, prompt);
        throw BackendFailure("mock backend has no scripted response for prompt of " +
                                 std::to_string(prompt.size()) + " bytes",
                             1);
    }

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> responses_;
    Handler handler_;
    int calls_ = 0;
    std::vector<std::string> prompts_;
};

// Pass-through wrapper that counts completions; used to prove replay runs
// never touch the wrapped backend.
class CountingBackend : public Backend {
public:
    explicit CountingBackend(Backend* inner) : inner_(inner) {}

    CompletionExchange complete(const ModelSpec& spec, const std::string& prompt) override {
        ++calls_;
        if (!inner_) throw BackendFailure("counting backend has no inner backend", 1);
        return inner_->complete(spec, prompt);
    }

    std::string name() const override { return "counting"; }
    int calls() const { return calls_.load(); }

private:
    Backend* inner_;
    std::atomic<int> calls_{0};
};

// ---------------------------------------------------------------------------
// Record / replay

enum class CassetteMode { Record, Replay };

// Cassette key: content hash over model, temperature, and prompt, so
// cassettes recorded on one machine replay anywhere.
inline std::string cassette_key(const ModelSpec& spec, const std::string& prompt) {
    char temp[32];
    std::snprintf(temp, sizeof temp, "%.6g", spec.temperature);
    std::string material = spec.model_name;
    material += '\x1f';
    material += temp;
    material += '\x1f';
    material += prompt;
    return Sha256::hex_digest(material);
}

class RecordReplayBackend : public Backend {
public:
    RecordReplayBackend(std::filesystem::path dir, CassetteMode mode, Backend* inner = nullptr)
        : dir_(std::move(dir)), mode_(mode), inner_(inner) {
        if (mode_ == CassetteMode::Record && !inner_)
            throw UsageError("record mode needs an inner backend to record from");
        if (mode_ == CassetteMode::Record) std::filesystem::create_directories(dir_);
    }

    std::string name() const override {
        return mode_ == CassetteMode::Record ? "record" : "replay";
    }

    CompletionExchange complete(const ModelSpec& spec, const std::string& prompt) override {
        const std::string key = cassette_key(spec, prompt);
        const std::filesystem::path path = dir_ / (key + ".json");

        if (auto cached = load(path, spec, prompt)) return *cached;
        if (mode_ == CassetteMode::Replay) throw CassetteMiss(key);

        CompletionExchange ex = inner_->complete(spec, prompt);
        nlohmann::ordered_json j;
        j["model"] = spec.model_name;
        j["temperature"] = spec.temperature;
        j["prompt"] = prompt;
        j["response"] = ex.response;
        std::lock_guard<std::mutex> lock(mu_);
        write_file_atomic(path, j.dump(2) + "\n");
        return ex;
    }

private:
    std::optional<CompletionExchange> load(const std::filesystem::path& path,
                                           const ModelSpec& spec, const std::string& prompt) {
        std::error_code ec;
        if (!std::filesystem::exists(path, ec)) return std::nullopt;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
            CompletionExchange ex;
            ex.prompt = prompt;
            ex.model = spec;
            ex.attempt_count = 1;
            if (j.at("prompt").get<std::string>() != prompt ||
                j.at("model").get<std::string>() != spec.model_name)
                throw BackendFailure("cassette " + path.string() +
                                         " does not match the request that hashed to it",
                                     1);
            ex.response = j.at("response").get<std::string>();
            return ex;
        } catch (const nlohmann::json::exception& e) {
            throw BackendFailure("corrupt cassette " + path.string() + ": " + e.what(), 1);
        }
    }

    std::filesystem::path dir_;
    CassetteMode mode_;
    Backend* inner_;
    std::mutex mu_;
};

}  // namespace stancectx
