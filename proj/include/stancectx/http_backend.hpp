#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "stancectx/backend.hpp"
#include "stancectx/errors.hpp"

namespace stancectx {

namespace detail {

// "https://host[:port]/prefix" -> {"https://host[:port]", "/prefix"}
inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("backend base URL \"" + base_url + "\" has no scheme");
    auto path_start = base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    return {base_url.substr(0, path_start), base_url.substr(path_start)};
}

}  // namespace detail

// One wire shape for every provider: POST {base}/chat/completions with an
// OpenAI-style body, bearer auth from the provider's environment variable.
class HttpChatBackend : public RetryingBackend {
public:
    explicit HttpChatBackend(RetryPolicy policy = {},
                             std::shared_ptr<RateLimiter> limiter = nullptr,
                             Sleeper sleeper = real_sleeper())
        : RetryingBackend(policy, std::move(sleeper)), limiter_(std::move(limiter)) {}

    std::string name() const override { return "live"; }

protected:
    std::string attempt_once(const ModelSpec& spec, const std::string& prompt) override {
        const ProviderInfo* provider = find_provider(spec.provider);
        if (!provider)
            throw ConfigError("unknown provider \"" + spec.provider + "\" for model " +
                              spec.model_name);
        auto [origin, prefix] = detail::split_base_url(provider_base_url(*provider));
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (origin.rfind("https://", 0) == 0)
            throw ConfigError("built without TLS support; cannot reach " + origin);
#endif

        RateLimiter::Permit permit;
        if (limiter_) permit = limiter_->acquire();

        httplib::Client client(origin);
        client.set_connection_timeout(spec.request_timeout);
        client.set_read_timeout(spec.request_timeout);
        client.set_write_timeout(spec.request_timeout);

        httplib::Headers headers;
        const char* key = std::getenv(provider->key_env.c_str());
        if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

        nlohmann::json body;
        body["model"] = spec.model_name;
        body["temperature"] = spec.temperature;
        body["max_tokens"] = spec.max_tokens;
        body["messages"] = nlohmann::json::array(
            {nlohmann::json{{"role", "user"}, {"content", prompt}}});

        auto res = client.Post((prefix + "/chat/completions").c_str(), headers, body.dump(),
                               "application/json");
        if (!res)
            throw TransientError("transport error talking to " + origin + ": " +
                                 httplib::to_string(res.error()));
        if (res->status == 408 || res->status == 429 || res->status >= 500)
            throw TransientError("HTTP " + std::to_string(res->status) + " from " + origin);
        if (res->status != 200)
            throw BackendFailure("HTTP " + std::to_string(res->status) + " from " + origin +
                                     ": " + res->body.substr(0, 200),
                                 1);

        try {
            nlohmann::json parsed = nlohmann::json::parse(res->body);
            return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendFailure("malformed completion response from " + origin + ": " +
                                     e.what(),
                                 1);
        }
    }

private:
    std::shared_ptr<RateLimiter> limiter_;
};

}  // namespace stancectx
