#pragma once

#include <chrono>
#include <cstdlib>
#include <limits>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>

#include "clh/backend.hpp"
#include "clh/error.hpp"
#include "clh/jsonl.hpp"

namespace clh {

struct HttpBackendConfig {
    std::string base_url = "http://127.0.0.1:8000";
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    int timeout_ms = 30000;
    int max_retries = 3;     // additional attempts after the first
    int backoff_ms = 250;    // doubles per retry
    std::size_t max_in_flight = 4;
    std::string api_key_env = "CLH_API_KEY"; // key is read from here, never from config values
};

/// Chat-completions client. Sends the prompt as a single user message at
/// temperature zero, retries transient failures (connect errors, timeouts,
/// 429 and 5xx) with exponential backoff, and keeps at most max_in_flight
/// requests outstanding across threads.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config)
        : config_(std::move(config)),
          slots_(static_cast<std::ptrdiff_t>(config_.max_in_flight ? config_.max_in_flight : 1)) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }

    BackendResponse complete(const BackendRequest& request) override {
        count_call();
        slots_.acquire();
        struct Release {
            std::counting_semaphore<std::numeric_limits<int>::max()>& sem;
            ~Release() { sem.release(); }
        } release{slots_};

        ojson body = ojson::object();
        body["model"] = config_.model;
        body["messages"] = ojson::array({ojson{{"role", "user"}, {"content", request.prompt}}});
        body["temperature"] = 0;
        std::string payload = body.dump();

        bool timed_out = false;
        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                retries_.fetch_add(1);
                std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
            }
            httplib::Client client(config_.base_url);
            client.set_connection_timeout(std::chrono::milliseconds(config_.timeout_ms));
            client.set_read_timeout(std::chrono::milliseconds(config_.timeout_ms));
            client.set_write_timeout(std::chrono::milliseconds(config_.timeout_ms));
            httplib::Headers headers;
            if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

            auto result = client.Post(config_.path, headers, payload, "application/json");
            if (!result) {
                timed_out = result.error() == httplib::Error::ConnectionTimeout ||
                            result.error() == httplib::Error::Read || result.error() == httplib::Error::Write;
                last_error = httplib::to_string(result.error());
                continue;
            }
            if (result->status == 200) return parse_reply(result->body);
            if (result->status == 429 || result->status >= 500) {
                timed_out = false;
                last_error = "http status " + std::to_string(result->status);
                continue;
            }
            failures_.fetch_add(1);
            throw Error(ErrorCode::BackendUnavailable,
                        "backend rejected request: http status " + std::to_string(result->status));
        }
        failures_.fetch_add(1);
        if (timed_out) {
            throw Error(ErrorCode::Timeout, "backend timed out after " +
                                                std::to_string(config_.max_retries + 1) + " attempts");
        }
        throw Error(ErrorCode::BackendUnavailable, "backend unreachable: " + last_error);
    }

    std::string name() const override { return "http"; }

    std::uint64_t retries() const { return retries_.load(); }
    std::uint64_t failures() const { return failures_.load(); }

private:
    BackendResponse parse_reply(const std::string& body) {
        json doc;
        try {
            doc = json::parse(body);
        } catch (const json::parse_error& err) {
            throw Error(ErrorCode::ParseError, std::string("backend reply is not JSON: ") + err.what());
        }
        if (!doc.contains("choices") || !doc.at("choices").is_array() || doc.at("choices").empty()) {
            throw Error(ErrorCode::ParseError, "backend reply has no choices");
        }
        const auto& first = doc.at("choices").front();
        if (!first.contains("message") || !first.at("message").contains("content")) {
            throw Error(ErrorCode::ParseError, "backend reply has no message content");
        }
        return {first.at("message").at("content").get<std::string>()};
    }

    HttpBackendConfig config_;
    std::string api_key_;
    std::counting_semaphore<std::numeric_limits<int>::max()> slots_;
    std::atomic<std::uint64_t> retries_{0};
    std::atomic<std::uint64_t> failures_{0};
};

} // namespace clh
