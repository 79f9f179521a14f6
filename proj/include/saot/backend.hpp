#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "saot/polarity.hpp"

namespace saot::backend {

struct CompletionRequest {
    std::string model;
    std::string prompt;
    int max_tokens = 256;
    double temperature = 0.0;
    std::vector<std::string> stop;

    bool operator==(const CompletionRequest&) const = default;
};

struct CompletionResponse {
    std::string text;
    std::optional<std::int64_t> prompt_tokens;
    std::optional<std::int64_t> completion_tokens;
    std::int64_t latency_ms = 0;  // always 0 for cache hits
    bool from_cache = false;
};

enum class BackendKind { Http, Mock };

// One (substring pattern, canned response) rule of a scripted mock.
struct MockRule {
    std::string pattern;
    std::string response;
};

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string endpoint_url;    // Http only
    std::string auth_token_env;  // name of the env var holding the credential
    int timeout_ms = 30000;
    int max_retries = 3;
    int backoff_base_ms = 250;
    std::optional<int> rate_limit_per_min;
    // Mock only: first rule whose pattern is a substring of the prompt wins.
    std::vector<MockRule> mock_rules;
    std::string mock_default_text = "neutral";
};

class BackendError : public Error {
public:
    using Error::Error;
};

// Transient failures (transport errors, timeouts, HTTP 5xx) exhausted the
// retry budget.
class TransientExhausted : public BackendError {
public:
    using BackendError::BackendError;
};

// HTTP 4xx. Never retried.
class PermanentRejection : public BackendError {
public:
    explicit PermanentRejection(const std::string& message, int status = 0)
        : BackendError(message), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

class ConfigError : public BackendError {
public:
    using BackendError::BackendError;
};

// A 2xx reply whose body does not match the completion schema.
class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

// Uniform text-completion interface. Implementations must be safe to share
// across concurrent callers.
class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete(const CompletionRequest& req) = 0;
    // Number of completions actually executed (cache hits do not count;
    // they never reach the backend).
    virtual std::int64_t call_count() const = 0;
};

// Deterministic test double: the first rule whose pattern is a substring of
// the prompt supplies the response; no rule matches -> default_text.
class ScriptedMockBackend : public Backend {
public:
    ScriptedMockBackend(std::vector<MockRule> rules, std::string default_text);

    CompletionResponse complete(const CompletionRequest& req) override;
    std::int64_t call_count() const override { return calls_.load(); }

private:
    std::vector<MockRule> rules_;
    std::string default_text_;
    std::atomic<std::int64_t> calls_{0};
};

// JSON-over-HTTP completion client: POSTs {model, prompt, max_tokens,
// temperature, stop} to the configured endpoint and reads
// {"choices":[{"text": ...}], "usage": {...}}. Bearer token read from the
// env var named by auth_token_env (empty name means no auth header, for
// local stubs). Retries transport errors and 5xx with exponential backoff
// (backoff_base_ms * 2^attempt); 4xx is rejected without retry.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig config);

    CompletionResponse complete(const CompletionRequest& req) override;
    std::int64_t call_count() const override { return calls_.load(); }

private:
    void acquire_rate_token();

    BackendConfig config_;
    std::string scheme_host_port_;
    std::string path_;
    std::atomic<std::int64_t> calls_{0};

    // Client-side token bucket, only active when rate_limit_per_min is set.
    std::mutex bucket_mutex_;
    double bucket_tokens_ = 0;
    std::chrono::steady_clock::time_point bucket_refill_at_{};
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

std::unique_ptr<Backend> scripted_mock(std::vector<MockRule> rules,
                                       std::string default_text);

// --- config (de)serialization used by the runner -------------------------

// Parses a backend config JSON object. The credential itself never appears
// in config, only the env var name.
BackendConfig parse_backend_config(const std::string& json_text);
std::string backend_config_to_json(const BackendConfig& config);

}  // namespace saot::backend
