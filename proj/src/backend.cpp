#include "saot/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace saot::backend {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void validate_request(const CompletionRequest& req) {
    if (req.prompt.empty()) throw BackendError("request prompt must be non-empty");
    if (req.max_tokens < 1) throw BackendError("request max_tokens must be >= 1");
    if (req.temperature < 0) throw BackendError("request temperature must be >= 0");
}

bool transient_status(int status) { return status >= 500; }

}  // namespace

ScriptedMockBackend::ScriptedMockBackend(std::vector<MockRule> rules,
                                         std::string default_text)
    : rules_(std::move(rules)), default_text_(std::move(default_text)) {}

CompletionResponse ScriptedMockBackend::complete(const CompletionRequest& req) {
    validate_request(req);
    calls_.fetch_add(1);
    CompletionResponse resp;
    resp.text = default_text_;
    for (const MockRule& rule : rules_) {  // first match wins
        if (req.prompt.find(rule.pattern) != std::string::npos) {
            resp.text = rule.response;
            break;
        }
    }
    return resp;
}

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
    if (config_.kind != BackendKind::Http) {
        throw ConfigError("HttpBackend requires kind=http");
    }
    if (config_.endpoint_url.empty()) {
        throw ConfigError("http backend requires endpoint_url");
    }
    if (config_.timeout_ms < 1 || config_.backoff_base_ms < 1) {
        throw ConfigError("timeout_ms and backoff_base_ms must be positive");
    }
    if (config_.max_retries < 0) {
        throw ConfigError("max_retries must be >= 0");
    }
    if (config_.rate_limit_per_min && *config_.rate_limit_per_min < 1) {
        throw ConfigError("rate_limit_per_min must be positive");
    }

    std::size_t scheme_end = config_.endpoint_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint_url must include a scheme: " +
                          config_.endpoint_url);
    }
    std::string scheme = config_.endpoint_url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw ConfigError("unsupported scheme \"" + scheme + "\"");
    }
    std::size_t path_start = config_.endpoint_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_port_ = config_.endpoint_url;
        path_ = "/";
    } else {
        scheme_host_port_ = config_.endpoint_url.substr(0, path_start);
        path_ = config_.endpoint_url.substr(path_start);
    }

    if (config_.rate_limit_per_min) {
        bucket_tokens_ = static_cast<double>(*config_.rate_limit_per_min);
        bucket_refill_at_ = std::chrono::steady_clock::now();
    }
}

void HttpBackend::acquire_rate_token() {
    if (!config_.rate_limit_per_min) return;
    const double capacity = static_cast<double>(*config_.rate_limit_per_min);
    const double tokens_per_ms = capacity / 60000.0;
    while (true) {
        std::chrono::milliseconds wait{0};
        {
            std::lock_guard lock(bucket_mutex_);
            auto now = std::chrono::steady_clock::now();
            double elapsed_ms =
                std::chrono::duration<double, std::milli>(now - bucket_refill_at_)
                    .count();
            bucket_refill_at_ = now;
            bucket_tokens_ =
                std::min(capacity, bucket_tokens_ + elapsed_ms * tokens_per_ms);
            if (bucket_tokens_ >= 1.0) {
                bucket_tokens_ -= 1.0;
                return;
            }
            wait = std::chrono::milliseconds(
                static_cast<long>((1.0 - bucket_tokens_) / tokens_per_ms) + 1);
        }
        std::this_thread::sleep_for(wait);
    }
}

CompletionResponse HttpBackend::complete(const CompletionRequest& req) {
    validate_request(req);

    std::string token;
    if (!config_.auth_token_env.empty()) {
        const char* value = std::getenv(config_.auth_token_env.c_str());
        if (!value || !*value) {
            throw ConfigError("credential env var " + config_.auth_token_env +
                              " is not set");
        }
        token = value;
    }

    ordered_json body;
    body["model"] = req.model;
    body["prompt"] = req.prompt;
    body["max_tokens"] = req.max_tokens;
    body["temperature"] = req.temperature;
    if (!req.stop.empty()) body["stop"] = req.stop;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = std::chrono::milliseconds(
                static_cast<long>(config_.backoff_base_ms) << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        acquire_rate_token();

        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(0, config_.timeout_ms * 1000LL);
        client.set_read_timeout(0, config_.timeout_ms * 1000LL);
        client.set_write_timeout(0, config_.timeout_ms * 1000LL);
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

        calls_.fetch_add(1);
        auto start = std::chrono::steady_clock::now();
        httplib::Result result =
            client.Post(path_, headers, payload, "application/json");
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();

        if (!result) {
            last_error = httplib::to_string(result.error());
            continue;
        }
        if (transient_status(result->status)) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status >= 400) {
            throw PermanentRejection(
                "completion endpoint rejected the request: HTTP " +
                    std::to_string(result->status),
                result->status);
        }

        json parsed;
        try {
            parsed = json::parse(result->body);
        } catch (const json::exception& ex) {
            throw ProtocolError(std::string("malformed completion response: ") +
                                ex.what());
        }
        if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
            parsed["choices"].empty() ||
            !parsed["choices"][0].contains("text")) {
            throw ProtocolError(
                "completion response is missing choices[0].text");
        }
        CompletionResponse resp;
        resp.text = parsed["choices"][0]["text"].get<std::string>();
        if (parsed.contains("usage") && parsed["usage"].is_object()) {
            const json& usage = parsed["usage"];
            if (usage.contains("prompt_tokens")) {
                resp.prompt_tokens = usage["prompt_tokens"].get<std::int64_t>();
            }
            if (usage.contains("completion_tokens")) {
                resp.completion_tokens =
                    usage["completion_tokens"].get<std::int64_t>();
            }
        }
        resp.latency_ms = elapsed;
        return resp;
    }
    throw TransientExhausted("completion failed after " +
                             std::to_string(config_.max_retries + 1) +
                             " attempts: " + last_error);
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    if (config.kind == BackendKind::Mock) {
        return std::make_unique<ScriptedMockBackend>(config.mock_rules,
                                                     config.mock_default_text);
    }
    return std::make_unique<HttpBackend>(config);
}

std::unique_ptr<Backend> scripted_mock(std::vector<MockRule> rules,
                                       std::string default_text) {
    return std::make_unique<ScriptedMockBackend>(std::move(rules),
                                                 std::move(default_text));
}

BackendConfig parse_backend_config(const std::string& json_text) {
    json object;
    try {
        object = json::parse(json_text);
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("invalid backend config JSON: ") +
                          ex.what());
    }
    if (!object.is_object()) throw ConfigError("backend config must be an object");

    BackendConfig config;
    std::string kind = object.value("kind", "mock");
    if (kind == "http") {
        config.kind = BackendKind::Http;
    } else if (kind == "mock") {
        config.kind = BackendKind::Mock;
    } else {
        throw ConfigError("unknown backend kind \"" + kind + "\"");
    }
    config.endpoint_url = object.value("endpoint_url", "");
    config.auth_token_env = object.value("auth_token_env", "");
    config.timeout_ms = object.value("timeout_ms", config.timeout_ms);
    config.max_retries = object.value("max_retries", config.max_retries);
    config.backoff_base_ms =
        object.value("backoff_base_ms", config.backoff_base_ms);
    if (object.contains("rate_limit_per_min") &&
        !object["rate_limit_per_min"].is_null()) {
        config.rate_limit_per_min = object["rate_limit_per_min"].get<int>();
    }
    if (object.contains("mock_rules")) {
        for (const json& rule : object["mock_rules"]) {
            if (rule.is_array() && rule.size() == 2) {
                config.mock_rules.push_back(
                    {rule[0].get<std::string>(), rule[1].get<std::string>()});
            } else if (rule.is_object()) {
                config.mock_rules.push_back(
                    {rule.at("pattern").get<std::string>(),
                     rule.at("response").get<std::string>()});
            } else {
                throw ConfigError(
                    "mock_rules entries must be [pattern, response] pairs");
            }
        }
    }
    config.mock_default_text =
        object.value("mock_default_text", config.mock_default_text);
    if (config.kind == BackendKind::Http && config.endpoint_url.empty()) {
        throw ConfigError("http backend requires endpoint_url");
    }
    return config;
}

std::string backend_config_to_json(const BackendConfig& config) {
    ordered_json object;
    object["kind"] = config.kind == BackendKind::Http ? "http" : "mock";
    object["endpoint_url"] = config.endpoint_url;
    object["auth_token_env"] = config.auth_token_env;
    object["timeout_ms"] = config.timeout_ms;
    object["max_retries"] = config.max_retries;
    object["backoff_base_ms"] = config.backoff_base_ms;
    if (config.rate_limit_per_min) {
        object["rate_limit_per_min"] = *config.rate_limit_per_min;
    } else {
        object["rate_limit_per_min"] = nullptr;
    }
    ordered_json rules = ordered_json::array();
    for (const MockRule& rule : config.mock_rules) {
        ordered_json entry;
        entry["pattern"] = rule.pattern;
        entry["response"] = rule.response;
        rules.push_back(entry);
    }
    object["mock_rules"] = rules;
    object["mock_default_text"] = config.mock_default_text;
    return object.dump();
}

}  // namespace saot::backend
