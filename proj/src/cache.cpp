#include "saot/cache.hpp"

#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "digest.hpp"
#include "json.hpp"

namespace saot::backend {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr char kFieldSep = '\x1f';
constexpr char kStopSep = '\x1e';

ordered_json request_to_json(const CompletionRequest& req) {
    ordered_json object;
    object["model"] = req.model;
    object["prompt"] = req.prompt;
    object["max_tokens"] = req.max_tokens;
    object["temperature"] = req.temperature;
    object["stop"] = req.stop;
    return object;
}

CompletionRequest request_from_json(const json& object) {
    CompletionRequest req;
    req.model = object.at("model").get<std::string>();
    req.prompt = object.at("prompt").get<std::string>();
    req.max_tokens = object.at("max_tokens").get<int>();
    req.temperature = object.at("temperature").get<double>();
    req.stop = object.at("stop").get<std::vector<std::string>>();
    return req;
}

struct CacheEntry {
    CompletionRequest request;
    CompletionResponse response;
};

std::string entry_to_json(const std::string& key, const CacheEntry& entry) {
    ordered_json object;
    object["key"] = key;
    object["request"] = request_to_json(entry.request);
    ordered_json resp;
    resp["text"] = entry.response.text;
    if (entry.response.prompt_tokens) {
        resp["prompt_tokens"] = *entry.response.prompt_tokens;
    } else {
        resp["prompt_tokens"] = nullptr;
    }
    if (entry.response.completion_tokens) {
        resp["completion_tokens"] = *entry.response.completion_tokens;
    } else {
        resp["completion_tokens"] = nullptr;
    }
    object["response"] = resp;
    return object.dump(2) + "\n";
}

CacheEntry read_entry(const std::filesystem::path& path,
                      const std::string& expected_key) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CacheCorruption("cache entry unreadable: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    json object;
    try {
        object = json::parse(buf.str());
    } catch (const json::exception& ex) {
        throw CacheCorruption("cache entry " + path.string() +
                              " holds invalid JSON: " + ex.what());
    }
    CacheEntry entry;
    try {
        if (object.at("key").get<std::string>() != expected_key) {
            throw CacheCorruption("cache entry " + path.string() +
                                  " carries a foreign key");
        }
        entry.request = request_from_json(object.at("request"));
        const json& resp = object.at("response");
        entry.response.text = resp.at("text").get<std::string>();
        if (!resp.at("prompt_tokens").is_null()) {
            entry.response.prompt_tokens =
                resp.at("prompt_tokens").get<std::int64_t>();
        }
        if (!resp.at("completion_tokens").is_null()) {
            entry.response.completion_tokens =
                resp.at("completion_tokens").get<std::int64_t>();
        }
    } catch (const json::exception& ex) {
        throw CacheCorruption("cache entry " + path.string() +
                              " is missing fields: " + ex.what());
    }
    return entry;
}

}  // namespace

std::string cache_key(const CompletionRequest& req) {
    std::string canonical;
    canonical += req.model;
    canonical += kFieldSep;
    canonical += req.prompt;
    canonical += kFieldSep;
    canonical += std::to_string(req.max_tokens);
    canonical += kFieldSep;
    canonical += detail::shortest_double(req.temperature);
    canonical += kFieldSep;
    for (std::size_t i = 0; i < req.stop.size(); ++i) {
        if (i > 0) canonical += kStopSep;
        canonical += req.stop[i];
    }
    return detail::sha256_hex(canonical);
}

ResponseCache::ResponseCache(std::filesystem::path root)
    : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::filesystem::path ResponseCache::entry_path(const std::string& key) const {
    return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CompletionResponse> ResponseCache::lookup(
    const CompletionRequest& req) {
    const std::string key = cache_key(req);
    const std::filesystem::path path = entry_path(key);
    if (!std::filesystem::exists(path)) {
        misses_.fetch_add(1);
        return std::nullopt;
    }
    CacheEntry entry = read_entry(path, key);
    if (entry.request != req) {
        throw CacheCorruption("cache entry " + path.string() +
                              " does not match the request it is keyed for");
    }
    hits_.fetch_add(1);
    CompletionResponse resp = entry.response;
    resp.from_cache = true;
    resp.latency_ms = 0;
    return resp;
}

CompletionResponse ResponseCache::store(const CompletionRequest& req,
                                        const CompletionResponse& resp) {
    const std::string key = cache_key(req);
    const std::filesystem::path path = entry_path(key);
    std::filesystem::create_directories(path.parent_path());

    static std::atomic<unsigned> temp_counter{0};
    std::filesystem::path temp =
        path.parent_path() /
        (key + ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(temp_counter.fetch_add(1)));
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw CacheCorruption("cannot write cache entry: " + temp.string());
        }
        out << entry_to_json(key, {req, resp});
    }
    // link(2) publishes the complete file; with concurrent misses the first
    // publisher wins and everyone returns the winning text.
    if (::link(temp.c_str(), path.c_str()) != 0) {
        int err = errno;
        std::filesystem::remove(temp);
        if (err != EEXIST) {
            throw CacheCorruption("cannot publish cache entry " + path.string() +
                                  ": " + std::strerror(err));
        }
        CacheEntry winner = read_entry(path, key);
        CompletionResponse out = winner.response;
        out.from_cache = false;
        out.latency_ms = resp.latency_ms;
        return out;
    }
    std::filesystem::remove(temp);
    return resp;
}

CacheStats ResponseCache::stats() const {
    CacheStats stats;
    stats.hits = hits_.load();
    stats.misses = misses_.load();
    if (!std::filesystem::exists(root_)) return stats;
    for (const auto& entry :
         std::filesystem::recursive_directory_iterator(root_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            ++stats.entries;
            stats.bytes += static_cast<std::int64_t>(entry.file_size());
        }
    }
    return stats;
}

CompletionResponse cached_complete(ResponseCache& cache, Backend& backend,
                                   const CompletionRequest& req) {
    if (auto hit = cache.lookup(req)) return *hit;
    CompletionResponse fresh = backend.complete(req);
    fresh.from_cache = false;
    return cache.store(req, fresh);
}

}  // namespace saot::backend
