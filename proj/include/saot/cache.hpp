#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "saot/backend.hpp"

namespace saot::backend {

// Stable request digest. The key is the lowercase hex SHA-256 of the
// canonical serialization
//     model 0x1f prompt 0x1f max_tokens 0x1f temperature 0x1f stop...
// where temperature uses the shortest round-trip decimal form and stop
// entries are joined with 0x1e. Equal requests produce equal keys on any
// platform.
std::string cache_key(const CompletionRequest& req);

class CacheCorruption : public BackendError {
public:
    using BackendError::BackendError;
};

struct CacheStats {
    std::int64_t entries = 0;
    std::int64_t bytes = 0;
    std::int64_t hits = 0;
    std::int64_t misses = 0;
};

// One file per key under <root>/<first-2-hex>/<key>.json, each holding the
// request and response as JSON. Append-only and human-inspectable. Writers
// publish entries with link(2) so concurrent misses on one key resolve to a
// single winning file and every caller returns the winner's text.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    // nullopt on miss. A present-but-unreadable entry (bad JSON, key/request
    // mismatch, truncated file) raises CacheCorruption naming the file; a
    // corrupt entry is never silently recomputed.
    std::optional<CompletionResponse> lookup(const CompletionRequest& req);

    // Persists the response for req. Returns the stored response, which is
    // the existing winner when another writer got there first.
    CompletionResponse store(const CompletionRequest& req,
                             const CompletionResponse& resp);

    CacheStats stats() const;
    std::int64_t hit_count() const { return hits_.load(); }
    std::int64_t miss_count() const { return misses_.load(); }

private:
    std::filesystem::path entry_path(const std::string& key) const;

    std::filesystem::path root_;
    std::atomic<std::int64_t> hits_{0};
    std::atomic<std::int64_t> misses_{0};
};

// Cache-through completion: hit -> stored response with from_cache=true and
// latency_ms=0, no backend call; miss -> backend.complete, persisted before
// returning.
CompletionResponse cached_complete(ResponseCache& cache, Backend& backend,
                                   const CompletionRequest& req);

// Backend view of cached_complete, for callers that take a Backend&.
// call_count still reports the inner backend's executed completions only.
class CachedBackend : public Backend {
public:
    CachedBackend(ResponseCache& cache, Backend& inner)
        : cache_(cache), inner_(inner) {}

    CompletionResponse complete(const CompletionRequest& req) override {
        return cached_complete(cache_, inner_, req);
    }
    std::int64_t call_count() const override { return inner_.call_count(); }

private:
    ResponseCache& cache_;
    Backend& inner_;
};

}  // namespace saot::backend
