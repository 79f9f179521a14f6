#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "saot/backend.hpp"
#include "saot/chains.hpp"
#include "saot/corpus.hpp"
#include "saot/eval.hpp"
#include "saot/extraction.hpp"

namespace saot::runner {

enum class InstanceStatus { Pending, Done, Failed };

std::string_view to_string(InstanceStatus status);
std::optional<InstanceStatus> parse_instance_status(std::string_view text);

struct DatasetSpec {
    std::string path;
    std::string format = "jsonl";  // "jsonl" or "xml"
    std::optional<DatasetName> name;  // required for xml (jsonl carries it)
    std::string flags_path;           // optional implicit-flag overlay
    // "restaurant" / "laptop" validate against the shipped expectations,
    // "none" skips the expectation lookup entirely.
    std::string expected = "none";
};

struct RunConfig {
    std::string experiment_id;  // generated when empty
    DatasetSpec dataset;
    chains::ChainKind chain = chains::ChainKind::Direct;
    backend::BackendConfig backend;
    std::string templates_dir;
    bool independent_reflect = false;
    std::string model = "mock";
    int max_tokens = 256;
    double temperature = 0.0;
    std::vector<std::string> stop;
    extraction::ExtractionPolicy extraction;
    int concurrency = 1;
    std::string out_dir = "out";
    std::string cache_dir = "cache";
    bool skip_validate = false;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& config);

// Everything that defines the meaning of a run (dataset, chain, model,
// decoding knobs, template hash, extraction policy, backend sans credential).
// Concurrency, directories and validation switches are excluded: they may
// change between run and resume without changing results.
std::string config_fingerprint(const RunConfig& config,
                               const std::string& template_set_hash);

struct ExperimentManifest {
    std::string experiment_id;
    std::string created_at;  // ISO-8601 UTC
    RunConfig config;        // effective config, embedded
    std::string template_set_hash;
    std::string fingerprint;
    corpus::DatasetSummary dataset_summary;
    std::map<std::string, InstanceStatus> status;  // keys = instance ids
    std::map<std::string, std::string> errors;     // failed ids -> message

    std::int64_t count(InstanceStatus s) const;
};

std::string manifest_to_json(const ExperimentManifest& manifest);
ExperimentManifest manifest_from_json(const std::string& text);
ExperimentManifest load_manifest(const std::string& out_dir,
                                 const std::string& experiment_id);

// Resume refuses to run when the stored fingerprint no longer matches the
// reconstructed config (template edits, backend or policy changes).
class ConfigDrift : public Error {
public:
    using Error::Error;
};

class ValidationFailure : public Error {
public:
    using Error::Error;
};

// Cooperative interruption: checked between instances. The CLI wires SIGINT
// to it; tests trigger it from the after-instance hook.
class StopToken {
public:
    void request_stop() { stop_.store(true); }
    bool stop_requested() const { return stop_.load(); }

private:
    std::atomic<bool> stop_{false};
};

struct RunHooks {
    // Called after an instance's records are persisted (any thread).
    std::function<void(const std::string& instance_id, std::size_t completed)>
        after_instance;
    std::shared_ptr<StopToken> stop;
    // Test seam: overrides backend construction (default: backend::make_backend).
    std::function<std::unique_ptr<backend::Backend>(
        const backend::BackendConfig&)>
        make_backend;
};

struct RunOutcome {
    ExperimentManifest manifest;
    std::int64_t processed = 0;  // instances attempted in this invocation
    std::int64_t failed = 0;
    std::int64_t backend_calls = 0;
    bool interrupted = false;
    // 0 success, 2 dataset validation failure, 3 excessive failures (>10%).
    int exit_code = 0;
};

// Processes every instance through the configured chain once, appending
// ChainTrace and PredictionRecord JSONL per instance and updating the
// manifest transactionally. Output layout:
//   <out>/<experiment_id>/{manifest.json, traces.jsonl, predictions.jsonl,
//                          report.txt, report.csv, report.json}
RunOutcome run_experiment(const RunConfig& config, const RunHooks& hooks = {});

// Same contract over Pending/Failed instances only; Done work is untouched.
RunOutcome resume(const std::string& out_dir, const std::string& experiment_id,
                  const RunHooks& hooks = {});

struct ReportRequest {
    std::string out_dir = "out";
    std::vector<std::string> experiment_ids;
    bool allow_partial = false;
    bool include_deltas = false;
    std::string format = "text";  // text | csv | json
};

// Renders the cross-experiment table (baselines + one row per model/chain).
std::string report(const ReportRequest& request);

// Records sorted by instance id with torn trailing lines tolerated and
// duplicate ids deduplicated (last complete record wins).
std::vector<eval::PredictionRecord> load_experiment_records(
    const std::string& out_dir, const std::string& experiment_id);

std::string generate_experiment_id();
std::string iso8601_utc_now();

}  // namespace saot::runner
