#include "saot/runner.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "digest.hpp"
#include "json.hpp"
#include "saot/cache.hpp"

namespace saot::runner {

namespace fs = std::filesystem;

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kMaxFailureFraction = 0.10;

[[noreturn]] void config_error(const std::string& message) {
    throw Error("config: " + message);
}

json parse_json_or_fail(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& ex) {
        throw Error(what + ": invalid JSON: " + ex.what());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path temp = path;
    temp += ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write file: " + temp.string());
        out << content;
        out.flush();
        if (!out) throw Error("write failed: " + temp.string());
    }
    fs::rename(temp, path);
}

ordered_json extraction_to_json(const extraction::ExtractionPolicy& policy) {
    ordered_json object;
    object["occurrence"] = std::string(extraction::to_string(policy.occurrence));
    object["fallback"] = std::string(extraction::to_string(policy.fallback));
    ordered_json keywords;
    keywords["negative"] = policy.keywords[0];
    keywords["neutral"] = policy.keywords[1];
    keywords["positive"] = policy.keywords[2];
    object["keywords"] = keywords;
    return object;
}

extraction::ExtractionPolicy extraction_from_json(const json& object) {
    extraction::ExtractionPolicy policy;
    if (object.contains("occurrence")) {
        auto rule = extraction::parse_occurrence_rule(
            object["occurrence"].get<std::string>());
        if (!rule) config_error("extraction.occurrence must be last|first");
        policy.occurrence = *rule;
    }
    if (object.contains("fallback")) {
        auto fb =
            extraction::parse_fallback(object["fallback"].get<std::string>());
        if (!fb) {
            config_error(
                "extraction.fallback must be count_as_wrong|assign_neutral");
        }
        policy.fallback = *fb;
    }
    if (object.contains("keywords")) {
        const json& keywords = object["keywords"];
        static const char* names[] = {"negative", "neutral", "positive"};
        for (int i = 0; i < kPolarityCount; ++i) {
            if (keywords.contains(names[i])) {
                policy.keywords[i] =
                    keywords[names[i]].get<std::vector<std::string>>();
            }
        }
    }
    policy.validate();
    return policy;
}

ordered_json dataset_to_json(const DatasetSpec& spec) {
    ordered_json object;
    object["path"] = spec.path;
    object["format"] = spec.format;
    if (spec.name) {
        object["name"] = std::string(to_string(*spec.name));
    } else {
        object["name"] = nullptr;
    }
    object["flags_path"] = spec.flags_path;
    object["expected"] = spec.expected;
    return object;
}

DatasetSpec dataset_from_json(const json& object) {
    DatasetSpec spec;
    if (!object.contains("path")) config_error("dataset.path is required");
    spec.path = object["path"].get<std::string>();
    spec.format = object.value("format", spec.format);
    if (spec.format != "jsonl" && spec.format != "xml") {
        config_error("dataset.format must be jsonl|xml");
    }
    if (object.contains("name") && !object["name"].is_null()) {
        auto name = parse_dataset_name(object["name"].get<std::string>());
        if (!name) config_error("dataset.name must be restaurant|laptop");
        spec.name = *name;
    }
    spec.flags_path = object.value("flags_path", "");
    spec.expected = object.value("expected", spec.expected);
    if (spec.expected != "none" && spec.expected != "restaurant" &&
        spec.expected != "laptop") {
        config_error("dataset.expected must be restaurant|laptop|none");
    }
    return spec;
}

struct LoadedDataset {
    std::vector<corpus::SentimentInstance> instances;
    corpus::DatasetSummary summary;
    std::vector<std::string> warnings;
};

LoadedDataset load_dataset(const DatasetSpec& spec) {
    LoadedDataset loaded;
    if (spec.format == "xml") {
        if (!spec.name) {
            config_error("dataset.name is required for xml datasets");
        }
        corpus::XmlParseResult parsed =
            corpus::parse_semeval_xml_file(spec.path, *spec.name);
        loaded.instances = std::move(parsed.instances);
        loaded.warnings = std::move(parsed.warnings);
    } else {
        loaded.instances = corpus::parse_jsonl_file(spec.path);
    }
    if (!spec.flags_path.empty()) {
        auto flags = corpus::parse_flag_overlay_file(spec.flags_path);
        loaded.instances = corpus::overlay_implicit_flags(loaded.instances, flags);
    }
    loaded.summary = corpus::summarize(loaded.instances);
    return loaded;
}

ordered_json summary_to_json(const corpus::DatasetSummary& summary) {
    ordered_json object;
    object["negative"] = summary.negative;
    object["positive"] = summary.positive;
    object["neutral"] = summary.neutral;
    object["total"] = summary.total;
    object["isa_count"] = summary.isa_count;
    object["isa_percent_hundredths"] = summary.isa_percent_hundredths;
    return object;
}

corpus::DatasetSummary summary_from_json(const json& object) {
    corpus::DatasetSummary summary;
    summary.negative = object.at("negative").get<std::int64_t>();
    summary.positive = object.at("positive").get<std::int64_t>();
    summary.neutral = object.at("neutral").get<std::int64_t>();
    summary.total = object.at("total").get<std::int64_t>();
    summary.isa_count = object.at("isa_count").get<std::int64_t>();
    summary.isa_percent_hundredths =
        object.at("isa_percent_hundredths").get<std::int64_t>();
    return summary;
}

ordered_json run_config_to_ordered_json(const RunConfig& config) {
    ordered_json object;
    object["experiment_id"] = config.experiment_id;
    object["dataset"] = dataset_to_json(config.dataset);
    object["chain"] = std::string(chains::to_string(config.chain));
    object["backend"] =
        json::parse(backend::backend_config_to_json(config.backend));
    object["templates_dir"] = config.templates_dir;
    object["independent_reflect"] = config.independent_reflect;
    object["model"] = config.model;
    object["max_tokens"] = config.max_tokens;
    object["temperature"] = config.temperature;
    object["stop"] = config.stop;
    object["extraction"] = extraction_to_json(config.extraction);
    object["concurrency"] = config.concurrency;
    object["out_dir"] = config.out_dir;
    object["cache_dir"] = config.cache_dir;
    object["skip_validate"] = config.skip_validate;
    return object;
}

}  // namespace

std::string_view to_string(InstanceStatus status) {
    switch (status) {
        case InstanceStatus::Pending: return "pending";
        case InstanceStatus::Done: return "done";
        case InstanceStatus::Failed: return "failed";
    }
    return "unknown";
}

std::optional<InstanceStatus> parse_instance_status(std::string_view text) {
    if (text == "pending") return InstanceStatus::Pending;
    if (text == "done") return InstanceStatus::Done;
    if (text == "failed") return InstanceStatus::Failed;
    return std::nullopt;
}

RunConfig parse_run_config(const std::string& json_text) {
    json object = parse_json_or_fail(json_text, "run config");
    if (!object.is_object()) config_error("run config must be a JSON object");

    static const std::set<std::string> known_keys = {
        "experiment_id", "dataset",     "chain",       "backend",
        "templates_dir", "independent_reflect",        "model",
        "max_tokens",    "temperature", "stop",        "extraction",
        "concurrency",   "out_dir",     "cache_dir",   "skip_validate"};
    for (const auto& item : object.items()) {
        if (!known_keys.count(item.key())) {
            config_error("unknown key \"" + item.key() + "\"");
        }
    }

    RunConfig config;
    config.experiment_id = object.value("experiment_id", "");
    if (!object.contains("dataset")) config_error("dataset is required");
    config.dataset = dataset_from_json(object["dataset"]);
    if (object.contains("chain")) {
        auto kind = chains::parse_chain_kind(object["chain"].get<std::string>());
        if (!kind) config_error("chain must be direct|thor|saot");
        config.chain = *kind;
    }
    if (object.contains("backend")) {
        config.backend = backend::parse_backend_config(object["backend"].dump());
    }
    if (!object.contains("templates_dir")) {
        config_error("templates_dir is required");
    }
    config.templates_dir = object["templates_dir"].get<std::string>();
    config.independent_reflect =
        object.value("independent_reflect", config.independent_reflect);
    config.model = object.value("model", config.model);
    config.max_tokens = object.value("max_tokens", config.max_tokens);
    config.temperature = object.value("temperature", config.temperature);
    if (object.contains("stop")) {
        config.stop = object["stop"].get<std::vector<std::string>>();
    }
    if (object.contains("extraction")) {
        config.extraction = extraction_from_json(object["extraction"]);
    }
    config.concurrency = object.value("concurrency", config.concurrency);
    if (config.concurrency < 1) config_error("concurrency must be positive");
    if (config.max_tokens < 1) config_error("max_tokens must be positive");
    if (config.temperature < 0) config_error("temperature must be >= 0");
    config.out_dir = object.value("out_dir", config.out_dir);
    config.cache_dir = object.value("cache_dir", config.cache_dir);
    config.skip_validate = object.value("skip_validate", config.skip_validate);
    return config;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config(read_file(path));
}

std::string run_config_to_json(const RunConfig& config) {
    return run_config_to_ordered_json(config).dump(2);
}

std::string config_fingerprint(const RunConfig& config,
                               const std::string& template_set_hash) {
    // Only run-semantics fields; concurrency, directories and validation
    // switches may differ between run and resume.
    ordered_json object;
    object["dataset"] = dataset_to_json(config.dataset);
    object["chain"] = std::string(chains::to_string(config.chain));
    object["backend"] =
        json::parse(backend::backend_config_to_json(config.backend));
    object["independent_reflect"] = config.independent_reflect;
    object["model"] = config.model;
    object["max_tokens"] = config.max_tokens;
    object["temperature"] = config.temperature;
    object["stop"] = config.stop;
    object["extraction"] = extraction_to_json(config.extraction);
    object["template_set_hash"] = template_set_hash;
    return detail::sha256_hex(object.dump());
}

std::int64_t ExperimentManifest::count(InstanceStatus s) const {
    std::int64_t n = 0;
    for (const auto& [_, status] : status) {
        if (status == s) ++n;
    }
    return n;
}

std::string manifest_to_json(const ExperimentManifest& manifest) {
    ordered_json object;
    object["experiment_id"] = manifest.experiment_id;
    object["created_at"] = manifest.created_at;
    object["config"] = run_config_to_ordered_json(manifest.config);
    object["template_set_hash"] = manifest.template_set_hash;
    object["fingerprint"] = manifest.fingerprint;
    object["dataset_summary"] = summary_to_json(manifest.dataset_summary);
    ordered_json status;
    for (const auto& [id, s] : manifest.status) {
        status[id] = std::string(to_string(s));
    }
    object["status"] = status;
    ordered_json errors;
    for (const auto& [id, message] : manifest.errors) {
        errors[id] = message;
    }
    object["errors"] = errors;
    return object.dump(2) + "\n";
}

ExperimentManifest manifest_from_json(const std::string& text) {
    json object = parse_json_or_fail(text, "manifest");
    ExperimentManifest manifest;
    manifest.experiment_id = object.at("experiment_id").get<std::string>();
    manifest.created_at = object.at("created_at").get<std::string>();
    manifest.config = parse_run_config(object.at("config").dump());
    manifest.template_set_hash =
        object.at("template_set_hash").get<std::string>();
    manifest.fingerprint = object.at("fingerprint").get<std::string>();
    manifest.dataset_summary = summary_from_json(object.at("dataset_summary"));
    for (const auto& item : object.at("status").items()) {
        auto status = parse_instance_status(item.value().get<std::string>());
        if (!status) throw Error("manifest: unknown instance status");
        manifest.status[item.key()] = *status;
    }
    if (object.contains("errors")) {
        for (const auto& item : object.at("errors").items()) {
            manifest.errors[item.key()] = item.value().get<std::string>();
        }
    }
    return manifest;
}

ExperimentManifest load_manifest(const std::string& out_dir,
                                 const std::string& experiment_id) {
    fs::path path = fs::path(out_dir) / experiment_id / "manifest.json";
    if (!fs::exists(path)) {
        throw Error("unknown experiment \"" + experiment_id + "\": no " +
                    path.string());
    }
    return manifest_from_json(read_file(path.string()));
}

std::string generate_experiment_id() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
    std::random_device rd;
    std::uniform_int_distribution<int> dist(0, 15);
    static const char* hex = "0123456789abcdef";
    std::string suffix;
    for (int i = 0; i < 6; ++i) suffix.push_back(hex[dist(rd)]);
    return std::string("exp-") + stamp + "-" + suffix;
}

std::string iso8601_utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

// Sorted by instance id; torn trailing lines tolerated; duplicate ids keep
// the last complete record.
std::vector<eval::PredictionRecord> load_records_file(const fs::path& path) {
    std::vector<eval::PredictionRecord> records;
    if (!fs::exists(path)) return records;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);

    std::map<std::string, eval::PredictionRecord> by_id;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].find_first_not_of(" \t\r") == std::string::npos) continue;
        eval::PredictionRecord record;
        try {
            record = eval::record_from_json(lines[i]);
        } catch (const std::exception& ex) {
            if (i + 1 == lines.size()) continue;  // torn trailing write
            throw Error("predictions.jsonl line " + std::to_string(i + 1) +
                        ": " + ex.what());
        }
        by_id[record.instance_id] = record;
    }
    for (const auto& [_, record] : by_id) records.push_back(record);
    return records;
}

// Single writer for record files and manifest updates.
class ExperimentWriter {
public:
    ExperimentWriter(fs::path exp_dir, ExperimentManifest& manifest)
        : exp_dir_(std::move(exp_dir)),
          manifest_(manifest),
          traces_(exp_dir_ / "traces.jsonl", std::ios::binary | std::ios::app),
          predictions_(exp_dir_ / "predictions.jsonl",
                       std::ios::binary | std::ios::app) {
        if (!traces_ || !predictions_) {
            throw Error("cannot open record files under " + exp_dir_.string());
        }
    }

    void record_done(const std::string& id, const chains::ChainTrace& trace,
                     const eval::PredictionRecord& record) {
        std::lock_guard lock(mutex_);
        traces_ << chains::trace_to_json(trace) << "\n";
        traces_.flush();
        predictions_ << eval::record_to_json(record) << "\n";
        predictions_.flush();
        manifest_.status[id] = InstanceStatus::Done;
        manifest_.errors.erase(id);
        persist_manifest();
    }

    void record_failed(const std::string& id, const std::string& message) {
        std::lock_guard lock(mutex_);
        manifest_.status[id] = InstanceStatus::Failed;
        manifest_.errors[id] = message;
        persist_manifest();
    }

private:
    void persist_manifest() {
        write_file_atomic(exp_dir_ / "manifest.json",
                          manifest_to_json(manifest_));
    }

    fs::path exp_dir_;
    ExperimentManifest& manifest_;
    std::ofstream traces_;
    std::ofstream predictions_;
    std::mutex mutex_;
};

struct EngineResult {
    std::int64_t processed = 0;
    std::int64_t failed = 0;
    bool interrupted = false;
};

EngineResult execute_instances(
    const ExperimentManifest& manifest_snapshot, ExperimentManifest& manifest,
    const std::vector<corpus::SentimentInstance>& instances,
    const chains::TemplateSet& templates, backend::Backend& raw_backend,
    const RunHooks& hooks, const fs::path& exp_dir) {
    const RunConfig& config = manifest.config;

    backend::ResponseCache cache(config.cache_dir);
    backend::CachedBackend cached(cache, raw_backend);

    chains::ChainOptions options;
    options.request.model = config.model;
    options.request.max_tokens = config.max_tokens;
    options.request.temperature = config.temperature;
    options.request.stop = config.stop;
    options.independent_reflect = config.independent_reflect;

    std::vector<const corpus::SentimentInstance*> work;
    for (const corpus::SentimentInstance& instance : instances) {
        auto it = manifest_snapshot.status.find(instance.id);
        if (it != manifest_snapshot.status.end() &&
            it->second == InstanceStatus::Done) {
            continue;
        }
        work.push_back(&instance);
    }

    ExperimentWriter writer(exp_dir, manifest);
    std::atomic<std::size_t> next{0};
    std::atomic<std::int64_t> processed{0};
    std::atomic<std::int64_t> failed{0};
    std::atomic<std::size_t> completed{0};
    std::atomic<bool> interrupted{false};

    auto stop_requested = [&]() {
        return (hooks.stop && hooks.stop->stop_requested()) ||
               interrupted.load();
    };

    auto worker = [&]() {
        while (true) {
            if (stop_requested()) {
                interrupted.store(true);
                return;
            }
            std::size_t i = next.fetch_add(1);
            if (i >= work.size()) return;
            const corpus::SentimentInstance& instance = *work[i];
            processed.fetch_add(1);
            try {
                chains::ChainTrace trace = chains::run_chain(
                    config.chain, cached, templates, instance, options);
                auto label =
                    extraction::extract_polarity(trace.final_text,
                                                 config.extraction);
                eval::PredictionRecord record;
                record.instance_id = instance.id;
                record.gold = instance.gold;
                record.predicted =
                    label ? label : extraction::resolve_unparseable(config.extraction);
                record.is_implicit = instance.is_implicit;
                record.unparseable = !label.has_value();
                writer.record_done(instance.id, trace, record);
            } catch (const std::exception& ex) {
                failed.fetch_add(1);
                writer.record_failed(instance.id, ex.what());
            }
            std::size_t done_now = completed.fetch_add(1) + 1;
            if (hooks.after_instance) hooks.after_instance(instance.id, done_now);
        }
    };

    int concurrency = std::max(1, config.concurrency);
    std::vector<std::thread> pool;
    pool.reserve(concurrency);
    for (int t = 0; t < concurrency; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    EngineResult result;
    result.processed = processed.load();
    result.failed = failed.load();
    result.interrupted = stop_requested() && manifest.count(InstanceStatus::Pending) > 0;
    return result;
}

// Table-2-style artifacts for a finished experiment, written next to its
// records.
void write_experiment_reports(const fs::path& exp_dir,
                              const ExperimentManifest& manifest) {
    std::vector<eval::PredictionRecord> records =
        load_records_file(exp_dir / "predictions.jsonl");
    eval::EvalReport report =
        eval::build_report(records, manifest.fingerprint);

    eval::RowKey key{manifest.config.model, manifest.config.chain};
    eval::ExperimentScores scores;
    eval::DatasetScores ds = eval::scores_from_report(report);
    if (manifest.config.dataset.name == DatasetName::Laptop) {
        scores.laptop = ds;
    } else {
        scores.restaurant = ds;
    }
    std::map<eval::RowKey, eval::ExperimentScores> rows{{key, scores}};

    eval::ReportOptions options;
    options.notes.push_back(
        "scores are macro-F1 in percent; ISA is macro-F1 on the implicit slice");
    options.notes.push_back(
        "unparseable fallback: " +
        std::string(extraction::to_string(manifest.config.extraction.fallback)) +
        ", occurrence rule: " +
        std::string(
            extraction::to_string(manifest.config.extraction.occurrence)));
    eval::RenderedReport rendered =
        eval::render_report(rows, eval::supervised_baselines(), options);

    write_file_atomic(exp_dir / "report.txt", rendered.text);
    write_file_atomic(exp_dir / "report.csv", rendered.csv);

    ordered_json out;
    out["experiment_id"] = manifest.experiment_id;
    out["model"] = manifest.config.model;
    out["chain"] = std::string(chains::to_string(manifest.config.chain));
    out["dataset"] = manifest.config.dataset.name
                         ? std::string(to_string(*manifest.config.dataset.name))
                         : "unknown";
    out["report"] = json::parse(eval::eval_report_to_json(report));
    write_file_atomic(exp_dir / "report.json", out.dump(2) + "\n");
}

RunOutcome finish_run(ExperimentManifest& manifest, const EngineResult& engine,
                      backend::Backend& raw_backend, const fs::path& exp_dir) {
    RunOutcome outcome;
    outcome.manifest = manifest;
    outcome.processed = engine.processed;
    outcome.failed = engine.failed;
    outcome.backend_calls = raw_backend.call_count();
    outcome.interrupted = engine.interrupted;

    std::int64_t total = static_cast<std::int64_t>(manifest.status.size());
    std::int64_t failed_total = manifest.count(InstanceStatus::Failed);
    if (total > 0 &&
        static_cast<double>(failed_total) / static_cast<double>(total) >
            kMaxFailureFraction) {
        outcome.exit_code = 3;
    }
    if (!engine.interrupted) {
        write_experiment_reports(exp_dir, manifest);
    }
    return outcome;
}

void require_templates(const chains::TemplateSet& templates,
                       chains::ChainKind kind) {
    for (const std::string& name : chains::required_templates(kind)) {
        if (!templates.contains(name)) {
            config_error("template set is missing \"" + name + "\" (required by " +
                         std::string(chains::to_string(kind)) + ")");
        }
    }
}

}  // namespace

RunOutcome run_experiment(const RunConfig& input_config, const RunHooks& hooks) {
    RunConfig config = input_config;

    chains::TemplateSet templates =
        chains::TemplateSet::load_directory(config.templates_dir);
    require_templates(templates, config.chain);
    config.extraction.validate();

    LoadedDataset loaded = load_dataset(config.dataset);
    if (loaded.instances.empty()) config_error("dataset is empty");
    for (const corpus::SentimentInstance& instance : loaded.instances) {
        if (instance.dataset != loaded.instances.front().dataset) {
            config_error("dataset file mixes restaurant and laptop instances; "
                         "an experiment covers one dataset");
        }
    }
    if (!config.dataset.name) {
        config.dataset.name = loaded.instances.front().dataset;
    }

    if (!config.skip_validate && config.dataset.expected != "none") {
        auto expected_name = parse_dataset_name(config.dataset.expected);
        corpus::ValidationReport report = corpus::validate_expected(
            loaded.summary, corpus::expected_summary(*expected_name));
        if (!report.pass) {
            throw ValidationFailure("dataset validation failed:\n" +
                                    report.to_string());
        }
    }

    if (config.experiment_id.empty()) {
        config.experiment_id = generate_experiment_id();
    }
    fs::path exp_dir = fs::path(config.out_dir) / config.experiment_id;
    if (fs::exists(exp_dir / "manifest.json")) {
        throw Error("experiment \"" + config.experiment_id +
                    "\" already exists; use resume or pick a new id");
    }
    fs::create_directories(exp_dir);

    ExperimentManifest manifest;
    manifest.experiment_id = config.experiment_id;
    manifest.created_at = iso8601_utc_now();
    manifest.config = config;
    manifest.template_set_hash = templates.content_hash();
    manifest.fingerprint = config_fingerprint(config, manifest.template_set_hash);
    manifest.dataset_summary = loaded.summary;
    for (const corpus::SentimentInstance& instance : loaded.instances) {
        manifest.status[instance.id] = InstanceStatus::Pending;
    }
    write_file_atomic(exp_dir / "manifest.json", manifest_to_json(manifest));

    auto raw_backend = hooks.make_backend ? hooks.make_backend(config.backend)
                                          : backend::make_backend(config.backend);
    ExperimentManifest snapshot = manifest;
    EngineResult engine = execute_instances(snapshot, manifest, loaded.instances,
                                            templates, *raw_backend, hooks,
                                            exp_dir);
    return finish_run(manifest, engine, *raw_backend, exp_dir);
}

RunOutcome resume(const std::string& out_dir, const std::string& experiment_id,
                  const RunHooks& hooks) {
    ExperimentManifest manifest = load_manifest(out_dir, experiment_id);
    fs::path exp_dir = fs::path(out_dir) / experiment_id;

    chains::TemplateSet templates =
        chains::TemplateSet::load_directory(manifest.config.templates_dir);
    require_templates(templates, manifest.config.chain);

    std::string fingerprint =
        config_fingerprint(manifest.config, templates.content_hash());
    if (fingerprint != manifest.fingerprint) {
        throw ConfigDrift(
            "experiment \"" + experiment_id +
            "\": config or templates changed since creation; start a new "
            "experiment instead of resuming");
    }

    LoadedDataset loaded = load_dataset(manifest.config.dataset);
    if (corpus::summarize(loaded.instances) != manifest.dataset_summary) {
        throw ConfigDrift("experiment \"" + experiment_id +
                          "\": dataset changed since creation");
    }
    for (const corpus::SentimentInstance& instance : loaded.instances) {
        if (!manifest.status.count(instance.id)) {
            throw ConfigDrift("experiment \"" + experiment_id +
                              "\": dataset instance \"" + instance.id +
                              "\" is not in the manifest");
        }
    }

    auto raw_backend = hooks.make_backend
                           ? hooks.make_backend(manifest.config.backend)
                           : backend::make_backend(manifest.config.backend);
    ExperimentManifest snapshot = manifest;
    EngineResult engine = execute_instances(snapshot, manifest, loaded.instances,
                                            templates, *raw_backend, hooks,
                                            exp_dir);
    return finish_run(manifest, engine, *raw_backend, exp_dir);
}

std::vector<eval::PredictionRecord> load_experiment_records(
    const std::string& out_dir, const std::string& experiment_id) {
    return load_records_file(fs::path(out_dir) / experiment_id /
                             "predictions.jsonl");
}

std::string report(const ReportRequest& request) {
    std::map<eval::RowKey, eval::ExperimentScores> rows;
    struct Loaded {
        ExperimentManifest manifest;
        eval::EvalReport report;
    };
    std::vector<Loaded> loaded;

    for (const std::string& id : request.experiment_ids) {
        ExperimentManifest manifest = load_manifest(request.out_dir, id);
        std::int64_t pending = manifest.count(InstanceStatus::Pending);
        std::int64_t failed = manifest.count(InstanceStatus::Failed);
        if ((pending > 0 || failed > 0) && !request.allow_partial) {
            throw Error("experiment \"" + id + "\" is incomplete (" +
                        std::to_string(pending) + " pending, " +
                        std::to_string(failed) +
                        " failed); pass --allow-partial to report anyway");
        }
        std::vector<eval::PredictionRecord> records =
            load_experiment_records(request.out_dir, id);
        eval::EvalReport report =
            eval::build_report(records, manifest.fingerprint);

        eval::RowKey key{manifest.config.model, manifest.config.chain};
        eval::DatasetScores scores = eval::scores_from_report(report);
        bool laptop = manifest.config.dataset.name == DatasetName::Laptop;
        auto& slot = rows[key];
        auto& cell = laptop ? slot.laptop : slot.restaurant;
        if (cell) {
            throw Error("two experiments map to the same (model, chain, dataset)"
                        " cell; report them separately");
        }
        cell = scores;
        loaded.push_back({std::move(manifest), std::move(report)});
    }

    if (request.format == "json") {
        ordered_json out;
        ordered_json baselines = ordered_json::array();
        for (const eval::BaselineRow& b : eval::supervised_baselines()) {
            ordered_json row;
            row["model"] = b.model;
            row["restaurant"] = {{"f1", b.restaurant.f1}, {"isa", b.restaurant.isa}};
            row["laptop"] = {{"f1", b.laptop.f1}, {"isa", b.laptop.isa}};
            baselines.push_back(row);
        }
        out["baselines"] = baselines;
        ordered_json experiments = ordered_json::array();
        for (const Loaded& item : loaded) {
            ordered_json row;
            row["experiment_id"] = item.manifest.experiment_id;
            row["model"] = item.manifest.config.model;
            row["chain"] =
                std::string(chains::to_string(item.manifest.config.chain));
            row["dataset"] =
                item.manifest.config.dataset.name
                    ? std::string(to_string(*item.manifest.config.dataset.name))
                    : "unknown";
            row["independent_reflect"] =
                item.manifest.config.independent_reflect;
            row["report"] =
                json::parse(eval::eval_report_to_json(item.report));
            experiments.push_back(row);
        }
        out["experiments"] = experiments;
        return out.dump(2) + "\n";
    }

    eval::ReportOptions options;
    options.include_deltas = request.include_deltas;
    options.notes.push_back(
        "scores are macro-F1 in percent; ISA is macro-F1 on the implicit "
        "slice; undefined precision/recall/F1 count as 0");
    for (const Loaded& item : loaded) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "unparseable_rate=%.4f fallback=%s reflect=%s",
                      item.report.unparseable_rate,
                      std::string(extraction::to_string(
                                      item.manifest.config.extraction.fallback))
                          .c_str(),
                      item.manifest.config.independent_reflect ? "independent"
                                                               : "chained");
        options.notes.push_back(item.manifest.experiment_id + " (" +
                                eval::row_label({item.manifest.config.model,
                                                 item.manifest.config.chain}) +
                                "): " + buf);
    }
    eval::RenderedReport rendered =
        eval::render_report(rows, eval::supervised_baselines(), options);
    if (request.format == "csv") return rendered.csv;

    std::ostringstream text;
    text << rendered.text;
    if (!loaded.empty()) {
        text << "\nSlice view (macro-F1 % / accuracy %)\n";
        for (const Loaded& item : loaded) {
            auto line = [&](const char* name, const eval::SliceMetrics& m) {
                char buf[96];
                std::snprintf(buf, sizeof(buf), "  %-4s %6.2f / %6.2f  (n=%lld)",
                              name, m.macro_f1 * 100.0, m.accuracy * 100.0,
                              static_cast<long long>(m.support));
                text << buf << "\n";
            };
            text << item.manifest.experiment_id << " ["
                 << eval::row_label({item.manifest.config.model,
                                     item.manifest.config.chain})
                 << ", "
                 << (item.manifest.config.dataset.name
                         ? to_string(*item.manifest.config.dataset.name)
                         : "unknown")
                 << "]\n";
            line("all", item.report.all);
            line("isa", item.report.isa);
            line("esa", item.report.esa);
        }
    }
    return text.str();
}

}  // namespace saot::runner
