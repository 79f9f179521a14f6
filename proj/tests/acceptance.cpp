// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// gating criterion fails. Criterion 8 (live endpoint smoke) is optional and
// never gates.

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "saot/backend.hpp"
#include "saot/cache.hpp"
#include "saot/chains.hpp"
#include "saot/corpus.hpp"
#include "saot/eval.hpp"
#include "saot/extraction.hpp"
#include "saot/runner.hpp"

namespace fs = std::filesystem;
using namespace saot;
using Clock = std::chrono::steady_clock;

namespace {

struct AcceptanceFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define ACC_REQUIRE(cond, message)                                     \
    do {                                                               \
        if (!(cond)) throw AcceptanceFailure(std::string() + message); \
    } while (0)

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TempDir {
    fs::path path;
    TempDir() {
        static std::atomic<unsigned> counter{0};
        path = fs::temp_directory_path() /
               ("saot-acceptance-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter.fetch_add(1)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

// --- criterion 1: dataset accounting ---------------------------------------

// Synthesizes a SemEval-style test file with the given gold distribution,
// one aspect term per sentence plus a few sentences without terms.
std::string synth_semeval_xml(const std::string& prefix, int negative,
                              int positive, int neutral) {
    std::ostringstream xml;
    xml << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<sentences>\n";
    int index = 0;
    auto emit = [&](const char* polarity, int count) {
        for (int i = 0; i < count; ++i, ++index) {
            xml << "  <sentence id=\"" << prefix << index << "\">\n"
                << "    <text>review " << index << " mentions the "
                << "item in passing</text>\n"
                << "    <aspectTerms>\n"
                << "      <aspectTerm term=\"item\" polarity=\"" << polarity
                << "\"/>\n"
                << "    </aspectTerms>\n"
                << "  </sentence>\n";
        }
    };
    emit("negative", negative);
    emit("positive", positive);
    emit("neutral", neutral);
    // annotation-free sentences contribute no instances
    for (int i = 0; i < 3; ++i) {
        xml << "  <sentence id=\"" << prefix << "pad" << i
            << "\"><text>no aspects annotated here</text></sentence>\n";
    }
    xml << "</sentences>\n";
    return xml.str();
}

std::string synth_overlay(const std::string& prefix, int implicit_count) {
    std::ostringstream out;
    for (int i = 0; i < implicit_count; ++i) {
        out << "{\"id\":\"" << prefix << i << "#0\",\"is_implicit\":true}\n";
    }
    return out.str();
}

void check_accounting(DatasetName name, const std::string& prefix,
                      int negative, int positive, int neutral, int implicit,
                      const std::string& expected_percent) {
    std::string xml = synth_semeval_xml(prefix, negative, positive, neutral);
    auto parsed = corpus::parse_semeval_xml(xml, name);
    std::istringstream overlay(synth_overlay(prefix, implicit));
    auto flags = corpus::parse_flag_overlay(overlay);
    auto flagged = corpus::overlay_implicit_flags(parsed.instances, flags);
    auto summary = corpus::summarize(flagged);
    auto report =
        corpus::validate_expected(summary, corpus::expected_summary(name));
    ACC_REQUIRE(report.pass, std::string(to_string(name)) +
                                 " accounting mismatch:\n" + report.to_string());
    ACC_REQUIRE(summary.isa_percent_str() == expected_percent,
                std::string(to_string(name)) + " isa% " +
                    summary.isa_percent_str() + " != " + expected_percent);
}

void criterion1_dataset_accounting() {
    auto start = Clock::now();
    check_accounting(DatasetName::Restaurant, "r", 196, 728, 196, 267, "23.83");
    check_accounting(DatasetName::Laptop, "l", 128, 341, 169, 175, "27.42");
    double elapsed = seconds_since(start);
    ACC_REQUIRE(elapsed < 1.0,
                "accounting took " + std::to_string(elapsed) + "s (limit 1s)");
}

// --- criterion 2: improvement arithmetic -----------------------------------

void criterion2_improvement_arithmetic() {
    double restaurant = eval::improvement_delta(75.27, 30.02);
    double laptop = eval::improvement_delta(76.50, 25.77);
    ACC_REQUIRE(fmt2(restaurant) == "45.25",
                "delta(75.27, 30.02) = " + fmt2(restaurant) + ", want 45.25");
    ACC_REQUIRE(fmt2(laptop) == "50.73",
                "delta(76.50, 25.77) = " + fmt2(laptop) + ", want 50.73");
    double average = eval::average_improvement({restaurant, laptop});
    ACC_REQUIRE(fmt2(average) == "47.99",
                "average = " + fmt2(average) + ", want 47.99");
}

// --- criterion 3: baseline fixture fidelity ---------------------------------

void criterion3_baseline_block() {
    auto rendered = eval::render_report({}, eval::supervised_baselines());
    const std::string expected =
        "group,model,restaurant_f1,restaurant_isa,laptop_f1,laptop_isa\n"
        "baseline,BERT+SPC,21.76,19.48,25.34,17.71\n"
        "baseline,BERT+RGAT,27.48,22.04,25.68,18.26\n"
        "baseline,BERT_Asp+SCAPT,30.02,25.49,25.77,13.70\n";
    ACC_REQUIRE(rendered.csv == expected,
                "baseline CSV block differs from the pinned bytes:\n" +
                    rendered.csv);
}

// --- criterion 4: metric oracle equivalence ---------------------------------

void criterion4_metric_oracle() {
    auto start = Clock::now();
    std::mt19937 rng(20240601);
    std::uniform_int_distribution<int> size(0, 50);
    std::uniform_int_distribution<int> gold(0, 2);
    std::uniform_int_distribution<int> pred(0, 3);
    std::uniform_int_distribution<int> coin(0, 1);

    for (int fixture = 0; fixture < 200; ++fixture) {
        std::vector<eval::PredictionRecord> records;
        int n = size(rng);
        for (int i = 0; i < n; ++i) {
            eval::PredictionRecord r;
            r.instance_id = std::to_string(i);
            r.gold = static_cast<PolarityLabel>(gold(rng));
            int p = pred(rng);
            if (p < 3) r.predicted = static_cast<PolarityLabel>(p);
            r.unparseable = !r.predicted.has_value();
            r.is_implicit = coin(rng) == 1;
            records.push_back(std::move(r));
        }
        auto metrics = eval::slice_metrics(eval::confusion(records));
        auto expected = oracle::compute(records);
        auto close = [&](double a, double b, const char* what) {
            ACC_REQUIRE(std::abs(a - b) <= 1e-9,
                        std::string("fixture ") + std::to_string(fixture) +
                            ": " + what + " " + std::to_string(a) + " vs " +
                            std::to_string(b));
        };
        close(metrics.accuracy, expected.accuracy, "accuracy");
        close(metrics.macro_f1, expected.macro_f1, "macro_f1");
        for (int c = 0; c < 3; ++c) {
            close(metrics.per_class_precision[c], expected.precision[c],
                  "precision");
            close(metrics.per_class_recall[c], expected.recall[c], "recall");
            close(metrics.per_class_f1[c], expected.f1[c], "f1");
        }
    }
    double elapsed = seconds_since(start);
    ACC_REQUIRE(elapsed < 5.0,
                "oracle check took " + std::to_string(elapsed) + "s (limit 5s)");
}

// --- criterion 5: chain topology laws ---------------------------------------

std::vector<corpus::SentimentInstance> topology_instances() {
    std::vector<corpus::SentimentInstance> out;
    for (int i = 0; i < 10; ++i) {
        corpus::SentimentInstance inst;
        inst.id = "top" + std::to_string(i);
        inst.text = "sentence number " + std::to_string(i) + " about the staff";
        inst.target = "staff";
        inst.gold = static_cast<PolarityLabel>(i % 3);
        inst.is_implicit = i % 2 == 0;
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<backend::MockRule> topology_rules() {
    return {
        {"What is the sentiment polarity toward", "positive"},
        {"Which specific aspect", "service speed"},
        {"What underlying opinion does", "quiet approval"},
        {"Based on the aspect and the opinion", "positive"},
        {"analyze step by step", "the sentence implies attentive service"},
        {"Reflect on that analysis", "the analysis holds up"},
        {"Given the analysis and the reflection", "positive"},
    };
}

void criterion5_chain_topology() {
    chains::TemplateSet templates = chains::TemplateSet::load_directory(
        std::string(SAOT_DATA_DIR) + "/templates/default");
    chains::ChainOptions options;
    options.request.model = "mockmodel";

    auto instances = topology_instances();

    auto run_all = [&](chains::ChainKind kind,
                       std::vector<chains::ChainTrace>* traces) {
        auto be = backend::scripted_mock(topology_rules(), "neutral");
        for (const auto& inst : instances) {
            auto trace = chains::run_chain(kind, *be, templates, inst, options);
            if (traces) traces->push_back(std::move(trace));
        }
        return be->call_count();
    };

    ACC_REQUIRE(run_all(chains::ChainKind::Direct, nullptr) == 10,
                "Direct must make exactly 10 calls over 10 instances");
    ACC_REQUIRE(run_all(chains::ChainKind::Thor, nullptr) == 30,
                "THOR must make exactly 30 calls over 10 instances");

    std::vector<chains::ChainTrace> saot_traces;
    ACC_REQUIRE(run_all(chains::ChainKind::Saot, &saot_traces) == 30,
                "SAoT must make exactly 30 calls over 10 instances");
    for (const auto& trace : saot_traces) {
        ACC_REQUIRE(trace.steps.size() == 3, "SAoT trace must have 3 steps");
        const std::string& final_prompt = trace.steps[2].prompt;
        ACC_REQUIRE(
            final_prompt.find(trace.steps[0].response) != std::string::npos,
            "instance " + trace.instance_id +
                ": analyze response missing from the final prompt");
        ACC_REQUIRE(
            final_prompt.find(trace.steps[1].response) != std::string::npos,
            "instance " + trace.instance_id +
                ": reflect response missing from the final prompt");
    }
}

// --- criterion 6: determinism and resume ------------------------------------

runner::RunConfig acceptance_run_config(const TempDir& dir,
                                        const std::string& experiment_id,
                                        const std::string& cache_name) {
    auto instances = topology_instances();
    for (auto& inst : instances) inst.dataset = DatasetName::Restaurant;
    fs::path data = dir.path / "data.jsonl";
    if (!fs::exists(data)) {
        std::ofstream(data) << corpus::serialize_jsonl(instances);
    }

    runner::RunConfig config;
    config.experiment_id = experiment_id;
    config.dataset.path = data.string();
    config.chain = chains::ChainKind::Saot;
    config.backend.kind = backend::BackendKind::Mock;
    config.backend.mock_rules = topology_rules();
    config.backend.mock_default_text = "neutral";
    config.templates_dir = std::string(SAOT_DATA_DIR) + "/templates/default";
    config.model = "mockmodel";
    config.concurrency = 1;
    config.out_dir = (dir.path / "out").string();
    config.cache_dir = (dir.path / cache_name).string();
    return config;
}

void criterion6_determinism_and_resume() {
    auto start = Clock::now();
    TempDir dir;

    // uninterrupted reference run
    auto full = acceptance_run_config(dir, "exp-full", "cache-full");
    runner::RunOutcome full_outcome = runner::run_experiment(full);
    ACC_REQUIRE(full_outcome.exit_code == 0, "reference run failed");
    ACC_REQUIRE(full_outcome.backend_calls == 30,
                "reference run made " +
                    std::to_string(full_outcome.backend_calls) +
                    " calls, want 30");
    auto full_records =
        runner::load_experiment_records(full.out_dir, "exp-full");
    ACC_REQUIRE(full_records.size() == 10, "reference run lost records");

    // interrupted after 4 instances, then resumed
    auto cut = acceptance_run_config(dir, "exp-cut", "cache-cut");
    runner::RunHooks hooks;
    hooks.stop = std::make_shared<runner::StopToken>();
    hooks.after_instance = [&](const std::string&, std::size_t completed) {
        if (completed >= 4) hooks.stop->request_stop();
    };
    runner::RunOutcome cut_outcome = runner::run_experiment(cut, hooks);
    ACC_REQUIRE(cut_outcome.interrupted, "interrupt did not take effect");
    ACC_REQUIRE(cut_outcome.processed == 4,
                "interrupted run processed " +
                    std::to_string(cut_outcome.processed) + ", want 4");

    runner::RunOutcome resumed = runner::resume(cut.out_dir, "exp-cut");
    ACC_REQUIRE(resumed.processed == 6,
                "resume processed " + std::to_string(resumed.processed) +
                    ", want exactly the 6 remaining");
    auto cut_records = runner::load_experiment_records(cut.out_dir, "exp-cut");
    ACC_REQUIRE(cut_records == full_records,
                "interrupted+resumed records differ from the uninterrupted run");

    // a cached rerun makes zero backend calls
    auto warm = acceptance_run_config(dir, "exp-warm", "cache-full");
    runner::RunOutcome warm_outcome = runner::run_experiment(warm);
    ACC_REQUIRE(warm_outcome.backend_calls == 0,
                "cached rerun made " +
                    std::to_string(warm_outcome.backend_calls) +
                    " backend calls, want 0");
    ACC_REQUIRE(
        runner::load_experiment_records(warm.out_dir, "exp-warm") ==
            full_records,
        "cached rerun records differ from the uninterrupted run");

    double elapsed = seconds_since(start);
    ACC_REQUIRE(elapsed < 10.0, "determinism/resume took " +
                                    std::to_string(elapsed) + "s (limit 10s)");
}

// --- criterion 7: extraction corpus and properties ---------------------------

struct LabeledCase {
    const char* text;
    std::optional<PolarityLabel> expected;
};

// Same hand-labeled corpus as the unit suite; labels assigned by applying the
// documented policy by hand before implementation.
const LabeledCase kCorpus[] = {
    {"The sentiment is positive.", PolarityLabel::Positive},
    {"Not negative; overall positive.", PolarityLabel::Positive},
    {"NEGATIVE", PolarityLabel::Negative},
    {"I would say neutral, leaning positive.", PolarityLabel::Positive},
    {"positive at first glance, but ultimately negative.",
     PolarityLabel::Negative},
    {"The polarity is neutral.", PolarityLabel::Neutral},
    {"", std::nullopt},
    {"No opinion about the food is expressed.", std::nullopt},
    {"Positive. The staff was friendly and attentive.",
     PolarityLabel::Positive},
    {"The answer is Negative, not neutral.", PolarityLabel::Neutral},
    {"Overall the review reads as POSITIVE.", PolarityLabel::Positive},
    {"neutral", PolarityLabel::Neutral},
    {"The customer seems satisfied, so I would call this positive overall.",
     PolarityLabel::Positive},
    {"Though the word negative appears here, the tone is positive.",
     PolarityLabel::Positive},
    {"polarity: negative", PolarityLabel::Negative},
    {"It is neither positive nor negative; it is neutral.",
     PolarityLabel::Neutral},
    {"The sentiment toward the staff is negative.", PolarityLabel::Negative},
    {"Mixed feelings, but the final answer is: neutral",
     PolarityLabel::Neutral},
    {"The review is **negative**.", PolarityLabel::Negative},
    {"Final verdict: neutral, since no explicit opinion about the laptop "
     "itself is given.",
     PolarityLabel::Neutral},
};

std::string uppercased(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

void criterion7_extraction() {
    extraction::ExtractionPolicy policy;

    int total = 0;
    for (const LabeledCase& c : kCorpus) {
        ++total;
        auto got = extraction::extract_polarity(c.text, policy);
        ACC_REQUIRE(got == c.expected,
                    std::string("corpus case mismatch: \"") + c.text + "\"");
    }
    ACC_REQUIRE(total == 20, "corpus must hold exactly 20 cases");

    std::mt19937 rng(777);
    static const char* fragments[] = {
        "good", "bad",     "positive", "negative", "neutral", "food",
        "the",  "overall", "answer",   "is",       "maybe",   "!!",
    };
    static const char safe_alphabet[] = "qwxzjkbfhm .,!;";
    std::uniform_int_distribution<int> count(0, 12);
    std::uniform_int_distribution<int> pick(0, std::size(fragments) - 1);
    std::uniform_int_distribution<int> upper(0, 3);
    std::uniform_int_distribution<int> suffix_len(0, 20);
    std::uniform_int_distribution<int> safe_pick(0, std::size(safe_alphabet) - 2);

    for (int i = 0; i < 1000; ++i) {
        std::string text;
        int n = count(rng);
        for (int k = 0; k < n; ++k) {
            std::string word = fragments[pick(rng)];
            if (upper(rng) == 0) word = uppercased(word);
            if (!text.empty()) text += " ";
            text += word;
        }

        auto label = extraction::extract_polarity(text, policy);
        if (label) {
            ACC_REQUIRE(
                extraction::extract_polarity(to_string(*label), policy) == label,
                "idempotence violated for \"" + text + "\"");
        }
        ACC_REQUIRE(
            extraction::extract_polarity(uppercased(text), policy) == label,
            "case-insensitivity violated for \"" + text + "\"");

        std::string suffix;
        int m = suffix_len(rng);
        for (int k = 0; k < m; ++k) suffix.push_back(safe_alphabet[safe_pick(rng)]);
        ACC_REQUIRE(
            extraction::extract_polarity(text + suffix, policy) == label,
            "keyword-free suffix changed the result for \"" + text + "\"");
    }
}

// --- criterion 8: optional live smoke ----------------------------------------

bool criterion8_live_smoke(std::string* note) {
    const char* endpoint = std::getenv("SAOT_SMOKE_ENDPOINT");
    if (!endpoint || !*endpoint) {
        *note = "set SAOT_SMOKE_ENDPOINT to enable";
        return false;
    }
    TempDir dir;
    std::vector<corpus::SentimentInstance> instances;
    const char* texts[] = {
        "The waiter refilled our glasses before we even asked",
        "I had to charge the battery three times in one afternoon",
        "The menu lists twelve kinds of dumplings",
        "Our table by the window overlooked the parking lot",
        "The keyboard feels like typing on wet cardboard",
    };
    for (int i = 0; i < 20; ++i) {
        corpus::SentimentInstance inst;
        inst.id = "smoke" + std::to_string(i);
        inst.text = texts[i % 5];
        inst.target = i % 2 ? "service" : "product";
        inst.gold = static_cast<PolarityLabel>(i % 3);
        inst.is_implicit = i % 2 == 0;
        instances.push_back(std::move(inst));
    }
    std::ofstream(dir.path / "smoke.jsonl") << corpus::serialize_jsonl(instances);

    runner::RunConfig config;
    config.experiment_id = "smoke";
    config.dataset.path = (dir.path / "smoke.jsonl").string();
    config.chain = chains::ChainKind::Saot;
    config.backend.kind = backend::BackendKind::Http;
    config.backend.endpoint_url = endpoint;
    if (std::getenv("SAOT_SMOKE_TOKEN")) {
        config.backend.auth_token_env = "SAOT_SMOKE_TOKEN";
    }
    if (const char* model = std::getenv("SAOT_SMOKE_MODEL")) {
        config.model = model;
    }
    config.templates_dir = std::string(SAOT_DATA_DIR) + "/templates/default";
    config.concurrency = 2;
    config.out_dir = (dir.path / "out").string();
    config.cache_dir = (dir.path / "cache").string();

    runner::RunOutcome outcome = runner::run_experiment(config);
    auto records = runner::load_experiment_records(config.out_dir, "smoke");
    auto report = eval::build_report(records, "smoke");
    ACC_REQUIRE(outcome.manifest.count(runner::InstanceStatus::Done) == 20,
                "live run did not complete all 20 instances");
    ACC_REQUIRE(report.unparseable_rate < 0.25,
                "unparseable rate " + std::to_string(report.unparseable_rate) +
                    " >= 0.25");
    ACC_REQUIRE(fs::exists(fs::path(config.out_dir) / "smoke" / "report.json"),
                "live run emitted no report");
    *note = "completed against " + std::string(endpoint);
    return true;
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* title;
        std::function<void()> run;
    };
    const Criterion criteria[] = {
        {1, "dataset accounting reproduces the shipped expectations",
         criterion1_dataset_accounting},
        {2, "improvement arithmetic (45.25, 50.73, 47.99)",
         criterion2_improvement_arithmetic},
        {3, "baseline fixture CSV block, byte-for-byte",
         criterion3_baseline_block},
        {4, "slice metrics match the brute-force oracle on 200 fixtures",
         criterion4_metric_oracle},
        {5, "chain topology laws (10/30/30 calls, SAoT concatenation)",
         criterion5_chain_topology},
        {6, "determinism, interrupt/resume, cached replay",
         criterion6_determinism_and_resume},
        {7, "extraction corpus (20/20) and properties on 1000 strings",
         criterion7_extraction},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        try {
            criterion.run();
            std::printf("[PASS] criterion %d: %s\n", criterion.number,
                        criterion.title);
        } catch (const std::exception& ex) {
            ++failures;
            std::printf("[FAIL] criterion %d: %s\n       %s\n",
                        criterion.number, criterion.title, ex.what());
        }
    }

    // non-gating live smoke
    try {
        std::string note;
        if (criterion8_live_smoke(&note)) {
            std::printf("[PASS] criterion 8 (non-gating): live smoke: %s\n",
                        note.c_str());
        } else {
            std::printf("[SKIP] criterion 8 (non-gating): live smoke: %s\n",
                        note.c_str());
        }
    } catch (const std::exception& ex) {
        std::printf("[WARN] criterion 8 (non-gating): live smoke failed: %s\n",
                    ex.what());
    }

    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all gating criteria passed\n");
    return 0;
}
