#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "saot/chains.hpp"
#include "saot/polarity.hpp"

namespace saot::eval {

struct PredictionRecord {
    std::string instance_id;
    PolarityLabel gold = PolarityLabel::Neutral;
    std::optional<PolarityLabel> predicted;  // nullopt lands in the None column
    bool is_implicit = false;
    bool unparseable = false;  // extraction found no keyword (kept visible even
                               // when a fallback rewrote the prediction)

    bool operator==(const PredictionRecord&) const = default;
};

std::string record_to_json(const PredictionRecord& record);
PredictionRecord record_from_json(const std::string& line);
std::vector<PredictionRecord> load_records_jsonl(const std::string& path);

// Gold rows Negative/Neutral/Positive; predicted columns those three + None.
class ConfusionMatrix {
public:
    static constexpr int kNoneColumn = kPolarityCount;

    std::int64_t& cell(PolarityLabel gold, int predicted_column);
    std::int64_t cell(PolarityLabel gold, int predicted_column) const;
    std::int64_t row_sum(PolarityLabel gold) const;
    std::int64_t column_sum(int predicted_column) const;
    std::int64_t total() const;
    std::int64_t diagonal() const;

private:
    std::array<std::array<std::int64_t, kPolarityCount + 1>, kPolarityCount>
        cells_{};
};

// Counts records by (gold, predicted). Duplicate instance ids are an error.
ConfusionMatrix confusion(const std::vector<PredictionRecord>& records);

struct SliceMetrics {
    double accuracy = 0.0;
    std::array<double, kPolarityCount> per_class_precision{};
    std::array<double, kPolarityCount> per_class_recall{};
    std::array<double, kPolarityCount> per_class_f1{};
    double macro_f1 = 0.0;
    std::int64_t support = 0;
};

// Precision over label columns, recall over full rows (None counts against
// recall), F1 = 2PR/(P+R), macro_f1 = mean of the three F1 values, accuracy =
// diagonal/support. Zero denominators yield 0.
SliceMetrics slice_metrics(const ConfusionMatrix& cm);

// Partition by is_implicit: (isa, esa).
std::pair<std::vector<PredictionRecord>, std::vector<PredictionRecord>>
split_slices(const std::vector<PredictionRecord>& records);

struct EvalReport {
    SliceMetrics all;
    SliceMetrics isa;
    SliceMetrics esa;
    double unparseable_rate = 0.0;
    std::string config_fingerprint;
};

EvalReport build_report(const std::vector<PredictionRecord>& records,
                        std::string config_fingerprint);

// Percentage-point difference a - b, rounded to 2 decimals.
double improvement_delta(double score_a, double score_b);

// Arithmetic mean of deltas, rounded to 2 decimals. Empty input is an error.
double average_improvement(const std::vector<double>& deltas);

// --- Table-style rendering ------------------------------------------------

// Display scores for one dataset, in percent, already rounded to 2 decimals.
// Delta arithmetic runs on these displayed values.
struct DatasetScores {
    double f1 = 0.0;
    double isa = 0.0;
};

struct BaselineRow {
    std::string model;
    DatasetScores restaurant;
    DatasetScores laptop;
};

// Supervised reference scores shipped as fixture constants; never recomputed.
const std::vector<BaselineRow>& supervised_baselines();
std::vector<BaselineRow> load_baselines_csv(const std::string& path);

struct RowKey {
    std::string model;
    chains::ChainKind chain = chains::ChainKind::Direct;

    auto operator<=>(const RowKey&) const = default;
};

// Row label convention: Direct renders as "+Prompt", the chain methods as
// "+THOR" / "+SAoT".
std::string row_label(const RowKey& key);

struct ExperimentScores {
    std::optional<DatasetScores> restaurant;
    std::optional<DatasetScores> laptop;
};

struct ReportOptions {
    bool include_deltas = false;
    // Delta reference; must name a baseline row.
    std::string delta_baseline = "BERT_Asp+SCAPT";
    // Free-form notes appended to the text footer (extraction policy, reflect
    // mode, scoring conventions).
    std::vector<std::string> notes;
};

struct RenderedReport {
    std::string text;
    std::string csv;
};

// Grouped sections (baselines / prompt-based / CoT-based) with F1 and ISA
// columns per dataset. The best value in each column is starred in the text
// output. Output is deterministic: rows sort by (group, model, chain).
RenderedReport render_report(
    const std::map<RowKey, ExperimentScores>& reports,
    const std::vector<BaselineRow>& baselines,
    const ReportOptions& options = {});

std::string slice_metrics_to_json(const SliceMetrics& m);
std::string eval_report_to_json(const EvalReport& report);

DatasetScores scores_from_report(const EvalReport& report);

}  // namespace saot::eval
