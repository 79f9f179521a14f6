#include "saot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace saot::eval {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string fmt2(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

double round2(double value) { return std::round(value * 100.0) / 100.0; }

json label_array_to_json(const std::array<double, kPolarityCount>& values) {
    ordered_json out;
    out["negative"] = values[0];
    out["neutral"] = values[1];
    out["positive"] = values[2];
    return out;
}

}  // namespace

std::string record_to_json(const PredictionRecord& record) {
    ordered_json object;
    object["instance_id"] = record.instance_id;
    object["gold"] = to_string(record.gold);
    if (record.predicted) {
        object["predicted"] = to_string(*record.predicted);
    } else {
        object["predicted"] = nullptr;
    }
    object["is_implicit"] = record.is_implicit;
    object["unparseable"] = record.unparseable;
    return object.dump();
}

PredictionRecord record_from_json(const std::string& line) {
    json object = json::parse(line);
    PredictionRecord record;
    record.instance_id = object.at("instance_id").get<std::string>();
    auto gold = parse_polarity(object.at("gold").get<std::string>());
    if (!gold) throw Error("prediction record: unknown gold polarity");
    record.gold = *gold;
    const json& predicted = object.at("predicted");
    if (!predicted.is_null()) {
        auto label = parse_polarity(predicted.get<std::string>());
        if (!label) throw Error("prediction record: unknown predicted polarity");
        record.predicted = *label;
    }
    record.is_implicit = object.at("is_implicit").get<bool>();
    record.unparseable = object.value("unparseable", false);
    return record;
}

std::vector<PredictionRecord> load_records_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::vector<PredictionRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        records.push_back(record_from_json(line));
    }
    return records;
}

std::int64_t& ConfusionMatrix::cell(PolarityLabel gold, int predicted_column) {
    return cells_[static_cast<int>(gold)][predicted_column];
}

std::int64_t ConfusionMatrix::cell(PolarityLabel gold,
                                   int predicted_column) const {
    return cells_[static_cast<int>(gold)][predicted_column];
}

std::int64_t ConfusionMatrix::row_sum(PolarityLabel gold) const {
    std::int64_t sum = 0;
    for (std::int64_t v : cells_[static_cast<int>(gold)]) sum += v;
    return sum;
}

std::int64_t ConfusionMatrix::column_sum(int predicted_column) const {
    std::int64_t sum = 0;
    for (int row = 0; row < kPolarityCount; ++row) {
        sum += cells_[row][predicted_column];
    }
    return sum;
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t sum = 0;
    for (int row = 0; row < kPolarityCount; ++row) {
        sum += row_sum(static_cast<PolarityLabel>(row));
    }
    return sum;
}

std::int64_t ConfusionMatrix::diagonal() const {
    std::int64_t sum = 0;
    for (int i = 0; i < kPolarityCount; ++i) sum += cells_[i][i];
    return sum;
}

ConfusionMatrix confusion(const std::vector<PredictionRecord>& records) {
    ConfusionMatrix cm;
    std::set<std::string> seen;
    for (const PredictionRecord& record : records) {
        if (!seen.insert(record.instance_id).second) {
            throw Error("duplicate instance id in prediction records: " +
                        record.instance_id);
        }
        int column = record.predicted ? static_cast<int>(*record.predicted)
                                      : ConfusionMatrix::kNoneColumn;
        ++cm.cell(record.gold, column);
    }
    return cm;
}

SliceMetrics slice_metrics(const ConfusionMatrix& cm) {
    SliceMetrics m;
    m.support = cm.total();
    double f1_sum = 0.0;
    for (int c = 0; c < kPolarityCount; ++c) {
        PolarityLabel label = static_cast<PolarityLabel>(c);
        double tp = static_cast<double>(cm.cell(label, c));
        std::int64_t predicted = cm.column_sum(c);
        std::int64_t actual = cm.row_sum(label);
        double precision = predicted > 0 ? tp / predicted : 0.0;
        double recall = actual > 0 ? tp / actual : 0.0;
        double f1 = (precision + recall) > 0.0
                        ? 2.0 * precision * recall / (precision + recall)
                        : 0.0;
        m.per_class_precision[c] = precision;
        m.per_class_recall[c] = recall;
        m.per_class_f1[c] = f1;
        f1_sum += f1;
    }
    m.macro_f1 = f1_sum / kPolarityCount;
    m.accuracy = m.support > 0
                     ? static_cast<double>(cm.diagonal()) / m.support
                     : 0.0;
    return m;
}

std::pair<std::vector<PredictionRecord>, std::vector<PredictionRecord>>
split_slices(const std::vector<PredictionRecord>& records) {
    std::vector<PredictionRecord> isa;
    std::vector<PredictionRecord> esa;
    for (const PredictionRecord& record : records) {
        (record.is_implicit ? isa : esa).push_back(record);
    }
    return {std::move(isa), std::move(esa)};
}

EvalReport build_report(const std::vector<PredictionRecord>& records,
                        std::string config_fingerprint) {
    EvalReport report;
    report.all = slice_metrics(confusion(records));
    auto [isa, esa] = split_slices(records);
    report.isa = slice_metrics(confusion(isa));
    report.esa = slice_metrics(confusion(esa));
    std::int64_t unparseable = 0;
    for (const PredictionRecord& record : records) {
        if (record.unparseable || !record.predicted) ++unparseable;
    }
    report.unparseable_rate =
        records.empty() ? 0.0
                        : static_cast<double>(unparseable) / records.size();
    report.config_fingerprint = std::move(config_fingerprint);
    return report;
}

double improvement_delta(double score_a, double score_b) {
    return round2(score_a - score_b);
}

double average_improvement(const std::vector<double>& deltas) {
    if (deltas.empty()) throw Error("average_improvement over an empty list");
    double sum = 0.0;
    for (double d : deltas) sum += d;
    return round2(sum / static_cast<double>(deltas.size()));
}

const std::vector<BaselineRow>& supervised_baselines() {
    static const std::vector<BaselineRow> rows = {
        {"BERT+SPC", {21.76, 19.48}, {25.34, 17.71}},
        {"BERT+RGAT", {27.48, 22.04}, {25.68, 18.26}},
        {"BERT_Asp+SCAPT", {30.02, 25.49}, {25.77, 13.70}},
    };
    return rows;
}

std::vector<BaselineRow> load_baselines_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::vector<BaselineRow> rows;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {  // column header line
            header_seen = true;
            continue;
        }
        std::istringstream fields(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(fields, cell, ',')) cells.push_back(cell);
        if (cells.size() != 5) {
            throw Error("baselines csv line " + std::to_string(line_no) +
                        ": expected 5 fields");
        }
        BaselineRow row;
        row.model = cells[0];
        row.restaurant = {std::stod(cells[1]), std::stod(cells[2])};
        row.laptop = {std::stod(cells[3]), std::stod(cells[4])};
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string row_label(const RowKey& key) {
    switch (key.chain) {
        case chains::ChainKind::Direct: return key.model + "+Prompt";
        case chains::ChainKind::Thor: return key.model + "+THOR";
        case chains::ChainKind::Saot: return key.model + "+SAoT";
    }
    return key.model;
}

namespace {

struct TableRow {
    std::string group;  // "baseline" | "prompt" | "cot"
    std::string label;
    std::optional<double> values[4];  // rest F1, rest ISA, lap F1, lap ISA
};

std::vector<TableRow> collect_rows(
    const std::map<RowKey, ExperimentScores>& reports,
    const std::vector<BaselineRow>& baselines) {
    std::vector<TableRow> rows;
    for (const BaselineRow& b : baselines) {
        TableRow row;
        row.group = "baseline";
        row.label = b.model;
        row.values[0] = b.restaurant.f1;
        row.values[1] = b.restaurant.isa;
        row.values[2] = b.laptop.f1;
        row.values[3] = b.laptop.isa;
        rows.push_back(std::move(row));
    }
    auto emit = [&](const RowKey& key, const ExperimentScores& scores,
                    const std::string& group) {
        TableRow row;
        row.group = group;
        row.label = row_label(key);
        if (scores.restaurant) {
            row.values[0] = scores.restaurant->f1;
            row.values[1] = scores.restaurant->isa;
        }
        if (scores.laptop) {
            row.values[2] = scores.laptop->f1;
            row.values[3] = scores.laptop->isa;
        }
        rows.push_back(std::move(row));
    };
    // Map order is (model, chain), already deterministic.
    for (const auto& [key, scores] : reports) {
        if (key.chain == chains::ChainKind::Direct) emit(key, scores, "prompt");
    }
    for (const auto& [key, scores] : reports) {
        if (key.chain != chains::ChainKind::Direct) emit(key, scores, "cot");
    }
    return rows;
}

}  // namespace

RenderedReport render_report(const std::map<RowKey, ExperimentScores>& reports,
                             const std::vector<BaselineRow>& baselines,
                             const ReportOptions& options) {
    std::vector<TableRow> rows = collect_rows(reports, baselines);

    // Column-wise best, for starring in the text table.
    std::optional<double> best[4];
    for (const TableRow& row : rows) {
        for (int c = 0; c < 4; ++c) {
            if (row.values[c] && (!best[c] || *row.values[c] > *best[c])) {
                best[c] = *row.values[c];
            }
        }
    }

    std::size_t label_width = 20;
    for (const TableRow& row : rows) {
        label_width = std::max(label_width, row.label.size());
    }

    static const char* kSectionTitle[] = {"State-of-the-art baselines",
                                          "Prompt-based methods",
                                          "CoT-based methods"};
    static const char* kSectionGroup[] = {"baseline", "prompt", "cot"};

    constexpr int kCellWidth = 7;
    auto aligned = [&](const std::string& cell) {
        return "  " +
               std::string(cell.size() < kCellWidth ? kCellWidth - cell.size()
                                                    : 0,
                           ' ') +
               cell;
    };

    // a dataset header spans its two value columns (2 * (2 + kCellWidth))
    auto spanned = [](const std::string& name) {
        constexpr std::size_t kSpan = 2 * (2 + kCellWidth);
        return std::string(kSpan > name.size() ? kSpan - name.size() : 0, ' ') +
               name;
    };

    std::ostringstream text;
    text << std::string(label_width, ' ') << spanned("Restaurant")
         << spanned("Laptop") << "\n";
    text << std::string(label_width, ' ') << aligned("F1") << aligned("ISA")
         << aligned("F1") << aligned("ISA") << "\n";
    for (int section = 0; section < 3; ++section) {
        bool any = false;
        for (const TableRow& row : rows) {
            if (row.group == kSectionGroup[section]) any = true;
        }
        if (!any) continue;
        text << "-- " << kSectionTitle[section] << " --\n";
        for (const TableRow& row : rows) {
            if (row.group != kSectionGroup[section]) continue;
            text << row.label
                 << std::string(label_width - row.label.size(), ' ');
            for (int c = 0; c < 4; ++c) {
                std::string cell =
                    row.values[c] ? fmt2(*row.values[c]) : std::string("-");
                if (row.values[c] && best[c] && *row.values[c] == *best[c]) {
                    cell += "*";
                }
                text << aligned(cell);
            }
            text << "\n";
        }
    }
    text << "(* best value in column)\n";

    if (options.include_deltas && !reports.empty()) {
        const BaselineRow* reference = nullptr;
        for (const BaselineRow& b : baselines) {
            if (b.model == options.delta_baseline) reference = &b;
        }
        if (!reference) {
            throw Error("delta baseline not found: " + options.delta_baseline);
        }
        text << "\nF1 improvement vs " << reference->model
             << " (percentage points)\n";
        text << std::string(label_width, ' ')
             << "  Restaurant  Laptop  Average\n";
        for (const TableRow& row : rows) {
            if (row.group == "baseline") continue;
            std::vector<double> deltas;
            std::string rest = "-";
            std::string lap = "-";
            if (row.values[0]) {
                double d = improvement_delta(*row.values[0],
                                             reference->restaurant.f1);
                deltas.push_back(d);
                rest = fmt2(d);
            }
            if (row.values[2]) {
                double d = improvement_delta(*row.values[2], reference->laptop.f1);
                deltas.push_back(d);
                lap = fmt2(d);
            }
            std::string avg = deltas.empty() ? "-" : fmt2(average_improvement(deltas));
            text << row.label << std::string(label_width - row.label.size(), ' ')
                 << "  " << std::string(rest.size() < 10 ? 10 - rest.size() : 0, ' ')
                 << rest << "  "
                 << std::string(lap.size() < 6 ? 6 - lap.size() : 0, ' ') << lap
                 << "  "
                 << std::string(avg.size() < 7 ? 7 - avg.size() : 0, ' ') << avg
                 << "\n";
        }
    }

    for (const std::string& note : options.notes) {
        text << "note: " << note << "\n";
    }

    std::ostringstream csv;
    csv << "group,model,restaurant_f1,restaurant_isa,laptop_f1,laptop_isa\n";
    for (const TableRow& row : rows) {
        csv << row.group << "," << row.label;
        for (int c = 0; c < 4; ++c) {
            csv << ",";
            if (row.values[c]) csv << fmt2(*row.values[c]);
        }
        csv << "\n";
    }

    return {text.str(), csv.str()};
}

std::string slice_metrics_to_json(const SliceMetrics& m) {
    ordered_json out;
    out["accuracy"] = m.accuracy;
    out["precision"] = label_array_to_json(m.per_class_precision);
    out["recall"] = label_array_to_json(m.per_class_recall);
    out["f1"] = label_array_to_json(m.per_class_f1);
    out["macro_f1"] = m.macro_f1;
    out["support"] = m.support;
    return out.dump();
}

std::string eval_report_to_json(const EvalReport& report) {
    ordered_json out;
    out["all"] = json::parse(slice_metrics_to_json(report.all));
    out["isa"] = json::parse(slice_metrics_to_json(report.isa));
    out["esa"] = json::parse(slice_metrics_to_json(report.esa));
    out["unparseable_rate"] = report.unparseable_rate;
    out["config_fingerprint"] = report.config_fingerprint;
    return out.dump();
}

DatasetScores scores_from_report(const EvalReport& report) {
    return {round2(report.all.macro_f1 * 100.0),
            round2(report.isa.macro_f1 * 100.0)};
}

}  // namespace saot::eval
