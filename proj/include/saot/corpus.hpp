#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "saot/polarity.hpp"

namespace saot::corpus {

// One (sentence, aspect target) pair with its gold polarity.
// is_implicit=true instances form the ISA slice, the rest the ESA slice.
struct SentimentInstance {
    std::string id;  // unique within a dataset
    std::string text;
    std::string target;  // empty only when the source marks a null target
    PolarityLabel gold = PolarityLabel::Neutral;
    bool is_implicit = false;
    DatasetName dataset = DatasetName::Restaurant;

    bool operator==(const SentimentInstance&) const = default;
};

// Per-dataset accounting. isa_percent is stored in hundredths of a percent
// and is *truncated*, not rounded: 100 * isa_count / total cut after two
// decimals (computed as 10000 * isa_count / total in integer arithmetic).
struct DatasetSummary {
    std::int64_t negative = 0;
    std::int64_t positive = 0;
    std::int64_t neutral = 0;
    std::int64_t total = 0;
    std::int64_t isa_count = 0;
    std::int64_t isa_percent_hundredths = 0;

    bool operator==(const DatasetSummary&) const = default;

    // "23.83" style rendering of isa_percent_hundredths.
    std::string isa_percent_str() const;
};

// Thrown for malformed input. line/column are 1-based; column is 0 when it
// does not apply (e.g. JSONL, where only the line is meaningful).
class ParseError : public Error {
public:
    ParseError(std::string message, std::size_t line, std::size_t column);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

struct XmlParseResult {
    std::vector<SentimentInstance> instances;
    std::vector<std::string> warnings;  // one entry per skipped record
    std::int64_t skipped = 0;
};

// SemEval-2014 ABSA test format: <sentences> holding <sentence id=..> with a
// <text> child and an <aspectTerms> list of <aspectTerm term=.. polarity=..>.
// Produces one instance per (sentence, aspectTerm) pair with
// id = "<sentence id>#<term index>" and is_implicit=false (the XML carries no
// implicit flag; apply overlay_implicit_flags afterwards).
// Records with an unknown polarity (e.g. "conflict") are skipped and counted.
XmlParseResult parse_semeval_xml(std::string_view xml, DatasetName dataset);
XmlParseResult parse_semeval_xml_file(const std::string& path, DatasetName dataset);

// Canonical interchange format: one JSON object per line with keys
// id, text, target, gold, is_implicit, dataset. Duplicate ids are an error.
std::vector<SentimentInstance> parse_jsonl(std::istream& input);
std::vector<SentimentInstance> parse_jsonl_file(const std::string& path);

// Inverse of parse_jsonl: UTF-8, LF line endings, fixed key order, one
// instance per line. parse_jsonl(serialize_jsonl(v)) == v for any valid v.
std::string serialize_jsonl(const std::vector<SentimentInstance>& instances);

// Implicit-flag overlay file: JSONL of {"id": string, "is_implicit": bool}.
std::map<std::string, bool> parse_flag_overlay(std::istream& input);
std::map<std::string, bool> parse_flag_overlay_file(const std::string& path);

// Returns a copy with is_implicit set for every id present in flags.
// Every flag key must match an instance id; unmatched ids are an error
// listing all of them.
std::vector<SentimentInstance> overlay_implicit_flags(
    const std::vector<SentimentInstance>& instances,
    const std::map<std::string, bool>& flags);

DatasetSummary summarize(const std::vector<SentimentInstance>& instances);

// Reference accounting for the shipped dataset expectations.
DatasetSummary expected_summary(DatasetName dataset);

struct FieldCheck {
    std::string field;
    std::int64_t expected = 0;
    std::int64_t actual = 0;
    bool ok = false;
};

struct ValidationReport {
    std::vector<FieldCheck> checks;
    bool pass = false;

    std::string to_string() const;
};

// Field-by-field equality; mismatch is a report outcome, not an error.
ValidationReport validate_expected(const DatasetSummary& summary,
                                   const DatasetSummary& expected);

}  // namespace saot::corpus
