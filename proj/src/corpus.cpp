#include "saot/corpus.hpp"

#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace saot::corpus {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Minimal XML reader for the SemEval ABSA files: declaration, comments,
// elements, attributes, character data with the five named entities and
// numeric references. Tracks line/column for every diagnostic.
// ---------------------------------------------------------------------------

struct XmlElement {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<XmlElement> children;
    std::string text;  // concatenated direct character data
    std::size_t line = 0;
    std::size_t column = 0;

    const std::string* attribute(std::string_view key) const {
        for (const auto& [k, v] : attributes) {
            if (k == key) return &v;
        }
        return nullptr;
    }

    const XmlElement* child(std::string_view tag) const {
        for (const auto& c : children) {
            if (c.name == tag) return &c;
        }
        return nullptr;
    }
};

class XmlCursor {
public:
    explicit XmlCursor(std::string_view input) : input_(input) {}

    bool eof() const { return pos_ >= input_.size(); }
    char peek() const { return input_[pos_]; }
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

    char advance() {
        char c = input_[pos_++];
        if (c == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        return c;
    }

    bool consume(std::string_view token) {
        if (input_.substr(pos_, token.size()) != token) return false;
        for (std::size_t i = 0; i < token.size(); ++i) advance();
        return true;
    }

    bool starts_with(std::string_view token) const {
        return input_.substr(pos_, token.size()) == token;
    }

    void skip_whitespace() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r' ||
                          peek() == '\n')) {
            advance();
        }
    }

    [[noreturn]] void fail(const std::string& message) const {
        throw ParseError(message, line_, column_);
    }

private:
    std::string_view input_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t column_ = 1;
};

bool is_name_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
           c == ':';
}

bool is_name_char(char c) {
    return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

std::string read_name(XmlCursor& cur) {
    if (cur.eof() || !is_name_start(cur.peek())) cur.fail("expected a name");
    std::string name;
    while (!cur.eof() && is_name_char(cur.peek())) name.push_back(cur.advance());
    return name;
}

void append_entity(XmlCursor& cur, std::string& out) {
    // cursor sits just past '&'
    std::string entity;
    while (!cur.eof() && cur.peek() != ';') {
        entity.push_back(cur.advance());
        if (entity.size() > 10) cur.fail("unterminated entity reference");
    }
    if (cur.eof()) cur.fail("unterminated entity reference");
    cur.advance();  // ';'
    if (entity == "amp") {
        out.push_back('&');
    } else if (entity == "lt") {
        out.push_back('<');
    } else if (entity == "gt") {
        out.push_back('>');
    } else if (entity == "quot") {
        out.push_back('"');
    } else if (entity == "apos") {
        out.push_back('\'');
    } else if (!entity.empty() && entity[0] == '#') {
        unsigned long code = 0;
        try {
            code = entity[1] == 'x' || entity[1] == 'X'
                       ? std::stoul(entity.substr(2), nullptr, 16)
                       : std::stoul(entity.substr(1), nullptr, 10);
        } catch (const std::exception&) {
            cur.fail("invalid numeric character reference &" + entity + ";");
        }
        // UTF-8 encode
        if (code < 0x80) {
            out.push_back(static_cast<char>(code));
        } else if (code < 0x800) {
            out.push_back(static_cast<char>(0xc0 | (code >> 6)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3f)));
        } else if (code < 0x10000) {
            out.push_back(static_cast<char>(0xe0 | (code >> 12)));
            out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3f)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3f)));
        } else if (code < 0x110000) {
            out.push_back(static_cast<char>(0xf0 | (code >> 18)));
            out.push_back(static_cast<char>(0x80 | ((code >> 12) & 0x3f)));
            out.push_back(static_cast<char>(0x80 | ((code >> 6) & 0x3f)));
            out.push_back(static_cast<char>(0x80 | (code & 0x3f)));
        } else {
            cur.fail("character reference out of range &" + entity + ";");
        }
    } else {
        cur.fail("unknown entity &" + entity + ";");
    }
}

std::string read_attribute_value(XmlCursor& cur) {
    if (cur.eof() || (cur.peek() != '"' && cur.peek() != '\'')) {
        cur.fail("expected quoted attribute value");
    }
    char quote = cur.advance();
    std::string value;
    while (true) {
        if (cur.eof()) cur.fail("unterminated attribute value");
        char c = cur.peek();
        if (c == quote) {
            cur.advance();
            return value;
        }
        if (c == '<') cur.fail("'<' is not allowed in attribute values");
        cur.advance();
        if (c == '&') {
            append_entity(cur, value);
        } else {
            value.push_back(c);
        }
    }
}

void skip_comment(XmlCursor& cur) {
    // cursor sits just past "<!--"
    while (!cur.eof()) {
        if (cur.consume("-->")) return;
        cur.advance();
    }
    cur.fail("unterminated comment");
}

XmlElement read_element(XmlCursor& cur);

// Reads attributes, children and text up to and including the closing tag.
void read_element_body(XmlCursor& cur, XmlElement& element) {
    // attributes
    while (true) {
        cur.skip_whitespace();
        if (cur.eof()) cur.fail("unterminated start tag <" + element.name);
        if (cur.consume("/>")) return;
        if (cur.consume(">")) break;
        std::string key = read_name(cur);
        cur.skip_whitespace();
        if (!cur.consume("=")) cur.fail("expected '=' after attribute name");
        cur.skip_whitespace();
        std::string value = read_attribute_value(cur);
        for (const auto& [k, v] : element.attributes) {
            if (k == key) cur.fail("duplicate attribute \"" + key + "\"");
        }
        element.attributes.emplace_back(std::move(key), std::move(value));
    }
    // content
    while (true) {
        if (cur.eof()) cur.fail("missing closing tag </" + element.name + ">");
        if (cur.starts_with("<!--")) {
            cur.consume("<!--");
            skip_comment(cur);
            continue;
        }
        if (cur.consume("</")) {
            std::string closing = read_name(cur);
            if (closing != element.name) {
                cur.fail("mismatched closing tag </" + closing +
                         ">, expected </" + element.name + ">");
            }
            cur.skip_whitespace();
            if (!cur.consume(">")) cur.fail("malformed closing tag");
            return;
        }
        if (cur.peek() == '<') {
            element.children.push_back(read_element(cur));
            continue;
        }
        char c = cur.advance();
        if (c == '&') {
            append_entity(cur, element.text);
        } else {
            element.text.push_back(c);
        }
    }
}

XmlElement read_element(XmlCursor& cur) {
    XmlElement element;
    element.line = cur.line();
    element.column = cur.column();
    if (!cur.consume("<")) cur.fail("expected '<'");
    element.name = read_name(cur);
    read_element_body(cur, element);
    return element;
}

XmlElement parse_xml_document(std::string_view input) {
    XmlCursor cur(input);
    cur.skip_whitespace();
    if (cur.starts_with("<?")) {  // declaration
        cur.consume("<?");
        while (!cur.eof() && !cur.consume("?>")) cur.advance();
    }
    while (true) {
        cur.skip_whitespace();
        if (cur.starts_with("<!--")) {
            cur.consume("<!--");
            skip_comment(cur);
            continue;
        }
        break;
    }
    if (cur.eof()) cur.fail("empty document");
    XmlElement root = read_element(cur);
    cur.skip_whitespace();
    if (!cur.eof()) cur.fail("trailing content after root element");
    return root;
}

std::string trimmed(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail_at(const XmlElement& element, const std::string& message) {
    throw ParseError(message, element.line, element.column);
}

// --- JSONL helpers ---------------------------------------------------------

const json& require_key(const json& object, const char* key, std::size_t line) {
    auto it = object.find(key);
    if (it == object.end()) {
        throw ParseError("missing key \"" + std::string(key) + "\"", line, 0);
    }
    return *it;
}

std::string require_string(const json& object, const char* key,
                           std::size_t line) {
    const json& value = require_key(object, key, line);
    if (!value.is_string()) {
        throw ParseError("key \"" + std::string(key) + "\" must be a string",
                         line, 0);
    }
    return value.get<std::string>();
}

bool require_bool(const json& object, const char* key, std::size_t line) {
    const json& value = require_key(object, key, line);
    if (!value.is_boolean()) {
        throw ParseError("key \"" + std::string(key) + "\" must be a boolean",
                         line, 0);
    }
    return value.get<bool>();
}

json parse_line(const std::string& line, std::size_t line_no) {
    json object;
    try {
        object = json::parse(line);
    } catch (const json::exception& ex) {
        throw ParseError(std::string("invalid JSON: ") + ex.what(), line_no, 0);
    }
    if (!object.is_object()) {
        throw ParseError("expected a JSON object", line_no, 0);
    }
    return object;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

// ---------------------------------------------------------------------------

ParseError::ParseError(std::string message, std::size_t line,
                       std::size_t column)
    : Error(column > 0 ? "line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ": " + message
                       : "line " + std::to_string(line) + ": " + message),
      line_(line),
      column_(column) {}

std::string DatasetSummary::isa_percent_str() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld.%02lld",
                  static_cast<long long>(isa_percent_hundredths / 100),
                  static_cast<long long>(isa_percent_hundredths % 100));
    return buf;
}

XmlParseResult parse_semeval_xml(std::string_view xml, DatasetName dataset) {
    XmlElement root = parse_xml_document(xml);
    if (root.name != "sentences") {
        fail_at(root, "expected root element <sentences>, got <" + root.name +
                          ">");
    }

    XmlParseResult result;
    std::set<std::string> seen_ids;
    for (const XmlElement& sentence : root.children) {
        if (sentence.name != "sentence") {
            fail_at(sentence,
                    "unexpected element <" + sentence.name + "> in <sentences>");
        }
        const std::string* sentence_id = sentence.attribute("id");
        if (!sentence_id || sentence_id->empty()) {
            fail_at(sentence, "<sentence> is missing its id attribute");
        }
        const XmlElement* text_node = sentence.child("text");
        if (!text_node) {
            fail_at(sentence, "<sentence id=\"" + *sentence_id +
                                  "\"> has no <text> child");
        }
        std::string text = trimmed(text_node->text);
        if (text.empty()) {
            fail_at(*text_node, "<sentence id=\"" + *sentence_id +
                                    "\"> has empty text");
        }
        const XmlElement* terms = sentence.child("aspectTerms");
        if (!terms) continue;  // sentence without annotated aspects

        std::size_t term_index = 0;
        for (const XmlElement& term : terms->children) {
            if (term.name != "aspectTerm") {
                fail_at(term, "unexpected element <" + term.name +
                                  "> in <aspectTerms>");
            }
            const std::string* term_text = term.attribute("term");
            const std::string* polarity_text = term.attribute("polarity");
            if (!term_text) {
                fail_at(term, "<aspectTerm> is missing its term attribute");
            }
            if (!polarity_text) {
                fail_at(term, "<aspectTerm> is missing its polarity attribute");
            }
            std::size_t index = term_index++;
            auto polarity = parse_polarity(*polarity_text);
            if (!polarity) {
                ++result.skipped;
                result.warnings.push_back(
                    "line " + std::to_string(term.line) + ": skipped aspect term "
                    "\"" + *term_text + "\" of sentence \"" + *sentence_id +
                    "\": unsupported polarity \"" + *polarity_text + "\"");
                continue;
            }
            SentimentInstance instance;
            instance.id = *sentence_id + "#" + std::to_string(index);
            instance.text = text;
            // "NULL" marks a record without an aspect target.
            instance.target = (*term_text == "NULL") ? std::string() : *term_text;
            instance.gold = *polarity;
            instance.is_implicit = false;
            instance.dataset = dataset;
            if (!seen_ids.insert(instance.id).second) {
                fail_at(term, "duplicate instance id \"" + instance.id + "\"");
            }
            result.instances.push_back(std::move(instance));
        }
    }
    return result;
}

XmlParseResult parse_semeval_xml_file(const std::string& path,
                                      DatasetName dataset) {
    return parse_semeval_xml(read_file(path), dataset);
}

std::vector<SentimentInstance> parse_jsonl(std::istream& input) {
    std::vector<SentimentInstance> instances;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(input, line)) {
        ++line_no;
        if (blank(line)) continue;
        json object = parse_line(line, line_no);

        SentimentInstance instance;
        instance.id = require_string(object, "id", line_no);
        if (instance.id.empty()) {
            throw ParseError("key \"id\" must be non-empty", line_no, 0);
        }
        instance.text = require_string(object, "text", line_no);
        if (instance.text.empty()) {
            throw ParseError("key \"text\" must be non-empty", line_no, 0);
        }
        instance.target = require_string(object, "target", line_no);
        std::string gold = require_string(object, "gold", line_no);
        auto polarity = parse_polarity(gold);
        if (!polarity) {
            throw ParseError("key \"gold\": unknown polarity \"" + gold + "\"",
                             line_no, 0);
        }
        instance.gold = *polarity;
        instance.is_implicit = require_bool(object, "is_implicit", line_no);
        std::string dataset = require_string(object, "dataset", line_no);
        auto dataset_name = parse_dataset_name(dataset);
        if (!dataset_name) {
            throw ParseError("key \"dataset\": unknown dataset \"" + dataset +
                                 "\"",
                             line_no, 0);
        }
        instance.dataset = *dataset_name;
        if (!seen_ids.insert(instance.id).second) {
            throw ParseError("duplicate id \"" + instance.id + "\"", line_no, 0);
        }
        instances.push_back(std::move(instance));
    }
    return instances;
}

std::vector<SentimentInstance> parse_jsonl_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    return parse_jsonl(in);
}

std::string serialize_jsonl(const std::vector<SentimentInstance>& instances) {
    std::string out;
    for (const SentimentInstance& instance : instances) {
        ordered_json object;
        object["id"] = instance.id;
        object["text"] = instance.text;
        object["target"] = instance.target;
        object["gold"] = to_string(instance.gold);
        object["is_implicit"] = instance.is_implicit;
        object["dataset"] = to_string(instance.dataset);
        out += object.dump();
        out += '\n';
    }
    return out;
}

std::map<std::string, bool> parse_flag_overlay(std::istream& input) {
    std::map<std::string, bool> flags;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(input, line)) {
        ++line_no;
        if (blank(line)) continue;
        json object = parse_line(line, line_no);
        std::string id = require_string(object, "id", line_no);
        bool is_implicit = require_bool(object, "is_implicit", line_no);
        if (!flags.emplace(id, is_implicit).second) {
            throw ParseError("duplicate id \"" + id + "\"", line_no, 0);
        }
    }
    return flags;
}

std::map<std::string, bool> parse_flag_overlay_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    return parse_flag_overlay(in);
}

std::vector<SentimentInstance> overlay_implicit_flags(
    const std::vector<SentimentInstance>& instances,
    const std::map<std::string, bool>& flags) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        index.emplace(instances[i].id, i);
    }
    std::vector<std::string> unmatched;
    for (const auto& [id, _] : flags) {
        if (!index.count(id)) unmatched.push_back(id);
    }
    if (!unmatched.empty()) {
        std::string message = "flag overlay references unknown ids:";
        for (const std::string& id : unmatched) message += " " + id;
        throw Error(message);
    }
    std::vector<SentimentInstance> result = instances;
    for (const auto& [id, value] : flags) {
        result[index[id]].is_implicit = value;
    }
    return result;
}

DatasetSummary summarize(const std::vector<SentimentInstance>& instances) {
    DatasetSummary summary;
    for (const SentimentInstance& instance : instances) {
        switch (instance.gold) {
            case PolarityLabel::Negative: ++summary.negative; break;
            case PolarityLabel::Neutral: ++summary.neutral; break;
            case PolarityLabel::Positive: ++summary.positive; break;
        }
        if (instance.is_implicit) ++summary.isa_count;
    }
    summary.total = summary.negative + summary.neutral + summary.positive;
    summary.isa_percent_hundredths =
        summary.total > 0 ? (10000 * summary.isa_count) / summary.total : 0;
    return summary;
}

DatasetSummary expected_summary(DatasetName dataset) {
    switch (dataset) {
        case DatasetName::Restaurant:
            return {196, 728, 196, 1120, 267, 2383};
        case DatasetName::Laptop:
            return {128, 341, 169, 638, 175, 2742};
    }
    throw Error("unknown dataset");
}

std::string ValidationReport::to_string() const {
    std::string out;
    for (const FieldCheck& check : checks) {
        out += check.field + ": expected " + std::to_string(check.expected) +
               ", actual " + std::to_string(check.actual) +
               (check.ok ? " [ok]" : " [MISMATCH]") + "\n";
    }
    out += pass ? "validation: PASS\n" : "validation: FAIL\n";
    return out;
}

ValidationReport validate_expected(const DatasetSummary& summary,
                                   const DatasetSummary& expected) {
    ValidationReport report;
    auto check = [&](const char* field, std::int64_t exp, std::int64_t act) {
        report.checks.push_back({field, exp, act, exp == act});
    };
    check("negative", expected.negative, summary.negative);
    check("positive", expected.positive, summary.positive);
    check("neutral", expected.neutral, summary.neutral);
    check("total", expected.total, summary.total);
    check("isa_count", expected.isa_count, summary.isa_count);
    check("isa_percent", expected.isa_percent_hundredths,
          summary.isa_percent_hundredths);
    report.pass = true;
    for (const FieldCheck& c : report.checks) report.pass = report.pass && c.ok;
    return report;
}

}  // namespace saot::corpus
