#include "saot/chains.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "digest.hpp"
#include "json.hpp"

namespace saot::chains {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kKnownPlaceholders[] = {
    "sentence", "target", "analysis", "reflection", "hop1", "hop2",
};

bool is_identifier_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_identifier_char(char c) {
    return is_identifier_start(c) || (c >= '0' && c <= '9');
}

// A placeholder is "{identifier}" exactly; any other brace is literal text.
// Returns the identifier and advances pos past the closing brace, or returns
// nullopt leaving pos untouched.
std::optional<std::string> placeholder_at(std::string_view body,
                                          std::size_t& pos) {
    std::size_t i = pos + 1;
    if (i >= body.size() || !is_identifier_start(body[i])) return std::nullopt;
    std::size_t start = i;
    while (i < body.size() && is_identifier_char(body[i])) ++i;
    if (i >= body.size() || body[i] != '}') return std::nullopt;
    std::string name(body.substr(start, i - start));
    pos = i + 1;
    return name;
}

}  // namespace

bool is_known_placeholder(std::string_view name) {
    return std::find(std::begin(kKnownPlaceholders), std::end(kKnownPlaceholders),
                     name) != std::end(kKnownPlaceholders);
}

PromptTemplate::PromptTemplate(std::string name, std::string body)
    : name_(std::move(name)), body_(std::move(body)) {
    std::size_t pos = 0;
    while (pos < body_.size()) {
        if (body_[pos] != '{') {
            ++pos;
            continue;
        }
        std::size_t next = pos;
        auto placeholder = placeholder_at(body_, next);
        if (!placeholder) {
            ++pos;
            continue;
        }
        pos = next;
        if (!is_known_placeholder(*placeholder)) {
            throw TemplateError("template \"" + name_ +
                                "\": unknown placeholder {" + *placeholder +
                                "}");
        }
        if (std::find(placeholders_.begin(), placeholders_.end(),
                      *placeholder) == placeholders_.end()) {
            placeholders_.push_back(*placeholder);
        }
    }
}

std::string PromptTemplate::render(
    const std::map<std::string, std::string>& vars) const {
    std::string out;
    out.reserve(body_.size());
    std::size_t pos = 0;
    while (pos < body_.size()) {
        if (body_[pos] != '{') {
            out.push_back(body_[pos++]);
            continue;
        }
        std::size_t next = pos;
        auto placeholder = placeholder_at(body_, next);
        if (!placeholder) {
            out.push_back(body_[pos++]);
            continue;
        }
        auto it = vars.find(*placeholder);
        if (it == vars.end()) {
            throw TemplateError("template \"" + name_ +
                                "\": no value for placeholder {" + *placeholder +
                                "}");
        }
        out += it->second;
        pos = next;
    }
    return out;
}

void TemplateSet::add(PromptTemplate tmpl) {
    std::string name = tmpl.name();
    templates_.insert_or_assign(std::move(name), std::move(tmpl));
}

const PromptTemplate& TemplateSet::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw TemplateError("template set has no template \"" + name + "\"");
    }
    return it->second;
}

bool TemplateSet::contains(const std::string& name) const {
    return templates_.count(name) > 0;
}

std::vector<std::string> TemplateSet::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : templates_) out.push_back(name);
    return out;
}

std::string TemplateSet::content_hash() const {
    std::string canonical;
    for (const auto& [name, tmpl] : templates_) {  // map order: sorted by name
        canonical += name;
        canonical += '\x1f';
        canonical += tmpl.body();
        canonical += '\x1e';
    }
    return detail::sha256_hex(canonical);
}

TemplateSet TemplateSet::load_directory(const std::string& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw TemplateError("template directory not found: " + dir);
    }
    TemplateSet set;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw TemplateError("cannot read template file: " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        std::string body = buf.str();
        while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) {
            body.pop_back();
        }
        set.add(PromptTemplate(path.stem().string(), std::move(body)));
    }
    return set;
}

std::string_view to_string(ChainKind kind) {
    switch (kind) {
        case ChainKind::Direct: return "direct";
        case ChainKind::Thor: return "thor";
        case ChainKind::Saot: return "saot";
    }
    return "unknown";
}

std::optional<ChainKind> parse_chain_kind(std::string_view text) {
    if (text == "direct") return ChainKind::Direct;
    if (text == "thor") return ChainKind::Thor;
    if (text == "saot") return ChainKind::Saot;
    return std::nullopt;
}

std::vector<std::string> required_templates(ChainKind kind) {
    switch (kind) {
        case ChainKind::Direct:
            return {"direct"};
        case ChainKind::Thor:
            return {"thor_aspect", "thor_opinion", "thor_polarity"};
        case ChainKind::Saot:
            return {"saot_analyze", "saot_reflect", "saot_infer"};
    }
    return {};
}

std::string trace_to_json(const ChainTrace& trace) {
    ordered_json object;
    object["instance_id"] = trace.instance_id;
    object["chain"] = to_string(trace.chain);
    ordered_json steps = ordered_json::array();
    for (const ChainStep& step : trace.steps) {
        ordered_json s;
        s["step_name"] = step.step_name;
        s["prompt"] = step.prompt;
        s["response"] = step.response;
        steps.push_back(s);
    }
    object["steps"] = steps;
    object["final_text"] = trace.final_text;
    return object.dump();
}

ChainTrace trace_from_json(const std::string& line) {
    json object = json::parse(line);
    ChainTrace trace;
    trace.instance_id = object.at("instance_id").get<std::string>();
    auto kind = parse_chain_kind(object.at("chain").get<std::string>());
    if (!kind) throw Error("trace: unknown chain kind");
    trace.chain = *kind;
    for (const json& s : object.at("steps")) {
        trace.steps.push_back({s.at("step_name").get<std::string>(),
                               s.at("prompt").get<std::string>(),
                               s.at("response").get<std::string>()});
    }
    trace.final_text = object.at("final_text").get<std::string>();
    return trace;
}

ChainError::ChainError(const std::string& message, std::string instance_id,
                       std::string step_name, ChainTrace partial)
    : Error("instance " + instance_id + ", step " + step_name + ": " + message),
      instance_id_(std::move(instance_id)),
      step_name_(std::move(step_name)),
      partial_(std::move(partial)) {}

namespace {

// Renders one step's prompt, runs the completion, and appends the step to the
// trace. Failures surface as ChainError carrying the steps completed so far.
std::string execute_step(backend::Backend& be, const TemplateSet& templates,
                         const std::string& template_name,
                         const std::string& step_name,
                         const std::map<std::string, std::string>& vars,
                         const ChainOptions& options, ChainTrace& trace) {
    std::string prompt;
    try {
        prompt = templates.get(template_name).render(vars);
    } catch (const std::exception& ex) {
        throw ChainError(ex.what(), trace.instance_id, step_name, trace);
    }
    backend::CompletionRequest req;
    req.model = options.request.model;
    req.prompt = prompt;
    req.max_tokens = options.request.max_tokens;
    req.temperature = options.request.temperature;
    req.stop = options.request.stop;
    std::string response;
    try {
        response = be.complete(req).text;
    } catch (const std::exception& ex) {
        throw ChainError(ex.what(), trace.instance_id, step_name, trace);
    }
    trace.steps.push_back({step_name, std::move(prompt), response});
    return response;
}

std::map<std::string, std::string> base_vars(
    const corpus::SentimentInstance& instance) {
    return {{"sentence", instance.text}, {"target", instance.target}};
}

}  // namespace

ChainTrace run_direct(backend::Backend& be, const TemplateSet& templates,
                      const corpus::SentimentInstance& instance,
                      const ChainOptions& options) {
    ChainTrace trace;
    trace.instance_id = instance.id;
    trace.chain = ChainKind::Direct;
    trace.final_text = execute_step(be, templates, "direct", "direct",
                                    base_vars(instance), options, trace);
    return trace;
}

ChainTrace run_thor(backend::Backend& be, const TemplateSet& templates,
                    const corpus::SentimentInstance& instance,
                    const ChainOptions& options) {
    ChainTrace trace;
    trace.instance_id = instance.id;
    trace.chain = ChainKind::Thor;
    auto vars = base_vars(instance);
    std::string hop1 = execute_step(be, templates, "thor_aspect", "aspect",
                                    vars, options, trace);
    vars["hop1"] = hop1;
    std::string hop2 = execute_step(be, templates, "thor_opinion", "opinion",
                                    vars, options, trace);
    vars["hop2"] = hop2;
    trace.final_text = execute_step(be, templates, "thor_polarity", "polarity",
                                    vars, options, trace);
    return trace;
}

ChainTrace run_saot(backend::Backend& be, const TemplateSet& templates,
                    const corpus::SentimentInstance& instance,
                    const ChainOptions& options) {
    ChainTrace trace;
    trace.instance_id = instance.id;
    trace.chain = ChainKind::Saot;
    auto vars = base_vars(instance);
    std::string analysis = execute_step(be, templates, "saot_analyze", "analyze",
                                        vars, options, trace);
    auto reflect_vars = vars;
    if (!options.independent_reflect) reflect_vars["analysis"] = analysis;
    std::string reflection = execute_step(be, templates, "saot_reflect",
                                          "reflect", reflect_vars, options,
                                          trace);
    vars["analysis"] = analysis;
    vars["reflection"] = reflection;
    trace.final_text = execute_step(be, templates, "saot_infer", "infer", vars,
                                    options, trace);
    return trace;
}

ChainTrace run_chain(ChainKind kind, backend::Backend& be,
                     const TemplateSet& templates,
                     const corpus::SentimentInstance& instance,
                     const ChainOptions& options) {
    switch (kind) {
        case ChainKind::Direct:
            return run_direct(be, templates, instance, options);
        case ChainKind::Thor:
            return run_thor(be, templates, instance, options);
        case ChainKind::Saot:
            return run_saot(be, templates, instance, options);
    }
    throw Error("unknown chain kind");
}

}  // namespace saot::chains
