#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "saot/backend.hpp"
#include "saot/corpus.hpp"

namespace saot::chains {

// Placeholders a template body may reference. {sentence} and {target} come
// from the instance; the rest are step outputs wired in by the chain runner.
//   direct:        {sentence} {target}
//   thor_aspect:   {sentence} {target}
//   thor_opinion:  {sentence} {target} {hop1}
//   thor_polarity: {sentence} {target} {hop1} {hop2}
//   saot_analyze:  {sentence} {target}
//   saot_reflect:  {sentence} {target} {analysis}   ({analysis} withheld in
//                                                    independent mode)
//   saot_infer:    {sentence} {target} {analysis} {reflection}
bool is_known_placeholder(std::string_view name);

class TemplateError : public Error {
public:
    using Error::Error;
};

class PromptTemplate {
public:
    // Validates at load: every {identifier} in body must be a known
    // placeholder. Braces not forming {identifier} are literal text.
    PromptTemplate(std::string name, std::string body);

    const std::string& name() const { return name_; }
    const std::string& body() const { return body_; }
    const std::vector<std::string>& placeholders() const { return placeholders_; }

    // Literal single-pass substitution, no recursion, no escaping. Every
    // placeholder in the body must have a value in vars.
    std::string render(const std::map<std::string, std::string>& vars) const;

private:
    std::string name_;
    std::string body_;
    std::vector<std::string> placeholders_;  // unique, in first-appearance order
};

// A named collection of templates, usually loaded from a directory with one
// file per template (the file stem is the template name).
class TemplateSet {
public:
    TemplateSet() = default;

    void add(PromptTemplate tmpl);
    const PromptTemplate& get(const std::string& name) const;
    bool contains(const std::string& name) const;
    std::vector<std::string> names() const;

    // SHA-256 over the sorted (name, body) pairs; pinned into the manifest
    // so template edits are detectable on resume.
    std::string content_hash() const;

    static TemplateSet load_directory(const std::string& dir);

private:
    std::map<std::string, PromptTemplate> templates_;
};

enum class ChainKind { Direct, Thor, Saot };

std::string_view to_string(ChainKind kind);
std::optional<ChainKind> parse_chain_kind(std::string_view text);

// Template names a chain requires from its set.
std::vector<std::string> required_templates(ChainKind kind);

struct ChainStep {
    std::string step_name;
    std::string prompt;
    std::string response;
};

struct ChainTrace {
    std::string instance_id;
    ChainKind chain = ChainKind::Direct;
    std::vector<ChainStep> steps;
    std::string final_text;  // always the last step's response
};

// JSONL persistence, one trace per line.
std::string trace_to_json(const ChainTrace& trace);
ChainTrace trace_from_json(const std::string& line);

// Request knobs shared by every step of a chain run.
struct RequestSettings {
    std::string model;
    int max_tokens = 256;
    double temperature = 0.0;
    std::vector<std::string> stop;
};

struct ChainOptions {
    RequestSettings request;
    // When true the reflect step sees only {sentence}/{target}; the default
    // hands it the analyze output as {analysis}.
    bool independent_reflect = false;
};

// A chain step failed. Carries the instance and the steps completed so far.
class ChainError : public Error {
public:
    ChainError(const std::string& message, std::string instance_id,
               std::string step_name, ChainTrace partial);
    const std::string& instance_id() const { return instance_id_; }
    const std::string& step_name() const { return step_name_; }
    const ChainTrace& partial_trace() const { return partial_; }

private:
    std::string instance_id_;
    std::string step_name_;
    ChainTrace partial_;
};

// Single completion from the "direct" template. 1 step, 1 backend call.
ChainTrace run_direct(backend::Backend& be, const TemplateSet& templates,
                      const corpus::SentimentInstance& instance,
                      const ChainOptions& options);

// Three sequential hops (aspect, opinion, polarity); hop k's response feeds
// hop k+1's variable map as {hop1}/{hop2}. 3 steps, 3 backend calls.
ChainTrace run_thor(backend::Backend& be, const TemplateSet& templates,
                    const corpus::SentimentInstance& instance,
                    const ChainOptions& options);

// Analyze and reflect prompts, then an infer prompt embedding both outputs
// ({analysis} then {reflection}; the shipped template labels the sections).
// 3 steps, 3 backend calls.
ChainTrace run_saot(backend::Backend& be, const TemplateSet& templates,
                    const corpus::SentimentInstance& instance,
                    const ChainOptions& options);

ChainTrace run_chain(ChainKind kind, backend::Backend& be,
                     const TemplateSet& templates,
                     const corpus::SentimentInstance& instance,
                     const ChainOptions& options);

}  // namespace saot::chains
