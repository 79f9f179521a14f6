#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "saot/polarity.hpp"

namespace saot::extraction {

enum class OccurrenceRule { LastMention, FirstMention };
enum class UnparseableFallback { CountAsWrong, AssignNeutral };

// Deterministic keyword-based normalization of free-form completion text.
// Keyword sets must be disjoint across labels (checked on construction).
struct ExtractionPolicy {
    std::array<std::vector<std::string>, kPolarityCount> keywords = {
        std::vector<std::string>{"negative"},
        std::vector<std::string>{"neutral"},
        std::vector<std::string>{"positive"},
    };
    OccurrenceRule occurrence = OccurrenceRule::LastMention;
    UnparseableFallback fallback = UnparseableFallback::CountAsWrong;

    void validate() const;  // throws Error on overlapping keyword sets
};

// Case-insensitive scan for keyword occurrences. Under LastMention the label
// whose keyword starts at the greatest character offset wins (FirstMention:
// smallest); same-offset overlaps resolve to the lower label in the order
// Negative < Neutral < Positive. No keyword anywhere -> nullopt (Unparseable).
std::optional<PolarityLabel> extract_polarity(std::string_view text,
                                              const ExtractionPolicy& policy);

// Maps an Unparseable outcome per the configured fallback: AssignNeutral ->
// Neutral, CountAsWrong -> nullopt (an explicit non-prediction, scored as a
// misclassification against any gold).
std::optional<PolarityLabel> resolve_unparseable(const ExtractionPolicy& policy);

std::string_view to_string(OccurrenceRule rule);
std::string_view to_string(UnparseableFallback fallback);
std::optional<OccurrenceRule> parse_occurrence_rule(std::string_view text);
std::optional<UnparseableFallback> parse_fallback(std::string_view text);

}  // namespace saot::extraction
