#include "saot/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace saot::extraction {

namespace {

std::string lowered(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

}  // namespace

void ExtractionPolicy::validate() const {
    std::set<std::string> seen;
    for (const auto& set : keywords) {
        for (const auto& keyword : set) {
            if (keyword.empty()) throw Error("extraction keyword must be non-empty");
            if (!seen.insert(lowered(keyword)).second) {
                throw Error("extraction keyword \"" + keyword +
                            "\" appears under more than one label");
            }
        }
    }
}

std::optional<PolarityLabel> extract_polarity(std::string_view text,
                                              const ExtractionPolicy& policy) {
    policy.validate();
    const std::string haystack = lowered(text);

    const bool last = policy.occurrence == OccurrenceRule::LastMention;
    std::optional<PolarityLabel> best;
    std::size_t best_offset = 0;
    for (int label = 0; label < kPolarityCount; ++label) {
        for (const std::string& keyword : policy.keywords[label]) {
            const std::string needle = lowered(keyword);
            std::size_t pos = haystack.find(needle);
            while (pos != std::string::npos) {
                bool better;
                if (!best) {
                    better = true;
                } else if (pos == best_offset) {
                    // Same-offset overlap: lower label in the fixed order wins,
                    // and labels are visited in that order.
                    better = false;
                } else {
                    better = last ? pos > best_offset : pos < best_offset;
                }
                if (better) {
                    best = static_cast<PolarityLabel>(label);
                    best_offset = pos;
                }
                pos = haystack.find(needle, pos + 1);
            }
        }
    }
    return best;
}

std::optional<PolarityLabel> resolve_unparseable(const ExtractionPolicy& policy) {
    if (policy.fallback == UnparseableFallback::AssignNeutral) {
        return PolarityLabel::Neutral;
    }
    return std::nullopt;
}

std::string_view to_string(OccurrenceRule rule) {
    return rule == OccurrenceRule::LastMention ? "last" : "first";
}

std::string_view to_string(UnparseableFallback fallback) {
    return fallback == UnparseableFallback::CountAsWrong ? "count_as_wrong"
                                                         : "assign_neutral";
}

std::optional<OccurrenceRule> parse_occurrence_rule(std::string_view text) {
    if (text == "last") return OccurrenceRule::LastMention;
    if (text == "first") return OccurrenceRule::FirstMention;
    return std::nullopt;
}

std::optional<UnparseableFallback> parse_fallback(std::string_view text) {
    if (text == "count_as_wrong") return UnparseableFallback::CountAsWrong;
    if (text == "assign_neutral") return UnparseableFallback::AssignNeutral;
    return std::nullopt;
}

}  // namespace saot::extraction
