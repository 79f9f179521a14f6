#include "saot/polarity.hpp"

namespace saot {

std::string_view to_string(PolarityLabel label) {
    switch (label) {
        case PolarityLabel::Negative: return "negative";
        case PolarityLabel::Neutral: return "neutral";
        case PolarityLabel::Positive: return "positive";
    }
    return "unknown";
}

std::string_view to_string(DatasetName dataset) {
    switch (dataset) {
        case DatasetName::Restaurant: return "restaurant";
        case DatasetName::Laptop: return "laptop";
    }
    return "unknown";
}

std::optional<PolarityLabel> parse_polarity(std::string_view text) {
    if (text == "negative") return PolarityLabel::Negative;
    if (text == "neutral") return PolarityLabel::Neutral;
    if (text == "positive") return PolarityLabel::Positive;
    return std::nullopt;
}

std::optional<DatasetName> parse_dataset_name(std::string_view text) {
    if (text == "restaurant") return DatasetName::Restaurant;
    if (text == "laptop") return DatasetName::Laptop;
    return std::nullopt;
}

}  // namespace saot
