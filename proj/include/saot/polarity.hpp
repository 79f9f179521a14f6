#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace saot {

// Three-way sentiment polarity. The enumerator order defines the total
// order Negative < Neutral < Positive used for deterministic tie-breaking.
enum class PolarityLabel {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
};

inline constexpr int kPolarityCount = 3;

enum class DatasetName {
    Restaurant = 0,
    Laptop = 1,
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

std::string_view to_string(PolarityLabel label);
std::string_view to_string(DatasetName dataset);

// Lowercase names only ("positive", "negative", "neutral"); anything else
// yields nullopt so callers can decide between skip and hard error.
std::optional<PolarityLabel> parse_polarity(std::string_view text);
std::optional<DatasetName> parse_dataset_name(std::string_view text);

}  // namespace saot
