#pragma once

#include <string>
#include <string_view>

namespace saot::detail {

std::string sha256_hex(std::string_view data);

// Shortest round-trip decimal form, locale-independent (std::to_chars).
std::string shortest_double(double value);

}  // namespace saot::detail
