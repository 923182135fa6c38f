#pragma once

#include <string>

#include <json.hpp>

namespace chainstack::cli {

/// Serializes with every floating-point number at 17 significant digits so
/// equal inputs always give byte-identical text. Non-finite values become the
/// strings "Infinity", "-Infinity" and "NaN".
std::string to_json_text(const nlohmann::ordered_json& value, int indent = 2);

}  // namespace chainstack::cli
