#pragma once

// Scenario files (YAML), grid specifications and CSV number formatting.

#include "wcn/model.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace wcn {

/// Malformed scenario text; the message carries the line and field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses and validates a scenario document. Missing sections take their
/// defaults (802.11g rate constants, home_rate = solo public rate).
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

/// Emits a document that parse_scenario maps back to the same Scenario.
std::string dump_scenario(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// "a:b:step" -> a, a + step, ..., b (inclusive, no accumulated drift).
std::vector<double> parse_grid(const std::string& spec);

/// Decimal notation with 12 significant digits, trailing zeros trimmed.
std::string format_decimal(double value);

}  // namespace wcn
