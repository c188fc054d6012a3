#pragma once

#include <string>

#include "fedslice/harness.hpp"

namespace fedslice {

// Strict JSON decode: unknown keys are errors (misspelled fields must not be
// silently ignored), missing keys take the documented defaults, and the
// result is fully validated. Throws ConfigError naming the field path, or
// the line number for syntax errors.
ExperimentConfig parse_config(const std::string& json_text);

// Canonical full form; parse_config(emit_config(c)) == c for any valid c.
std::string emit_config(const ExperimentConfig& config);

}  // namespace fedslice
