#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace monolab {

// Key-value configuration: one `key = value` per line, `#` starts a comment.
// Recognized keys:
//   T_<n>                        sample-maximum ratio threshold for size n
//   preset.<NAME>.width_scale    default hidden-width divisor for a preset
// Unknown keys are rejected so typos do not pass silently.
struct LabConfig {
  std::map<std::size_t, double> thresholds;
  std::map<std::string, double> width_scale;

  std::optional<double> threshold(std::size_t n) const;
};

// Built-in table: T_5 = 0.5968, T_7 = 0.1755, T_10 = 0.104.
LabConfig default_config();

// Throws FormatError naming the offending line.
LabConfig parse_config(std::string_view text, LabConfig base = default_config());
LabConfig load_config(const std::filesystem::path& path);

}  // namespace monolab
