#include "monolab/config.hpp"

#include <cctype>

#include "monolab/errors.hpp"
#include "monolab/io.hpp"

namespace monolab {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<double> LabConfig::threshold(std::size_t n) const {
  auto it = thresholds.find(n);
  if (it == thresholds.end()) return std::nullopt;
  return it->second;
}

LabConfig default_config() {
  LabConfig c;
  c.thresholds = {{5, 0.5968}, {7, 0.1755}, {10, 0.104}};
  return c;
}

LabConfig parse_config(std::string_view text, LabConfig base) {
  std::size_t line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string_view::npos) throw FormatError(where + ": expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view val = trim(line.substr(eq + 1));
    double v;
    try {
      v = parse_double(val);
    } catch (const FormatError&) {
      throw FormatError(where + ": value is not a number");
    }
    if (key.size() > 2 && key.substr(0, 2) == "T_") {
      std::size_t n = 0;
      for (char ch : key.substr(2)) {
        if (!std::isdigit(static_cast<unsigned char>(ch))) throw FormatError(where + ": bad threshold key");
        n = n * 10 + static_cast<std::size_t>(ch - '0');
      }
      if (n < 1 || !(v > 0.0)) throw FormatError(where + ": threshold must be positive for n >= 1");
      base.thresholds[n] = v;
    } else if (key.starts_with("preset.") && key.ends_with(".width_scale")) {
      const std::string_view name = key.substr(7, key.size() - 7 - 12);
      if (name.empty() || !(v > 0.0)) throw FormatError(where + ": bad preset width_scale");
      base.width_scale[std::string(name)] = v;
    } else {
      throw FormatError(where + ": unknown key '" + std::string(key) + "'");
    }
  }
  return base;
}

LabConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

}  // namespace monolab
