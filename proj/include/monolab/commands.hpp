#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "monolab/config.hpp"
#include "monolab/features.hpp"
#include "monolab/linalg.hpp"
#include "monolab/nn.hpp"

namespace monolab::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;  // degenerate data, insufficient tail, cap hit, ...
inline constexpr int kExitUsage = 2;   // I/O, format and usage errors

// Entry point: args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Rows separated by ';' or newlines, entries by ',' or whitespace.
// Throws NonSquareInput for ragged or non-square input.
SquareMatrix parse_matrix_text(std::string_view text);

struct CheckReport {
  std::size_t n = 0;
  bool oracle_monotone = false;
  bool singular = false;
  std::optional<double> r01;
  std::optional<double> threshold;
  std::optional<bool> ratio_pass;     // r01 <= threshold
  std::optional<double> inverse_trace;
  double c0_abs = 0.0;
  std::optional<double> formula_p_hat;
  bool formula_monotone = false;
  bool formula_reduced = false;
};

// Three independent verdicts: exact oracle, ratio rule and symbolic formula.
CheckReport check_matrix(const SquareMatrix& a, const LabConfig& cfg,
                         std::optional<double> threshold_override = std::nullopt);
std::string format_check_report(const CheckReport& r);

// Model input columns for a preset over schema s.
std::vector<std::string> preset_columns(Preset p, const FeatureSchema& s);

// Rows with defined r01 < ratio_cut, then the majority class undersampled at
// random to the minority count. Surviving rows keep their table order.
FeatureTable subdomain_filter(const FeatureTable& t, double ratio_cut, std::uint64_t seed);

}  // namespace monolab::cli
