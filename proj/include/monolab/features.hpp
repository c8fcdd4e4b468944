#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "monolab/datagen.hpp"
#include "monolab/linalg.hpp"

namespace monolab {

// Ordered hybrid feature names for dimension n:
//   spectral_radius, fiedler_value, trace, re_lambda_1..n, im_lambda_1..n,
//   abs_c_0..abs_c_{n-1}, entry_1_1..entry_n_n
// for a total of 3 + 3n + n^2.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::size_t n);

  std::size_t n() const { return n_; }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  // Throws std::out_of_range for unknown names.
  std::size_t index_of(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;

  std::size_t abs_c0_index() const { return 3 + 2 * n_; }
  std::size_t abs_c1_index() const { return 3 + 2 * n_ + 1; }
  std::size_t entries_offset() const { return 3 + 3 * n_; }

  std::uint64_t hash() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::string> names_;
};

// Accepts shorthand such as "abs_c0" for "abs_c_0".
std::string canonical_feature_name(std::string_view name);

double spectral_radius(const Spectrum& s);

// lambda_2 of L = D - W, W_ij = (|A_ij| + |A_ji|) / 2 off the diagonal.
double fiedler_value(const SquareMatrix& a);

// Full hybrid vector in FeatureSchema(n) order. Eigenvalues are sorted by
// (Re, Im) descending. Propagates ConvergenceFailure.
std::vector<double> derived_features(const SquareMatrix& a);

struct RatioFeatures {
  std::optional<double> r01;   // |c_0 / c_1|
  std::optional<double> r012;  // |c_0 / (c_1 + c_2)|, with c_n = 1
};

inline constexpr double kDefaultDenomTol = 1e-300;

RatioFeatures ratio_features(const CharPoly& c, double denom_tol = kDefaultDenomTol);

struct RowFailure {
  std::size_t sample_index;
  std::string message;
};

// Row-major table of schema features plus label and ratio columns. Undefined
// ratios are stored as NaN in memory and as empty CSV fields.
struct FeatureTable {
  FeatureSchema schema;
  std::vector<double> values;  // rows() x schema.size()
  std::vector<std::uint8_t> labels;
  std::vector<double> r01;
  std::vector<double> r012;
  std::vector<std::size_t> source_index;
  std::vector<RowFailure> failures;

  std::size_t rows() const { return labels.size(); }
  std::size_t cols() const { return schema.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span(values).subspan(i * cols(), cols());
  }
  std::span<double> row(std::size_t i) { return std::span(values).subspan(i * cols(), cols()); }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

  // Column by name; "r01" and "r012" address the ratio columns.
  std::vector<double> column(std::string_view name) const;

  void append_row(std::span<const double> features, bool label, double r01_value,
                  double r012_value, std::size_t source);
};

// Parallel over rows; output order equals dataset order. Rows whose
// eigenvalue computation fails are listed in `failures` and omitted.
FeatureTable featurize_dataset(const Dataset& d);

// Rows where keep[i] is true, in order.
FeatureTable filter_rows(const FeatureTable& t, std::span<const std::uint8_t> keep);

// Dense row-major design matrix of the named columns.
struct InputMatrix {
  std::vector<std::string> names;
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols() const { return names.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span(values).subspan(i * cols(), cols());
  }
};

// Rows with a NaN in any selected column are dropped; their table indices are
// reported through `dropped` when given.
InputMatrix select_columns(const FeatureTable& t, std::span<const std::string> names,
                           std::vector<std::size_t>* kept = nullptr,
                           std::vector<std::size_t>* dropped = nullptr);

// Per-feature z-score transform.
struct Standardizer {
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<std::uint8_t> zero_variance;

  std::size_t dim() const { return means.size(); }
  void transform(std::span<double> x) const;
  void inverse_transform(std::span<double> x) const;
  void transform_rows(std::span<double> values) const;
  void inverse_transform_rows(std::span<double> values) const;
};

// Population mean/std over rows selected by train_mask (>= 2 rows).
Standardizer fit_standardizer(std::span<const double> values, std::size_t cols,
                              std::span<const std::uint8_t> train_mask);

// Feature CSV: schema names, then label,r01,r012.
void write_feature_csv(const FeatureTable& t, const std::filesystem::path& path);
FeatureTable read_feature_csv(const std::filesystem::path& path);

// Sidecar `<csv>.schema.json`: n, names, name->index map, schema hash and the
// standardizer (if the schema columns were standardized).
void write_schema_json(const FeatureTable& t, const Standardizer* std_used,
                       const std::filesystem::path& path);

// Loads a feature CSV and, when its sidecar records a standardizer, maps the
// schema columns back to raw units.
FeatureTable load_feature_table(const std::filesystem::path& csv_path, bool* was_standardized = nullptr);

std::filesystem::path schema_sidecar_path(const std::filesystem::path& csv_path);

namespace reference {

FeatureTable featurize_dataset(const Dataset& d);

}  // namespace reference

}  // namespace monolab
