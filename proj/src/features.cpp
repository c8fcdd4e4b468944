#include "monolab/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "monolab/errors.hpp"
#include "monolab/io.hpp"

namespace monolab {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

FeatureSchema::FeatureSchema(std::size_t n) : n_(n) {
  names_.reserve(3 + 3 * n + n * n);
  names_.emplace_back("spectral_radius");
  names_.emplace_back("fiedler_value");
  names_.emplace_back("trace");
  for (std::size_t i = 1; i <= n; ++i) names_.push_back("re_lambda_" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) names_.push_back("im_lambda_" + std::to_string(i));
  for (std::size_t k = 0; k < n; ++k) names_.push_back("abs_c_" + std::to_string(k));
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= n; ++j)
      names_.push_back("entry_" + std::to_string(i) + "_" + std::to_string(j));
}

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
  const std::string canon = canonical_feature_name(name);
  const auto it = std::find(names_.begin(), names_.end(), canon);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw std::out_of_range("unknown feature: " + std::string(name));
}

std::uint64_t FeatureSchema::hash() const { return hash_strings(names_); }

std::string canonical_feature_name(std::string_view name) {
  // abs_c0 -> abs_c_0
  constexpr std::string_view prefix = "abs_c";
  if (name.size() > prefix.size() && name.substr(0, prefix.size()) == prefix &&
      std::isdigit(static_cast<unsigned char>(name[prefix.size()]))) {
    return "abs_c_" + std::string(name.substr(prefix.size()));
  }
  return std::string(name);
}

double spectral_radius(const Spectrum& s) {
  double r = 0.0;
  for (const auto& ev : s.eigenvalues) r = std::max(r, std::abs(ev));
  return r;
}

double fiedler_value(const SquareMatrix& a) {
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("fiedler_value: n must be >= 2");
  SquareMatrix lap(n);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = 0.5 * (std::abs(a(i, j)) + std::abs(a(j, i)));
      lap(i, j) = -w;
      degree += w;
    }
    lap(i, i) = degree;
  }
  return symmetric_eigenvalues(lap)[1];
}

std::vector<double> derived_features(const SquareMatrix& a) {
  const std::size_t n = a.size();
  const FeatureSchema schema(n);
  std::vector<double> f;
  f.reserve(schema.size());

  Spectrum spec = eigenvalues(a);
  std::sort(spec.eigenvalues.begin(), spec.eigenvalues.end(),
            [](const std::complex<double>& x, const std::complex<double>& y) {
              if (x.real() != y.real()) return x.real() > y.real();
              return x.imag() > y.imag();
            });
  const CharPoly cp = char_poly(a);

  f.push_back(spectral_radius(spec));
  f.push_back(fiedler_value(a));
  f.push_back(trace(a));
  for (const auto& ev : spec.eigenvalues) f.push_back(ev.real());
  for (const auto& ev : spec.eigenvalues) f.push_back(ev.imag());
  for (double c : cp.coeffs) f.push_back(std::abs(c));
  for (double v : a.entries()) f.push_back(v);
  return f;
}

RatioFeatures ratio_features(const CharPoly& c, double denom_tol) {
  if (denom_tol < 0.0) throw std::invalid_argument("ratio_features: denom_tol must be >= 0");
  RatioFeatures r;
  const double c0 = c.coeff(0);
  const double c1 = c.coeff(1);
  const double c12 = c1 + c.coeff(2);
  if (std::abs(c1) > denom_tol) r.r01 = std::abs(c0) / std::abs(c1);
  if (std::abs(c12) > denom_tol) r.r012 = std::abs(c0) / std::abs(c12);
  return r;
}

std::vector<double> FeatureTable::column(std::string_view name) const {
  std::vector<double> out;
  out.reserve(rows());
  if (name == "r01") return r01;
  if (name == "r012") return r012;
  const std::size_t j = schema.index_of(name);
  for (std::size_t i = 0; i < rows(); ++i) out.push_back(at(i, j));
  return out;
}

void FeatureTable::append_row(std::span<const double> features, bool label, double r01_value,
                              double r012_value, std::size_t source) {
  if (features.size() != cols()) throw DimensionMismatch("append_row: feature count mismatch");
  values.insert(values.end(), features.begin(), features.end());
  labels.push_back(label ? 1 : 0);
  r01.push_back(r01_value);
  r012.push_back(r012_value);
  source_index.push_back(source);
}

namespace {

struct RowResult {
  std::vector<double> features;
  RatioFeatures ratios;
  std::string error;
};

RowResult featurize_row(const SquareMatrix& a) {
  RowResult r;
  try {
    r.features = derived_features(a);
    r.ratios = ratio_features(char_poly(a));
  } catch (const ConvergenceFailure& e) {
    r.error = e.what();
  }
  return r;
}

FeatureTable assemble(const Dataset& d, std::vector<RowResult>& rows) {
  FeatureTable t;
  t.schema = FeatureSchema(d.n);
  t.values.reserve(rows.size() * t.schema.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& r = rows[i];
    if (!r.error.empty()) {
      t.failures.push_back({i, std::move(r.error)});
      continue;
    }
    t.append_row(r.features, d.samples[i].monotone, r.ratios.r01.value_or(kNaN),
                 r.ratios.r012.value_or(kNaN), i);
  }
  return t;
}

void check_nonempty(const Dataset& d) {
  if (d.samples.empty()) throw std::invalid_argument("featurize_dataset: empty dataset");
}

}  // namespace

FeatureTable featurize_dataset(const Dataset& d) {
  check_nonempty(d);
  std::vector<RowResult> rows(d.samples.size());
  const auto count = static_cast<std::int64_t>(rows.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < count; ++i) rows[i] = featurize_row(d.samples[i].matrix);
  return assemble(d, rows);
}

namespace reference {

FeatureTable featurize_dataset(const Dataset& d) {
  check_nonempty(d);
  std::vector<RowResult> rows;
  rows.reserve(d.samples.size());
  for (const auto& s : d.samples) rows.push_back(featurize_row(s.matrix));
  return assemble(d, rows);
}

}  // namespace reference

FeatureTable filter_rows(const FeatureTable& t, std::span<const std::uint8_t> keep) {
  if (keep.size() != t.rows()) throw DimensionMismatch("filter_rows: mask length mismatch");
  FeatureTable out;
  out.schema = t.schema;
  out.failures = t.failures;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    if (keep[i]) out.append_row(t.row(i), t.labels[i] != 0, t.r01[i], t.r012[i], t.source_index[i]);
  }
  return out;
}

InputMatrix select_columns(const FeatureTable& t, std::span<const std::string> names,
                           std::vector<std::size_t>* kept, std::vector<std::size_t>* dropped) {
  InputMatrix m;
  std::vector<const std::vector<double>*> ratio_cols;
  std::vector<std::ptrdiff_t> idx;
  for (const auto& raw : names) {
    const std::string name = canonical_feature_name(raw);
    m.names.push_back(name);
    if (name == "r01") {
      idx.push_back(-1);
    } else if (name == "r012") {
      idx.push_back(-2);
    } else {
      idx.push_back(static_cast<std::ptrdiff_t>(t.schema.index_of(name)));
    }
  }
  std::vector<double> buf(names.size());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const double v = idx[j] == -1 ? t.r01[i] : idx[j] == -2 ? t.r012[i] : t.at(i, idx[j]);
      if (std::isnan(v)) ok = false;
      buf[j] = v;
    }
    if (!ok) {
      if (dropped) dropped->push_back(i);
      continue;
    }
    m.values.insert(m.values.end(), buf.begin(), buf.end());
    ++m.rows;
    if (kept) kept->push_back(i);
  }
  return m;
}

void Standardizer::transform(std::span<double> x) const {
  if (x.size() != dim()) throw DimensionMismatch("Standardizer: dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - means[j]) / stds[j];
}

void Standardizer::inverse_transform(std::span<double> x) const {
  if (x.size() != dim()) throw DimensionMismatch("Standardizer: dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = x[j] * stds[j] + means[j];
}

void Standardizer::transform_rows(std::span<double> values) const {
  if (dim() == 0 || values.size() % dim() != 0) throw DimensionMismatch("Standardizer: bad row block");
  for (std::size_t off = 0; off < values.size(); off += dim()) transform(values.subspan(off, dim()));
}

void Standardizer::inverse_transform_rows(std::span<double> values) const {
  if (dim() == 0 || values.size() % dim() != 0) throw DimensionMismatch("Standardizer: bad row block");
  for (std::size_t off = 0; off < values.size(); off += dim())
    inverse_transform(values.subspan(off, dim()));
}

Standardizer fit_standardizer(std::span<const double> values, std::size_t cols,
                              std::span<const std::uint8_t> train_mask) {
  if (cols == 0 || values.size() % cols != 0) throw DimensionMismatch("fit_standardizer: bad shape");
  const std::size_t rows = values.size() / cols;
  if (train_mask.size() != rows) throw DimensionMismatch("fit_standardizer: mask length mismatch");
  const auto selected = static_cast<std::size_t>(std::count(train_mask.begin(), train_mask.end(), 1));
  if (selected < 2) throw std::invalid_argument("fit_standardizer: need >= 2 training rows");

  Standardizer s;
  s.means.assign(cols, 0.0);
  s.stds.assign(cols, 0.0);
  s.zero_variance.assign(cols, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!train_mask[i]) continue;
    for (std::size_t j = 0; j < cols; ++j) s.means[j] += values[i * cols + j];
  }
  for (double& m : s.means) m /= static_cast<double>(selected);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!train_mask[i]) continue;
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = values[i * cols + j] - s.means[j];
      s.stds[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < cols; ++j) {
    s.stds[j] = std::sqrt(s.stds[j] / static_cast<double>(selected));
    // relative floor: a column that is constant up to rounding counts as zero variance
    if (!(s.stds[j] > 1e-12 * std::max(1.0, std::abs(s.means[j])))) {
      s.stds[j] = 1.0;
      s.zero_variance[j] = 1;
    }
  }
  return s;
}

std::filesystem::path schema_sidecar_path(const std::filesystem::path& csv_path) {
  return std::filesystem::path(csv_path.string() + ".schema.json");
}

void write_feature_csv(const FeatureTable& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& name : t.schema.names()) out << name << ',';
  out << "label,r01,r012\n";
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (double v : t.row(i)) out << format_double(v) << ',';
    out << int(t.labels[i]) << ',';
    out << (std::isnan(t.r01[i]) ? std::string{} : format_double(t.r01[i])) << ',';
    out << (std::isnan(t.r012[i]) ? std::string{} : format_double(t.r012[i])) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open feature table: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty feature table: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  if (header.size() < 4 || header[header.size() - 3] != "label" ||
      header[header.size() - 2] != "r01" || header.back() != "r012") {
    throw FormatError("feature table header must end with label,r01,r012");
  }
  const std::size_t n_feat = header.size() - 3;
  // 3 + 3n + n^2 = n_feat
  std::size_t n = 0;
  while (3 + 3 * n + n * n < n_feat) ++n;
  FeatureTable t;
  t.schema = FeatureSchema(n);
  if (3 + 3 * n + n * n != n_feat ||
      !std::equal(t.schema.names().begin(), t.schema.names().end(), header.begin())) {
    throw FormatError("feature table header does not match a hybrid schema");
  }
  std::vector<double> row(n_feat);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw FormatError("wrong field count on line " + std::to_string(line_no));
    }
    for (std::size_t j = 0; j < n_feat; ++j) row[j] = parse_double(fields[j]);
    const double label = parse_double(fields[n_feat]);
    if (label != 0.0 && label != 1.0) throw FormatError("label must be 0/1 on line " + std::to_string(line_no));
    const auto r01 = parse_optional_double(fields[n_feat + 1]);
    const auto r012 = parse_optional_double(fields[n_feat + 2]);
    t.append_row(row, label == 1.0, r01.value_or(kNaN), r012.value_or(kNaN), t.rows());
  }
  return t;
}

void write_schema_json(const FeatureTable& t, const Standardizer* std_used,
                       const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["n"] = t.schema.n();
  j["feature_count"] = t.schema.size();
  j["names"] = t.schema.names();
  nlohmann::ordered_json index = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < t.schema.size(); ++i) index[t.schema.name(i)] = i;
  j["index"] = index;
  j["extra_columns"] = {"label", "r01", "r012"};
  j["schema_hash"] = hex64(t.schema.hash());
  j["rows"] = t.rows();
  j["row_failures"] = t.failures.size();
  if (std_used) {
    j["standardized"] = true;
    j["means"] = std_used->means;
    j["stds"] = std_used->stds;
    j["zero_variance"] = std_used->zero_variance;
  } else {
    j["standardized"] = false;
  }
  write_text_file(path, j.dump(2) + "\n");
}

FeatureTable load_feature_table(const std::filesystem::path& csv_path, bool* was_standardized) {
  FeatureTable t = read_feature_csv(csv_path);
  bool standardized = false;
  const auto sidecar = schema_sidecar_path(csv_path);
  if (std::filesystem::exists(sidecar)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(sidecar));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad schema sidecar " + sidecar.string() + ": " + e.what());
    }
    if (j.value("standardized", false)) {
      Standardizer s;
      s.means = j.at("means").get<std::vector<double>>();
      s.stds = j.at("stds").get<std::vector<double>>();
      if (s.means.size() != t.cols() || s.stds.size() != t.cols()) {
        throw DimensionMismatch("schema sidecar standardizer does not match table width");
      }
      s.inverse_transform_rows(t.values);
      standardized = true;
    }
  }
  if (was_standardized) *was_standardized = standardized;
  return t;
}

}  // namespace monolab
