#include "monolab/xai.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "monolab/errors.hpp"
#include "monolab/io.hpp"

namespace monolab {

void IgConfig::validate() const {
  if (steps < 2) throw InvalidSpec("IgConfig: steps must be >= 2");
  if (!(tolerance > 0.0)) throw InvalidSpec("IgConfig: tolerance must be positive");
}

Quadrature parse_quadrature(std::string_view name) {
  if (name == "trapezoid") return Quadrature::Trapezoid;
  if (name == "midpoint") return Quadrature::Midpoint;
  throw InvalidSpec("unknown quadrature: " + std::string(name));
}

std::string_view quadrature_name(Quadrature q) {
  return q == Quadrature::Trapezoid ? "trapezoid" : "midpoint";
}

IgSample integrated_gradients_detail(const BatchGradientFn& f, std::span<const double> x,
                                     std::span<const double> baseline, const IgConfig& cfg) {
  cfg.validate();
  const std::size_t d = x.size();
  if (baseline.size() != d) {
    throw DimensionMismatch("integrated_gradients: input and baseline must have " + std::to_string(d) +
                            " entries");
  }
  const std::size_t steps = cfg.steps;
  const bool trap = cfg.quadrature == Quadrature::Trapezoid;
  // path points, then x' and x at the end for the completeness check
  const std::size_t points = trap ? steps + 1 : steps;
  std::vector<double> rows((points + 2) * d);
  std::vector<double> weights(points);
  for (std::size_t k = 0; k < points; ++k) {
    double alpha;
    if (trap) {
      alpha = static_cast<double>(k) / static_cast<double>(steps);
      weights[k] = (k == 0 || k == steps ? 0.5 : 1.0) / static_cast<double>(steps);
    } else {
      alpha = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
      weights[k] = 1.0 / static_cast<double>(steps);
    }
    for (std::size_t i = 0; i < d; ++i) rows[k * d + i] = baseline[i] + alpha * (x[i] - baseline[i]);
  }
  std::copy(baseline.begin(), baseline.end(), rows.begin() + static_cast<std::ptrdiff_t>(points * d));
  std::copy(x.begin(), x.end(), rows.begin() + static_cast<std::ptrdiff_t>((points + 1) * d));

  std::vector<double> grads, outputs;
  f(rows, grads, outputs);
  if (grads.size() != rows.size() || outputs.size() != points + 2) {
    throw DimensionMismatch("integrated_gradients: gradient callback returned the wrong shape");
  }

  IgSample s;
  s.ig.assign(d, 0.0);
  for (std::size_t k = 0; k < points; ++k)
    for (std::size_t i = 0; i < d; ++i) s.ig[i] += weights[k] * grads[k * d + i];
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    s.ig[i] *= x[i] - baseline[i];
    total += s.ig[i];
  }
  s.f_baseline = outputs[points];
  s.f_x = outputs[points + 1];
  s.residual = std::abs(total - (s.f_x - s.f_baseline));
  return s;
}

IgSample integrated_gradients_detail(const MlpModel& m, std::span<const double> x,
                                     std::span<const double> baseline, const IgConfig& cfg) {
  if (x.size() != m.input_dim()) {
    throw DimensionMismatch("integrated_gradients: model expects " + std::to_string(m.input_dim()) + " inputs");
  }
  return integrated_gradients_detail(
      [&m](std::span<const double> rows, std::vector<double>& g, std::vector<double>& out) {
        input_gradient_batch(m, rows, g, out);
      },
      x, baseline, cfg);
}

std::vector<double> integrated_gradients(const MlpModel& m, std::span<const double> x,
                                         std::span<const double> baseline, const IgConfig& cfg) {
  return integrated_gradients_detail(m, x, baseline, cfg).ig;
}

std::vector<double> resolve_baseline(const IgConfig& cfg, const InputMatrix& x) {
  const std::size_t d = x.cols();
  switch (cfg.baseline) {
    case BaselineKind::Zero:
      return std::vector<double>(d, 0.0);
    case BaselineKind::Custom:
      if (cfg.custom_baseline.size() != d) throw DimensionMismatch("custom baseline has the wrong length");
      return cfg.custom_baseline;
    case BaselineKind::DatasetMean:
      break;
  }
  if (x.rows == 0) throw DegenerateData("dataset-mean baseline needs at least one row");
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t i = 0; i < d; ++i) mean[i] += x.values[r * d + i];
  for (double& v : mean) v /= static_cast<double>(x.rows);
  return mean;
}

std::vector<std::string> AttributionReport::ranking_names() const {
  std::vector<std::string> out;
  for (std::size_t i : ranking) out.push_back(feature_names[i]);
  return out;
}

namespace {

struct RowResult {
  bool ok = false;
  std::string error;
};

RowResult attribute_row(const MlpModel& m, const InputMatrix& x, std::size_t r, const std::vector<double>& base,
                        const IgConfig& cfg, AttributionReport& rep) {
  const std::size_t d = x.cols();
  try {
    IgSample s = integrated_gradients_detail(m, x.row(r), base, cfg);
    for (double v : s.ig)
      if (!std::isfinite(v)) return {false, "non-finite attribution"};
    std::copy(s.ig.begin(), s.ig.end(), rep.per_sample.begin() + static_cast<std::ptrdiff_t>(r * d));
    rep.residuals[r] = s.residual;
    return {true, {}};
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
}

AttributionReport prepare_report(const MlpModel& m, const InputMatrix& x, const IgConfig& cfg,
                                 std::string input_space) {
  cfg.validate();
  if (x.rows == 0) throw DegenerateData("attribute_dataset: empty table");
  if (x.cols() != m.input_dim()) throw DimensionMismatch("attribute_dataset: table width does not match the model");
  AttributionReport rep;
  rep.feature_names = x.names;
  rep.rows = x.rows;
  rep.per_sample.assign(x.rows * x.cols(), std::numeric_limits<double>::quiet_NaN());
  rep.residuals.assign(x.rows, std::numeric_limits<double>::quiet_NaN());
  rep.tolerance = cfg.tolerance;
  rep.baseline = resolve_baseline(cfg, x);
  rep.baseline_hash = hash_doubles(rep.baseline);
  rep.input_space = std::move(input_space);
  rep.steps = cfg.steps;
  rep.quadrature = cfg.quadrature;
  return rep;
}

void finish_report(AttributionReport& rep, const std::vector<RowResult>& results) {
  const std::size_t d = rep.feature_names.size();
  rep.mean_abs.assign(d, 0.0);
  std::size_t good = 0;
  rep.max_residual = 0.0;
  for (std::size_t r = 0; r < rep.rows; ++r) {
    if (!results[r].ok) {
      rep.failures.push_back({r, results[r].error});
      continue;
    }
    ++good;
    for (std::size_t i = 0; i < d; ++i) rep.mean_abs[i] += std::abs(rep.per_sample[r * d + i]);
    rep.max_residual = std::max(rep.max_residual, rep.residuals[r]);
  }
  if (good > 0)
    for (double& v : rep.mean_abs) v /= static_cast<double>(good);
  rep.ranking.resize(d);
  std::iota(rep.ranking.begin(), rep.ranking.end(), std::size_t{0});
  std::stable_sort(rep.ranking.begin(), rep.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return rep.mean_abs[a] > rep.mean_abs[b]; });
  rep.within_tolerance = good > 0 && rep.max_residual <= rep.tolerance;
}

}  // namespace

AttributionReport attribute_dataset(const MlpModel& m, const InputMatrix& x, const IgConfig& cfg,
                                    std::string input_space) {
  AttributionReport rep = prepare_report(m, x, cfg, std::move(input_space));
  std::vector<RowResult> results(x.rows);
  const auto n = static_cast<std::int64_t>(x.rows);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t r = 0; r < n; ++r) {
    results[static_cast<std::size_t>(r)] = attribute_row(m, x, static_cast<std::size_t>(r), rep.baseline, cfg, rep);
  }
  finish_report(rep, results);
  return rep;
}

namespace reference {

AttributionReport attribute_dataset(const MlpModel& m, const InputMatrix& x, const IgConfig& cfg,
                                    std::string input_space) {
  AttributionReport rep = prepare_report(m, x, cfg, std::move(input_space));
  std::vector<RowResult> results(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) results[r] = attribute_row(m, x, r, rep.baseline, cfg, rep);
  finish_report(rep, results);
  return rep;
}

}  // namespace reference

std::vector<RankedFeature> top_k(const AttributionReport& r, std::size_t k) {
  std::vector<RankedFeature> out;
  for (std::size_t j = 0; j < std::min(k, r.ranking.size()); ++j) {
    const std::size_t i = r.ranking[j];
    out.push_back({r.feature_names[i], r.mean_abs[i], j + 1});
  }
  return out;
}

void write_attribution_csv(const AttributionReport& r, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "feature,mean_abs_ig,rank\n";
  for (const auto& f : top_k(r, r.ranking.size()))
    out << f.name << ',' << format_double(f.mean_abs_ig) << ',' << f.rank << '\n';
  write_text_file(path, out.str());
}

void write_topk_json(const AttributionReport& r, std::size_t k, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["steps"] = r.steps;
  j["quadrature"] = std::string(quadrature_name(r.quadrature));
  j["input_space"] = r.input_space;
  j["baseline_hash"] = hex64(r.baseline_hash);
  j["rows"] = r.rows;
  j["failed_rows"] = r.failures.size();
  j["max_completeness_residual"] = r.max_residual;
  j["tolerance"] = r.tolerance;
  j["within_tolerance"] = r.within_tolerance;
  nlohmann::ordered_json feats = nlohmann::ordered_json::array();
  for (const auto& f : top_k(r, k))
    feats.push_back({{"rank", f.rank}, {"feature", f.name}, {"mean_abs_ig", f.mean_abs_ig}});
  j["top"] = feats;
  write_text_file(path, j.dump(2) + "\n");
}

namespace {

constexpr char kIgMagic[4] = {'I', 'G', 'M', 'X'};
constexpr std::uint32_t kIgVersion = 1;

}  // namespace

void save_ig_matrix(const AttributionReport& r, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "monolab-ig";
  j["rows"] = r.rows;
  j["feature_names"] = r.feature_names;
  j["steps"] = r.steps;
  j["quadrature"] = std::string(quadrature_name(r.quadrature));
  j["input_space"] = r.input_space;
  j["baseline_hash"] = hex64(r.baseline_hash);
  const std::string header = j.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  BinaryWriter w(out);
  w.bytes(kIgMagic, 4);
  w.u32(kIgVersion);
  w.u64(header.size());
  w.bytes(header.data(), header.size());
  w.u64(r.per_sample.size());
  for (double v : r.per_sample) w.f64(v);
  if (!out) throw IoError("write failed: " + path.string());
}

IgMatrix load_ig_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open IG matrix: " + path.string());
  BinaryReader r(in, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kIgMagic, 4) != 0) throw FormatError("bad IG matrix magic: " + path.string());
  if (r.u32() != kIgVersion) throw FormatError("unsupported IG matrix version");
  const std::uint64_t len = r.u64();
  if (len > r.remaining()) throw FormatError("truncated IG matrix header");
  std::string header(len, '\0');
  r.bytes(header.data(), len);
  IgMatrix m;
  try {
    const auto j = nlohmann::json::parse(header);
    m.rows = j.at("rows").get<std::size_t>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad IG matrix header: ") + e.what());
  }
  const std::uint64_t count = r.u64();
  if (count != m.rows * m.feature_names.size()) throw FormatError("IG matrix size mismatch");
  m.values.resize(count);
  for (double& v : m.values) v = r.f64();
  return m;
}

}  // namespace monolab
