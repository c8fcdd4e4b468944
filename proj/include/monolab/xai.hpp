#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "monolab/features.hpp"
#include "monolab/nn.hpp"

namespace monolab {

enum class BaselineKind { DatasetMean, Zero, Custom };
enum class Quadrature { Trapezoid, Midpoint };

struct IgConfig {
  std::size_t steps = 100;
  BaselineKind baseline = BaselineKind::DatasetMean;
  std::vector<double> custom_baseline;
  Quadrature quadrature = Quadrature::Trapezoid;
  double tolerance = 1e-3;  // completeness residual bound recorded in reports

  void validate() const;  // throws InvalidSpec
};

Quadrature parse_quadrature(std::string_view name);
std::string_view quadrature_name(Quadrature q);

struct IgSample {
  std::vector<double> ig;
  double f_x = 0.0;
  double f_baseline = 0.0;
  double residual = 0.0;  // |sum IG - (F(x) - F(x'))|
};

// Row-major gradients and outputs of a scalar function at a block of rows.
using BatchGradientFn = std::function<void(std::span<const double> rows, std::vector<double>& grads,
                                           std::vector<double>& outputs)>;

// Straight-line path integral from `baseline` to `x` for any differentiable F.
IgSample integrated_gradients_detail(const BatchGradientFn& f, std::span<const double> x,
                                     std::span<const double> baseline, const IgConfig& cfg);

// Same for a network, gradients taken in the model's own input space.
IgSample integrated_gradients_detail(const MlpModel& m, std::span<const double> x,
                                     std::span<const double> baseline, const IgConfig& cfg);
std::vector<double> integrated_gradients(const MlpModel& m, std::span<const double> x,
                                         std::span<const double> baseline, const IgConfig& cfg);

// Baseline vector for a dataset according to cfg.baseline.
std::vector<double> resolve_baseline(const IgConfig& cfg, const InputMatrix& x);

struct AttributionReport {
  std::vector<std::string> feature_names;
  std::size_t rows = 0;
  std::vector<double> per_sample;  // rows x features, NaN rows for failures
  std::vector<double> mean_abs;
  std::vector<std::size_t> ranking;  // feature indices, mean_abs descending
  std::vector<double> residuals;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool within_tolerance = true;
  std::vector<double> baseline;
  std::uint64_t baseline_hash = 0;
  std::string input_space;  // "standardized" or "raw"
  std::size_t steps = 0;
  Quadrature quadrature = Quadrature::Trapezoid;
  std::vector<RowFailure> failures;

  std::vector<std::string> ranking_names() const;
};

// Per-sample IG over every row of `x` (parallel over rows, assembled in row
// order). Rows with non-finite attributions are recorded in `failures` and
// excluded from mean_abs.
AttributionReport attribute_dataset(const MlpModel& m, const InputMatrix& x, const IgConfig& cfg,
                                    std::string input_space = "standardized");

struct RankedFeature {
  std::string name;
  double mean_abs_ig;
  std::size_t rank;  // 1-based
};

std::vector<RankedFeature> top_k(const AttributionReport& r, std::size_t k);

// feature,mean_abs_ig,rank
void write_attribution_csv(const AttributionReport& r, const std::filesystem::path& path);
void write_topk_json(const AttributionReport& r, std::size_t k, const std::filesystem::path& path);

// Per-sample matrix in the checkpoint block layout: magic, version, JSON
// header, then little-endian f64 values.
void save_ig_matrix(const AttributionReport& r, const std::filesystem::path& path);
struct IgMatrix {
  std::vector<std::string> feature_names;
  std::size_t rows = 0;
  std::vector<double> values;
};
IgMatrix load_ig_matrix(const std::filesystem::path& path);

namespace reference {

AttributionReport attribute_dataset(const MlpModel& m, const InputMatrix& x, const IgConfig& cfg,
                                    std::string input_space = "standardized");

}  // namespace reference

}  // namespace monolab
