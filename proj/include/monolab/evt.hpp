#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace monolab {

inline constexpr std::size_t kMinExceedances = 30;
inline constexpr std::size_t kMrlMinCount = 10;
inline constexpr double kExponentialLimit = 1e-6;  // |xi| below this uses the xi = 0 form

struct GpdFit {
  double u = 0.0;
  double xi = 0.0;
  double sigma = 1.0;
  std::size_t n_exceed = 0;
  std::size_t n_total = 0;
  double loglik = 0.0;
  double se_xi = 0.0;     // NaN when the observed information is not positive definite
  double se_sigma = 0.0;
  std::vector<double> excesses;
  std::size_t iterations = 0;

  double zeta() const { return static_cast<double>(n_exceed) / static_cast<double>(n_total); }
};

// GPD log-likelihood of excesses y > 0; -inf outside the support or for
// sigma <= 0 or xi < -1.
double gpd_loglik(std::span<const double> excesses, double xi, double sigma);

struct MrlCurve {
  std::vector<double> thresholds;
  std::vector<double> mean_excess;  // NaN where no point exceeds
  std::vector<std::size_t> counts;
  std::vector<std::uint8_t> flagged;  // fewer than kMrlMinCount exceedances
};

// Throws EmptyTail when no grid point has an exceedance.
MrlCurve mean_residual_life(std::span<const double> xs, std::span<const double> grid);

// Coarse grid over xi in [-0.9, 1.0] and log sigma, then Nelder-Mead on
// (xi, log sigma) restricted to xi >= -1. Throws InsufficientTail below
// kMinExceedances, DegenerateData when every excess is equal, NonConvergence
// when the simplex does not settle.
GpdFit fit_gpd(std::span<const double> xs, double u);

// Fit on excesses directly. With `start`, skips the grid and refines from it.
GpdFit fit_gpd_excesses(std::vector<double> excesses, double u, std::size_t n_total,
                        const GpdFit* start = nullptr);

// u - sigma/xi for xi < 0; nullopt (Unbounded) otherwise.
std::optional<double> endpoint_estimate(const GpdFit& f);

// zeta * (1 + xi (t-u)/sigma)^(-1/xi); 0 past a finite endpoint. Requires t >= u.
double exceedance_prob(const GpdFit& f, double t);

struct StabilityRow {
  double u = 0.0;
  bool ok = false;
  std::string error;
  double xi = 0.0;
  double sigma = 0.0;
  double se_xi = 0.0;
  double se_sigma = 0.0;
  std::size_t n_exceed = 0;
  std::optional<double> exceed_prob;
};

struct StabilityScan {
  std::vector<StabilityRow> rows;
  std::optional<double> t;

  // Mean and sample standard deviation of exceed_prob over converged rows.
  std::optional<std::pair<double, double>> exceed_prob_spread() const;
};

// Independent fit per grid threshold; failures are flagged in place.
StabilityScan stability_scan(std::span<const double> xs, std::span<const double> grid,
                             std::optional<double> t = std::nullopt);

struct BootstrapResult {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  std::size_t replicates = 0;
  std::size_t failures = 0;
  bool valid = false;             // false when failures reach 5% of replicates
  std::vector<double> samples;    // per replicate, NaN for failed refits
};

// Excesses over u resampled with replacement (N_u/N held fixed), each refit
// from the point estimate; percentile interval. Replicate i draws from
// RngStream(seed, i), so the result is independent of thread count.
BootstrapResult bootstrap_ci(std::span<const double> xs, double u, double t, std::size_t replicates,
                             std::uint64_t seed, double level = 0.95);
BootstrapResult bootstrap_ci(const GpdFit& fit, double t, std::size_t replicates, std::uint64_t seed,
                             double level = 0.95);

struct TailSummary {
  double sample_max = 0.0;
  std::optional<double> endpoint;
  double t = 0.0;
  double exceed_prob = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool ci_valid = false;
  std::size_t ci_failures = 0;
  GpdFit fit;
};

// t defaults to the sample maximum. The bootstrap replicates are copied to
// `boot` when given.
TailSummary tail_summary(std::span<const double> xs, double u, std::optional<double> t = std::nullopt,
                         std::size_t replicates = 1000, std::uint64_t seed = 0, double level = 0.95,
                         BootstrapResult* boot = nullptr);

// "a:b:k" -> k points from a to b inclusive.
std::vector<double> parse_grid(std::string_view spec);

void write_mrl_csv(const MrlCurve& c, const std::filesystem::path& path);
void write_stability_csv(const StabilityScan& s, const std::filesystem::path& path);
void write_bootstrap_csv(const BootstrapResult& b, const std::filesystem::path& path);
void write_tail_json(const TailSummary& s, const std::filesystem::path& path);

}  // namespace monolab
