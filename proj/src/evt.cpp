#include "monolab/evt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "monolab/errors.hpp"
#include "monolab/io.hpp"
#include "monolab/rng.hpp"

namespace monolab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMaxNmIterations = 2000;

}  // namespace

double gpd_loglik(std::span<const double> excesses, double xi, double sigma) {
  if (!(sigma > 0.0) || !(xi >= -1.0) || !std::isfinite(xi)) return -kInf;
  const double n = static_cast<double>(excesses.size());
  if (std::abs(xi) < kExponentialLimit) {
    double s = 0.0;
    for (double y : excesses) s += y;
    return -n * std::log(sigma) - s / sigma;
  }
  double s = 0.0;
  for (double y : excesses) {
    const double z = 1.0 + xi * y / sigma;
    if (!(z > 0.0)) return -kInf;
    s += std::log(z);
  }
  return -n * std::log(sigma) - (1.0 + 1.0 / xi) * s;
}

MrlCurve mean_residual_life(std::span<const double> xs, std::span<const double> grid) {
  MrlCurve c;
  bool any = false;
  for (double u : grid) {
    double s = 0.0;
    std::size_t k = 0;
    for (double x : xs) {
      if (x > u) {
        s += x - u;
        ++k;
      }
    }
    c.thresholds.push_back(u);
    c.counts.push_back(k);
    c.mean_excess.push_back(k ? s / static_cast<double>(k) : kNaN);
    c.flagged.push_back(k < kMrlMinCount ? 1 : 0);
    any = any || k > 0;
  }
  if (!any) throw EmptyTail("mean_residual_life: no grid point has exceedances");
  return c;
}

namespace {

struct NmResult {
  std::array<double, 2> x;
  double f;
  std::size_t iterations;
  bool converged;
};

// Minimizes f over (xi, log sigma).
template <class F>
NmResult nelder_mead(F f, std::array<double, 2> start, std::array<double, 2> step) {
  std::array<std::array<double, 2>, 3> p{start, start, start};
  p[1][0] += step[0];
  p[2][1] += step[1];
  std::array<double, 3> fv{f(p[0]), f(p[1]), f(p[2])};
  std::size_t it = 0;
  for (; it < kMaxNmIterations; ++it) {
    std::array<int, 3> o{0, 1, 2};
    std::sort(o.begin(), o.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    auto pt = p;
    auto fvs = fv;
    for (int i = 0; i < 3; ++i) {
      p[i] = pt[o[i]];
      fv[i] = fvs[o[i]];
    }
    double diam = 0.0;
    for (int i = 1; i < 3; ++i)
      diam = std::max({diam, std::abs(p[i][0] - p[0][0]), std::abs(p[i][1] - p[0][1])});
    if (std::isfinite(fv[2]) && fv[2] - fv[0] <= 1e-12 * (1.0 + std::abs(fv[0])) && diam <= 1e-8) {
      return {p[0], fv[0], it, true};
    }
    const std::array<double, 2> c{(p[0][0] + p[1][0]) / 2, (p[0][1] + p[1][1]) / 2};
    auto along = [&](double t) {
      return std::array<double, 2>{c[0] + t * (p[2][0] - c[0]), c[1] + t * (p[2][1] - c[1])};
    };
    const auto r = along(-1.0);
    const double fr = f(r);
    if (fr < fv[0]) {
      const auto e = along(-2.0);
      const double fe = f(e);
      if (fe < fr) {
        p[2] = e;
        fv[2] = fe;
      } else {
        p[2] = r;
        fv[2] = fr;
      }
      continue;
    }
    if (fr < fv[1]) {
      p[2] = r;
      fv[2] = fr;
      continue;
    }
    const bool outside = fr < fv[2];
    const auto k = along(outside ? -0.5 : 0.5);
    const double fk = f(k);
    if (fk < (outside ? fr : fv[2])) {
      p[2] = k;
      fv[2] = fk;
      continue;
    }
    for (int i = 1; i < 3; ++i) {
      p[i] = {p[0][0] + 0.5 * (p[i][0] - p[0][0]), p[0][1] + 0.5 * (p[i][1] - p[0][1])};
      fv[i] = f(p[i]);
    }
  }
  std::size_t best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {p[best], fv[best], it, false};
}

void standard_errors(GpdFit& fit) {
  const auto& y = fit.excesses;
  auto nll = [&](double xi, double sigma) { return -gpd_loglik(y, xi, sigma); };
  const double hx = 1e-4 * std::max(0.1, std::abs(fit.xi));
  const double hs = 1e-4 * fit.sigma;
  const double xi = fit.xi, s = fit.sigma;
  const double f0 = nll(xi, s);
  const double fxx = (nll(xi + hx, s) - 2 * f0 + nll(xi - hx, s)) / (hx * hx);
  const double fss = (nll(xi, s + hs) - 2 * f0 + nll(xi, s - hs)) / (hs * hs);
  const double fxs = (nll(xi + hx, s + hs) - nll(xi + hx, s - hs) - nll(xi - hx, s + hs) + nll(xi - hx, s - hs)) /
                     (4 * hx * hs);
  const double det = fxx * fss - fxs * fxs;
  if (!std::isfinite(det) || !(fxx > 0.0) || !(det > 0.0)) {
    fit.se_xi = kNaN;
    fit.se_sigma = kNaN;
    return;
  }
  fit.se_xi = std::sqrt(fss / det);
  fit.se_sigma = std::sqrt(fxx / det);
}

}  // namespace

GpdFit fit_gpd_excesses(std::vector<double> excesses, double u, std::size_t n_total, const GpdFit* start) {
  if (excesses.size() < kMinExceedances) {
    throw InsufficientTail("fit_gpd: " + std::to_string(excesses.size()) + " exceedances above u=" +
                           format_double(u) + ", need " + std::to_string(kMinExceedances));
  }
  double mean = 0.0;
  double lo = kInf, hi = -kInf;
  for (double y : excesses) {
    if (!(y > 0.0) || !std::isfinite(y)) throw std::invalid_argument("fit_gpd: excesses must be positive and finite");
    mean += y;
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  if (lo == hi) throw DegenerateData("fit_gpd: all excesses are equal");
  mean /= static_cast<double>(excesses.size());

  auto objective = [&](const std::array<double, 2>& p) {
    const double v = -gpd_loglik(excesses, p[0], std::exp(p[1]));
    return std::isnan(v) ? kInf : v;
  };

  std::array<double, 2> x0{0.0, 0.0};
  if (start) {
    x0 = {start->xi, std::log(start->sigma)};
    if (!std::isfinite(objective(x0))) {
      // warm start outside this sample's support: widen sigma until feasible
      x0[0] = std::max(x0[0], -0.9);
      while (!std::isfinite(objective(x0)) && x0[1] < std::log(hi) + 10.0) x0[1] += 0.1;
    }
  } else {
    double best = kInf;
    const double c = std::log(mean);
    for (int i = 0; i <= 38; ++i) {
      const double xi = -0.9 + 0.05 * i;
      for (int j = -30; j <= 30; ++j) {
        const std::array<double, 2> p{xi, c + 0.1 * j};
        const double v = objective(p);
        if (v < best) {
          best = v;
          x0 = p;
        }
      }
    }
    if (!std::isfinite(best)) throw NonConvergence("fit_gpd: no feasible grid point");
  }

  const NmResult r = nelder_mead(objective, x0, {0.05, 0.1});
  if (!r.converged) throw NonConvergence("fit_gpd: Nelder-Mead did not converge in " + std::to_string(kMaxNmIterations) + " iterations");

  GpdFit fit;
  fit.u = u;
  fit.xi = r.x[0];
  fit.sigma = std::exp(r.x[1]);
  fit.n_exceed = excesses.size();
  fit.n_total = n_total;
  fit.excesses = std::move(excesses);
  fit.loglik = gpd_loglik(fit.excesses, fit.xi, fit.sigma);
  fit.iterations = r.iterations;
  standard_errors(fit);
  return fit;
}

GpdFit fit_gpd(std::span<const double> xs, double u) {
  std::vector<double> ex;
  for (double x : xs)
    if (x > u) ex.push_back(x - u);
  return fit_gpd_excesses(std::move(ex), u, xs.size());
}

std::optional<double> endpoint_estimate(const GpdFit& f) {
  if (f.xi < 0.0) return f.u - f.sigma / f.xi;
  return std::nullopt;
}

double exceedance_prob(const GpdFit& f, double t) {
  if (t < f.u) throw std::invalid_argument("exceedance_prob: t must be >= u");
  if (f.n_total == 0) throw std::invalid_argument("exceedance_prob: empty sample");
  const double y = t - f.u;
  if (std::abs(f.xi) < kExponentialLimit) return f.zeta() * std::exp(-y / f.sigma);
  const double z = 1.0 + f.xi * y / f.sigma;
  if (z <= 0.0) return 0.0;
  return f.zeta() * std::pow(z, -1.0 / f.xi);
}

std::optional<std::pair<double, double>> StabilityScan::exceed_prob_spread() const {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.ok && r.exceed_prob) v.push_back(*r.exceed_prob);
  if (v.empty()) return std::nullopt;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return std::make_pair(mean, sd);
}

StabilityScan stability_scan(std::span<const double> xs, std::span<const double> grid, std::optional<double> t) {
  StabilityScan s;
  s.t = t;
  s.rows.resize(grid.size());
  const auto n = static_cast<std::int64_t>(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    StabilityRow& row = s.rows[static_cast<std::size_t>(i)];
    row.u = grid[static_cast<std::size_t>(i)];
    try {
      const GpdFit f = fit_gpd(xs, row.u);
      row.ok = true;
      row.xi = f.xi;
      row.sigma = f.sigma;
      row.se_xi = f.se_xi;
      row.se_sigma = f.se_sigma;
      row.n_exceed = f.n_exceed;
      if (t && *t >= row.u) row.exceed_prob = exceedance_prob(f, *t);
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  }
  return s;
}

namespace {

double quantile7(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapResult bootstrap_ci(const GpdFit& fit, double t, std::size_t replicates, std::uint64_t seed, double level) {
  if (replicates < 200) throw InvalidSpec("bootstrap_ci: replicates must be >= 200");
  if (!(level > 0.0 && level < 1.0)) throw InvalidSpec("bootstrap_ci: level must be in (0,1)");
  BootstrapResult b;
  b.level = level;
  b.replicates = replicates;
  b.point = exceedance_prob(fit, t);
  b.samples.assign(replicates, kNaN);
  const std::size_t m = fit.excesses.size();
  const auto n = static_cast<std::int64_t>(replicates);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    RngStream rng(seed, static_cast<std::uint64_t>(i));
    std::vector<double> ex(m);
    for (double& y : ex) y = fit.excesses[rng.below(m)];
    try {
      const GpdFit f = fit_gpd_excesses(std::move(ex), fit.u, fit.n_total, &fit);
      b.samples[static_cast<std::size_t>(i)] = exceedance_prob(f, t);
    } catch (const std::exception&) {
      // left as NaN and counted below
    }
  }
  std::vector<double> ok;
  for (double v : b.samples) {
    if (std::isnan(v)) {
      ++b.failures;
    } else {
      ok.push_back(v);
    }
  }
  b.valid = static_cast<double>(b.failures) < 0.05 * static_cast<double>(replicates);
  if (!ok.empty()) {
    std::sort(ok.begin(), ok.end());
    b.ci_low = quantile7(ok, (1.0 - level) / 2.0);
    b.ci_high = quantile7(ok, (1.0 + level) / 2.0);
  } else {
    b.ci_low = b.ci_high = kNaN;
  }
  return b;
}

BootstrapResult bootstrap_ci(std::span<const double> xs, double u, double t, std::size_t replicates,
                             std::uint64_t seed, double level) {
  return bootstrap_ci(fit_gpd(xs, u), t, replicates, seed, level);
}

TailSummary tail_summary(std::span<const double> xs, double u, std::optional<double> t, std::size_t replicates,
                         std::uint64_t seed, double level, BootstrapResult* boot) {
  if (xs.empty()) throw EmptyTail("tail_summary: empty sample");
  TailSummary s;
  s.sample_max = *std::max_element(xs.begin(), xs.end());
  s.fit = fit_gpd(xs, u);
  s.endpoint = endpoint_estimate(s.fit);
  s.t = t.value_or(s.sample_max);
  s.exceed_prob = exceedance_prob(s.fit, s.t);
  const BootstrapResult b = bootstrap_ci(s.fit, s.t, replicates, seed, level);
  s.ci_low = b.ci_low;
  s.ci_high = b.ci_high;
  s.ci_valid = b.valid;
  s.ci_failures = b.failures;
  if (boot) *boot = b;
  return s;
}

std::vector<double> parse_grid(std::string_view spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 3) throw InvalidSpec("grid must look like a:b:k");
  const double a = parse_double(parts[0]);
  const double b = parse_double(parts[1]);
  const double kd = parse_double(parts[2]);
  if (!(kd >= 1.0) || kd != std::floor(kd)) throw InvalidSpec("grid point count must be a positive integer");
  const auto k = static_cast<std::size_t>(kd);
  if (k > 1 && !(b > a)) throw InvalidSpec("grid end must exceed its start");
  std::vector<double> g(k);
  for (std::size_t i = 0; i < k; ++i)
    g[i] = k == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(k - 1);
  return g;
}

void write_mrl_csv(const MrlCurve& c, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "u,mean_excess,count,flagged\n";
  for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
    const double me = c.mean_excess[i];
    out << format_double(c.thresholds[i]) << ',' << (std::isnan(me) ? "" : format_double(me)) << ',' << c.counts[i]
        << ',' << int(c.flagged[i]) << '\n';
  }
  write_text_file(path, out.str());
}

void write_stability_csv(const StabilityScan& s, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "u,ok,xi,sigma,se_xi,se_sigma,n_exceed,exceed_prob,error\n";
  auto num = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  for (const auto& r : s.rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    out << format_double(r.u) << ',' << (r.ok ? 1 : 0) << ',';
    if (r.ok) {
      out << num(r.xi) << ',' << num(r.sigma) << ',' << num(r.se_xi) << ',' << num(r.se_sigma) << ',' << r.n_exceed
          << ',' << format_optional(r.exceed_prob);
    } else {
      out << ",,,,,";
    }
    out << ',' << err << '\n';
  }
  write_text_file(path, out.str());
}

void write_bootstrap_csv(const BootstrapResult& b, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "replicate,exceed_prob\n";
  for (std::size_t i = 0; i < b.samples.size(); ++i)
    out << i << ',' << (std::isnan(b.samples[i]) ? "" : format_double(b.samples[i])) << '\n';
  write_text_file(path, out.str());
}

void write_tail_json(const TailSummary& s, const std::filesystem::path& path) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::ordered_json j;
  j["sample_max"] = s.sample_max;
  j["u"] = s.fit.u;
  j["xi"] = s.fit.xi;
  j["sigma"] = s.fit.sigma;
  j["se_xi"] = num(s.fit.se_xi);
  j["se_sigma"] = num(s.fit.se_sigma);
  j["n_exceed"] = s.fit.n_exceed;
  j["n_total"] = s.fit.n_total;
  j["loglik"] = s.fit.loglik;
  j["endpoint"] = s.endpoint ? nlohmann::json(*s.endpoint) : nlohmann::json("Unbounded");
  j["t"] = s.t;
  j["exceed_prob"] = s.exceed_prob;
  j["ci_low"] = num(s.ci_low);
  j["ci_high"] = num(s.ci_high);
  j["ci_valid"] = s.ci_valid;
  j["ci_failed_replicates"] = s.ci_failures;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace monolab
