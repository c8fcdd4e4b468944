// Acceptance runner: one PASS/FAIL line per criterion.
//   acceptance [--suite property|desk|all] [--full-scale] [--budget-minutes M]
//              [--per-class K]
// Exit status is nonzero when any evaluated criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "monolab/commands.hpp"
#include "monolab/datagen.hpp"
#include "monolab/evt.hpp"
#include "monolab/features.hpp"
#include "monolab/linalg.hpp"
#include "monolab/nn.hpp"
#include "monolab/surrogate.hpp"
#include "monolab/xai.hpp"
#include "test_support.hpp"

using namespace monolab;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(int id, const Outcome& o, double seconds) {
  std::printf("criterion %d: %s (%.2f s) %s\n", id, o.pass ? "PASS" : "FAIL", seconds, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

// Runs `body` and fails the criterion when it overruns `limit_s`.
void criterion(int id, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  if (limit_s > 0 && s > limit_s) {
    o.pass = false;
    o.detail += " [runtime over " + std::to_string(static_cast<int>(limit_s)) + " s]";
  }
  report(id, o, s);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- property suite -------------------------------------------------------

// Same seeded ensemble for criteria 1 and 2: 1000 invertible U(-1,1) matrices
// spread over n = 3, 5, 7.
std::vector<SquareMatrix> ensemble() {
  std::vector<SquareMatrix> out;
  RngStream rng(20240601, 0);
  const std::size_t sizes[] = {3, 5, 7};
  while (out.size() < 1000) {
    auto a = sample_uniform_matrix(sizes[out.size() % 3], rng);
    if (lu_decompose(a).singular) continue;
    out.push_back(std::move(a));
  }
  return out;
}

Outcome ratio_identity() {
  double worst = 0.0;
  for (const auto& a : ensemble()) {
    auto r = ratio_features(char_poly(a)).r01;
    if (!r) return {false, "undefined r01 on an invertible matrix"};
    const double tr = trace(invert(lu_decompose(a)));
    worst = std::max(worst, std::abs(*r - 1.0 / std::abs(tr)) / std::max(1.0, *r));
  }
  return {worst <= 1e-8, "max deviation " + fmt("%.3e", worst) + " (bound 1e-8)"};
}

Outcome char_poly_checks() {
  double worst_det = 0.0, worst_vieta = 0.0;
  for (const auto& a : ensemble()) {
    const std::size_t n = a.size();
    auto c = char_poly(a);
    const double det = determinant(lu_decompose(a));
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    worst_det = std::max(worst_det, std::abs(c.coeff(0) - sign * det) / std::max(1.0, std::abs(det)));
    double prod = 1.0;
    for (auto z : eigenvalues(a).eigenvalues) prod *= std::abs(z);
    worst_vieta = std::max(worst_vieta, std::abs(std::abs(c.coeff(0)) - prod) / std::abs(c.coeff(0)));
  }
  const bool ok = worst_det <= 1e-9 && worst_vieta <= 1e-6;
  return {ok, "c0 vs (-1)^n det " + fmt("%.3e", worst_det) + " (bound 1e-9), |c0| vs prod|lambda| " +
                  fmt("%.3e", worst_vieta) + " (bound 1e-6)"};
}

Outcome oracle_checks() {
  int mono = 0;
  for (int k = 0; k < 1000; ++k) {
    RngStream rng(777, static_cast<std::uint32_t>(k));
    const std::size_t n = 2 + static_cast<std::size_t>(k % 7);
    const double margin = 0.01 + 0.5 * rng.uniform01();
    mono += is_monotone(make_m_matrix(n, rng, margin));
  }
  // inverses computed by hand: each has a negative entry or does not exist
  const SquareMatrix counter[] = {
      SquareMatrix::from_rows({{1, 1}, {0, -1}}),
      SquareMatrix::from_rows({{1, 2}, {3, 4}}),
      SquareMatrix::from_rows({{0, -1}, {1, 0}}),
      SquareMatrix::from_rows({{1, 2}, {2, 4}}),
      SquareMatrix::from_rows({{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}}),
      SquareMatrix::from_rows({{2, 1}, {1, 2}}),
  };
  int rejected = 0;
  for (const auto& c : counter) rejected += !is_monotone(c);
  const int nc = static_cast<int>(std::size(counter));
  return {mono == 1000 && rejected == nc, std::to_string(mono) + "/1000 M-matrices monotone, " +
                                              std::to_string(rejected) + "/" + std::to_string(nc) +
                                              " counterexamples rejected"};
}

// Completeness residual of IG (m = 100, trapezoid, dataset-mean baseline) on
// the first 200 validation rows of a trained classifier. A net that did not
// learn (flat output) passes trivially, so its validation accuracy must show
// it separates the classes.
Outcome completeness_on_val(const TrainOutcome& out, const InputMatrix& x, std::span<const std::uint8_t> y) {
  InputMatrix sub;
  sub.names = x.names;
  std::vector<std::uint8_t> sub_y;
  std::vector<double> val_rows;
  std::vector<std::uint8_t> val_y;
  for (std::size_t k = 0; k < out.split.val.size(); ++k) {
    auto row = x.row(out.split.val[k]);
    val_rows.insert(val_rows.end(), row.begin(), row.end());
    val_y.push_back(y[out.split.val[k]]);
    if (k < 200) {
      sub.values.insert(sub.values.end(), row.begin(), row.end());
      ++sub.rows;
    }
  }
  const double acc = *metrics(confusion(out.classifier.predict_raw(val_rows), val_y)).accuracy;
  out.classifier.standardizer->transform_rows(sub.values);
  auto rep = attribute_dataset(out.classifier.model, sub, IgConfig{});
  double mean_res = 0.0;
  std::size_t above = 0;
  for (double r : rep.residuals) {
    mean_res += r;
    above += r > 1e-3;
  }
  mean_res /= static_cast<double>(rep.residuals.size());
  const bool learned = acc >= 0.75;
  std::string detail = "trained net (val acc " + fmt("%.4f", acc) + ") residual max " + fmt("%.3e", rep.max_residual) +
                       " mean " + fmt("%.2e", mean_res) + ", " + std::to_string(above) + "/" +
                       std::to_string(sub.rows) + " rows above 1e-3 (m=100, trapezoid)";
  if (!learned) detail += " [net did not learn; residual check is vacuous]";
  return {learned && rep.max_residual <= 1e-3, detail};
}

Outcome ig_checks() {
  // affine F: IG must equal (x - x') w
  const std::vector<double> w = {0.7, -1.9, 3.1, 0.25};
  BatchGradientFn affine = [&](std::span<const double> rows, std::vector<double>& g, std::vector<double>& out) {
    const std::size_t n = rows.size() / w.size();
    g.resize(rows.size());
    out.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      double z = -0.3;
      for (std::size_t i = 0; i < w.size(); ++i) {
        z += w[i] * rows[r * w.size() + i];
        g[r * w.size() + i] = w[i];
      }
      out[r] = z;
    }
  };
  RngStream rng(41, 0);
  double affine_err = 0.0;
  for (int k = 0; k < 50; ++k) {
    std::vector<double> x(4), b(4);
    for (double& v : x) v = 4 * rng.uniform_pm1();
    for (double& v : b) v = 4 * rng.uniform_pm1();
    auto s = integrated_gradients_detail(affine, x, b, IgConfig{});
    for (std::size_t i = 0; i < 4; ++i) affine_err = std::max(affine_err, std::abs(s.ig[i] - (x[i] - b[i]) * w[i]));
  }

  // input gradient vs central differences on random small nets
  double grad_err = 0.0;
  for (int k = 0; k < 20; ++k) {
    MlpSpec s;
    s.input_dim = 4;
    s.hidden_widths = {8, 6};
    s.dropout_rates = {0.0, 0.0};
    s.head_width = 5;
    auto m = build_model(s, 500 + static_cast<std::uint64_t>(k));
    std::vector<double> x(4);
    for (double& v : x) v = 2 * rng.uniform_pm1();
    auto g = input_gradient(m, x);
    for (std::size_t i = 0; i < 4; ++i) {
      auto xp = x, xm = x;
      xp[i] += 1e-5;
      xm[i] -= 1e-5;
      const double fd = (forward(m, xp) - forward(m, xm)) / 2e-5;
      grad_err = std::max(grad_err, std::abs(g[i] - fd) / std::max(1e-3, std::abs(fd)));
    }
  }

  // trained desk-scale net: n = 5 two-feature model, desk training settings
  GenerateOptions go;
  go.n = 5;
  go.per_class = 1000;
  go.seed = 4;
  auto table = featurize_dataset(generate_balanced(go));
  auto x = select_columns(table, cli::preset_columns(Preset::TwoFeat, table.schema));
  TrainConfig tc;
  tc.max_epochs = 40;
  tc.patience = 8;
  tc.seed = 4;
  auto out = train(x, table.labels, preset_spec(Preset::TwoFeat, x.cols(), 8.0), 4, tc);
  auto res = completeness_on_val(out, x, table.labels);
  const bool ok = affine_err <= 1e-12 && grad_err <= 1e-4 && res.pass;
  return {ok, "affine max error " + fmt("%.2e", affine_err) + " (bound 1e-12), gradient vs finite differences " +
                  fmt("%.2e", grad_err) + " (bound 1e-4), " + res.detail};
}

std::vector<double> gpd_sample(double xi, double sigma, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<double> out(n);
  for (double& y : out) {
    const double u = rng.uniform_open01();
    y = xi == 0.0 ? -sigma * std::log(u) : sigma / xi * (std::pow(u, -xi) - 1.0);
  }
  return out;
}

Outcome gpd_recovery() {
  bool ok = true;
  std::string detail;
  for (double xi : {-0.5, -0.1, 0.0, 0.2}) {
    auto f = fit_gpd(gpd_sample(xi, 1.0, 10000, 99), 0.0);
    const bool good = std::abs(f.xi - xi) <= 0.05 && std::abs(f.sigma - 1.0) <= 0.05;
    ok &= good;
    detail += fmt("xi=%.1f: ", xi) + fmt("(%.4f, ", f.xi) + fmt("%.4f) ", f.sigma);
  }
  return {ok, detail + "(tolerance xi +-0.05, sigma +-5%)"};
}

Outcome metric_reproduction() {
  struct Case {
    const char* name;
    ConfusionCounts c;
    std::optional<double> acc, prec, rec, spec;
  };
  const Case cases[] = {
      {"raw FFN", {17297, 703, 412, 17588}, 0.969, 0.962, 0.977, 0.961},
      {"raw CNN", {16613, 1387, 1065, 16935}, 0.932, 0.924, 0.941, 0.923},
      {"hybrid", {17825, 175, 170, 17830}, 0.990, 0.990, 0.991, 0.990},
      {"two-feature", {16708, 1292, 480, 17520}, 0.951, 0.931, 0.973, 0.928},
      {"ratio", {16041, 1959, 396, 17604}, 0.935, 0.900, 0.978, 0.891},
      {"reduced domain", {1811, 111, 55, 1867}, 0.958, std::nullopt, std::nullopt, std::nullopt},
  };
  bool ok = true;
  std::string detail;
  for (const auto& cs : cases) {
    auto m = metrics(cs.c);
    std::vector<std::string> bad;
    auto check = [&](const char* label, std::optional<double> got, std::optional<double> want) {
      if (!want) return;
      if (!got || std::abs(*got - *want) > 0.0005) bad.push_back(std::string(label) + " " + fmt("%.5f", *got) +
                                                                 " vs " + fmt("%.3f", *want));
    };
    check("accuracy", m.accuracy, cs.acc);
    check("precision", m.precision, cs.prec);
    check("recall", m.recall, cs.rec);
    check("specificity", m.specificity, cs.spec);
    if (!bad.empty()) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + std::string(cs.name) + ": ";
      for (std::size_t i = 0; i < bad.size(); ++i) detail += (i ? "; " : "") + bad[i];
    }
  }
  if (ok) detail = "all 6 matrices reproduce to three decimals";
  return {ok, detail};
}

Outcome evt_point() {
  GpdFit f;
  f.u = 0.075;
  f.xi = -0.028;
  f.sigma = 0.021;
  f.n_exceed = 562;
  f.n_total = 18000;
  const double p = exceedance_prob(f, 0.1755);
  const auto e = endpoint_estimate(f);
  const bool ok = p >= 1.6e-4 && p <= 2.0e-4 && e && std::abs(*e - 0.825) <= 0.01;
  return {ok, "exceedance " + fmt("%.4e", p) + " (range [1.6e-4, 2.0e-4]), endpoint " + fmt("%.4f", e.value_or(NAN)) +
                  " (0.825 +- 0.01)"};
}

Outcome stump_oracle() {
  RngStream rng(8, 0);
  int agree = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 5 + rng.below(80);
    std::vector<double> v(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = static_cast<double>(rng.below(40)) / 20.0;
      y[i] = v[i] + rng.uniform_pm1() < 1.0;
    }
    y[0] = 0;
    y[1] = 1;
    std::vector<double> u = v;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    if (u.size() < 2) {
      ++agree;
      continue;
    }
    std::size_t best = 0;
    double best_t = 0.0;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
      const double t = 0.5 * (u[k] + u[k + 1]);
      std::size_t correct = 0;
      for (std::size_t i = 0; i < n; ++i) correct += (v[i] <= t) == (y[i] == 1);
      if (correct > best) {
        best = correct;
        best_t = t;
      }
    }
    auto s = fit_stump(v, y);
    agree += s.threshold == best_t && s.accuracy == static_cast<double>(best) / static_cast<double>(n);
  }
  return {agree == 100, std::to_string(agree) + "/100 sets match exhaustive search"};
}

// ---- desk suite -------------------------------------------------------------

struct DeskData {
  FeatureTable table;
  std::uint64_t per_class = 0;
  double gen_seconds = 0.0;
};

// Balanced n = 5 set sized to the wall-clock budget: a pilot run measures the
// generation rate, then up to `max_per_class` per class (floor 1000) is drawn
// within a quarter of the budget.
DeskData desk_data(double budget_s, std::uint64_t max_per_class) {
  DeskData d;
  GenerateOptions o;
  o.n = 5;
  o.seed = 2;
  o.per_class = 200;
  auto t0 = Clock::now();
  generate_balanced(o);
  const double pilot = std::chrono::duration<double>(Clock::now() - t0).count();
  const double per_class_rate = 200.0 / std::max(pilot, 1e-3);
  const auto affordable = static_cast<std::uint64_t>(per_class_rate * budget_s * 0.25);
  d.per_class = std::clamp<std::uint64_t>(affordable, 1000, std::max<std::uint64_t>(1000, max_per_class));
  o.per_class = d.per_class;
  t0 = Clock::now();
  d.table = featurize_dataset(generate_balanced(o));
  d.gen_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return d;
}

struct Trained {
  TrainOutcome out;
  InputMatrix x;
  std::vector<std::uint8_t> y;
  double val_acc = 0.0;
};

Trained train_preset(const FeatureTable& t, Preset p, double width_scale) {
  Trained r;
  std::vector<std::size_t> kept;
  r.x = select_columns(t, cli::preset_columns(p, t.schema), &kept);
  for (std::size_t i : kept) r.y.push_back(t.labels[i]);
  TrainConfig tc;
  tc.max_epochs = 40;
  tc.patience = 8;
  tc.seed = 2;
  r.out = train(r.x, r.y, preset_spec(p, r.x.cols(), width_scale), 2, tc);
  std::vector<double> rows;
  std::vector<std::uint8_t> labels;
  for (std::size_t i : r.out.split.val) {
    auto row = r.x.row(i);
    rows.insert(rows.end(), row.begin(), row.end());
    labels.push_back(r.y[i]);
  }
  r.val_acc = *metrics(confusion(r.out.classifier.predict_raw(rows), labels)).accuracy;
  return r;
}

std::vector<double> monotone_ratios(const FeatureTable& t) {
  std::vector<double> r;
  for (std::size_t i = 0; i < t.rows(); ++i)
    if (t.labels[i] && !std::isnan(t.r01[i])) r.push_back(t.r01[i]);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria runner"};
  std::string suite = "all";
  bool full_scale = false;
  double budget_minutes = 30.0;
  std::uint64_t max_per_class = 3000;
  app.add_option("--suite", suite, "property, desk or all")->check(CLI::IsMember({"property", "desk", "all"}));
  app.add_flag("--full-scale", full_scale, "also run the extended n=7 reproduction (criterion 12)");
  app.add_option("--budget-minutes", budget_minutes, "wall-clock budget for the desk suite");
  app.add_option("--per-class", max_per_class, "upper bound on desk samples per class");
  CLI11_PARSE(app, argc, argv);

  if (suite == "property" || suite == "all") {
    criterion(1, 5, ratio_identity);
    criterion(2, 5, char_poly_checks);
    criterion(3, 5, oracle_checks);
    criterion(4, 30, ig_checks);
    criterion(5, 30, gpd_recovery);
    criterion(6, 1, metric_reproduction);
    criterion(7, 1, evt_point);
    criterion(8, 5, stump_oracle);
  }

  if (suite == "desk" || suite == "all") {
    const double budget_s = budget_minutes * 60.0;
    const auto t0 = Clock::now();
    DeskData data;
    Trained hybrid;
    bool hybrid_ok = false;
    criterion(9, budget_s, [&]() -> Outcome {
      data = desk_data(budget_s, max_per_class);
      auto two = train_preset(data.table, Preset::TwoFeat, 8.0);
      auto one = train_preset(data.table, Preset::OneFeat, 8.0);
      const bool ok = data.per_class >= 1000 && two.val_acc >= 0.88 && one.val_acc >= 0.85;
      return {ok, "n=5, 2x" + std::to_string(data.per_class) + " samples (" + fmt("%.1f s", data.gen_seconds) +
                      "), TWOFEAT val acc " + fmt("%.4f", two.val_acc) + " (>= 0.88), ONEFEAT val acc " +
                      fmt("%.4f", one.val_acc) + " (>= 0.85)"};
    });
    criterion(10, 0, [&]() -> Outcome {
      if (data.table.rows() == 0) return {false, "no desk data"};
      hybrid = train_preset(data.table, Preset::Hybrid73, 4.0);
      hybrid_ok = true;
      InputMatrix sub;
      sub.names = hybrid.x.names;
      for (std::size_t k = 0; k < 500 && k < hybrid.out.split.val.size(); ++k) {
        auto row = hybrid.x.row(hybrid.out.split.val[k]);
        sub.values.insert(sub.values.end(), row.begin(), row.end());
        ++sub.rows;
      }
      hybrid.out.classifier.standardizer->transform_rows(sub.values);
      auto rep = attribute_dataset(hybrid.out.classifier.model, sub, IgConfig{});
      auto names = rep.ranking_names();
      const auto top3_end = names.begin() + 3;
      const bool ok = std::find(names.begin(), top3_end, "abs_c_0") != top3_end &&
                      std::find(names.begin(), top3_end, "abs_c_1") != top3_end;
      return {ok, "hybrid val acc " + fmt("%.4f", hybrid.val_acc) + ", IG top 3 over " + std::to_string(sub.rows) +
                      " rows: " + names[0] + ", " + names[1] + ", " + names[2]};
    });
    criterion(4, 0, [&]() -> Outcome {
      if (!hybrid_ok) return {false, "no desk hybrid model"};
      auto o = completeness_on_val(hybrid.out, hybrid.x, hybrid.y);
      o.detail = "desk hybrid, " + o.detail;
      return o;
    });
    criterion(11, 0, [&]() -> Outcome {
      auto r = monotone_ratios(data.table);
      if (r.empty()) return {false, "no monotone ratios"};
      const double mx = *std::max_element(r.begin(), r.end());
      return {mx <= 0.7, "sample maximum of monotone r01 " + fmt("%.4f", mx) + " over " + std::to_string(r.size()) +
                             " samples (<= 0.7)"};
    });
    const double total = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("desk suite wall clock %.1f s (budget %.0f s)%s\n", total, budget_s,
                hybrid_ok ? "" : ", hybrid model not trained");
  }

  if (full_scale) {
    criterion(12, 0, []() -> Outcome {
      GenerateOptions o;
      o.n = 7;
      o.per_class = 18000;
      o.seed = 7;
      auto t = featurize_dataset(generate_balanced(o));
      auto two = train_preset(t, Preset::TwoFeat, 1.0);
      auto stump = fit_stump(t.r01, t.labels);
      auto r = monotone_ratios(t);
      const double t7 = *std::max_element(r.begin(), r.end());
      auto fit = fit_gpd(r, 0.075);
      const bool ok = std::abs(two.val_acc - 0.951) <= 0.015 && std::abs(stump.threshold - 0.08) <= 0.03 &&
                      std::abs(t7 - 0.1755) <= 0.03 && fit.xi < 0.0;
      return {ok, "TWOFEAT acc " + fmt("%.4f", two.val_acc) + " (0.951 +- 0.015), stump " +
                      fmt("%.4f", stump.threshold) + " (0.08 +- 0.03), T_7 " + fmt("%.4f", t7) +
                      " (0.1755 +- 0.03), xi at u=0.075 " + fmt("%.4f", fit.xi) + " (< 0)"};
    });
  } else {
    std::printf("criterion 12: SKIP (extended n=7 reproduction; pass --full-scale)\n");
  }

  std::printf("%d criterion failure(s)\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
