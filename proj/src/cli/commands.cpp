#include "monolab/commands.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "monolab/datagen.hpp"
#include "monolab/errors.hpp"
#include "monolab/evt.hpp"
#include "monolab/io.hpp"
#include "monolab/surrogate.hpp"
#include "monolab/xai.hpp"

namespace monolab::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

SquareMatrix parse_matrix_text(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::string normalized(text);
  std::replace(normalized.begin(), normalized.end(), ';', '\n');
  for (const std::string& line : split(normalized, '\n')) {
    std::string l = line;
    std::replace(l.begin(), l.end(), ',', ' ');
    std::istringstream in(l);
    std::vector<double> row;
    std::string tok;
    while (in >> tok) row.push_back(parse_double(tok));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw NonSquareInput("matrix input is empty");
  const std::size_t n = rows.size();
  std::vector<double> entries;
  for (const auto& r : rows) {
    if (r.size() != n) {
      throw NonSquareInput("matrix input is not square: " + std::to_string(n) + " rows, a row with " +
                           std::to_string(r.size()) + " entries");
    }
    entries.insert(entries.end(), r.begin(), r.end());
  }
  return SquareMatrix(n, std::move(entries));
}

CheckReport check_matrix(const SquareMatrix& a, const LabConfig& cfg, std::optional<double> threshold_override) {
  CheckReport r;
  r.n = a.size();
  const LUFactorization f = lu_decompose(a);
  r.singular = f.singular;
  r.oracle_monotone = !f.singular && is_monotone(a);
  const CharPoly cp = char_poly(a);
  r.c0_abs = std::abs(cp.coeff(0));
  r.r01 = ratio_features(cp).r01;
  r.threshold = threshold_override ? threshold_override : cfg.threshold(r.n);
  if (r.r01 && r.threshold) r.ratio_pass = *r.r01 <= *r.threshold;
  if (!f.singular) r.inverse_trace = trace(invert(f));
  const SymbolicVerdict v = symbolic_formula(r.c0_abs);
  r.formula_p_hat = v.p_hat;
  r.formula_monotone = v.monotone;
  r.formula_reduced = v.reduced_rule;
  return r;
}

std::string format_check_report(const CheckReport& r) {
  std::ostringstream o;
  o << "n: " << r.n << "\n";
  o << "oracle: monotone: " << (r.oracle_monotone ? "true" : "false");
  if (r.singular) o << " (singular, no inverse)";
  o << "\n";
  o << "r01 = |c0/c1|: " << (r.r01 ? format_double(*r.r01) : std::string("Undefined (c1 = 0)")) << "\n";
  if (!r.threshold) {
    o << "ratio rule: no threshold configured for n = " << r.n << "\n";
  } else if (!r.ratio_pass) {
    o << "ratio rule: r01 Undefined, no verdict\n";
  } else {
    o << "ratio rule: r01 " << (*r.ratio_pass ? "<= " : "> ") << format_double(*r.threshold) << ": "
      << (*r.ratio_pass ? "pass" : "non-monotone (statistical)") << "\n";
  }
  if (r.inverse_trace) {
    o << "tr(A^-1): " << format_double(*r.inverse_trace);
    if (r.threshold) {
      const double bound = 1.0 / *r.threshold;
      o << " (|tr(A^-1)| >= " << format_double(std::round(bound * 1000.0) / 1000.0) << ": "
        << (std::abs(*r.inverse_trace) >= bound ? "pass" : "fail") << ")";
    }
    o << "\n";
  }
  o << "formula: |c0| = " << format_double(r.c0_abs) << ", p_hat = "
    << (r.formula_p_hat ? format_double(*r.formula_p_hat) : std::string("Undefined (pole)"))
    << ", p_hat > 0: " << (r.formula_monotone ? "monotone" : "non-monotone")
    << "; reduced rule |c0| <= " << format_double(kFormulaReducedCut) << ": "
    << (r.formula_reduced ? "monotone" : "non-monotone") << "\n";
  o << "note: the ratio thresholds are statistical, distribution-specific cutoffs, not theorems\n";
  return o.str();
}

std::vector<std::string> preset_columns(Preset p, const FeatureSchema& s) {
  switch (p) {
    case Preset::Raw49:
      return std::vector<std::string>(s.names().begin() + static_cast<std::ptrdiff_t>(s.entries_offset()),
                                      s.names().end());
    case Preset::Hybrid73:
    case Preset::Subdomain:
      return s.names();
    case Preset::TwoFeat:
      return {"abs_c_0", "abs_c_1"};
    case Preset::OneFeat:
      return {"r01"};
  }
  return {};
}

FeatureTable subdomain_filter(const FeatureTable& t, double ratio_cut, std::uint64_t seed) {
  std::vector<std::size_t> cls[2];
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const double r = t.r01[i];
    if (!std::isnan(r) && r < ratio_cut) cls[t.labels[i]].push_back(i);
  }
  const std::size_t keep_n = std::min(cls[0].size(), cls[1].size());
  if (keep_n == 0) throw DegenerateData("subdomain: a class has no rows below the ratio cut");
  std::vector<std::uint8_t> keep(t.rows(), 0);
  for (int c = 0; c < 2; ++c) {
    auto idx = cls[c];
    if (idx.size() > keep_n) {
      RngStream rng(seed, 11 + static_cast<std::uint64_t>(c));
      shuffle(idx.begin(), idx.end(), rng);
      idx.resize(keep_n);
    }
    for (std::size_t i : idx) keep[i] = 1;
  }
  return filter_rows(t, keep);
}

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string out;
  bool quiet = false;
  int threads = 0;
  std::string config;
};

struct TrainFlags {
  std::string preset = "TWOFEAT";
  std::string features;
  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t epochs = 25;
  std::size_t patience = 0;  // 0: min(6, epochs)
  double val_fraction = 0.2;
  double width_scale = 0.0;  // 0: take from config or 1
};

void add_train_flags(CLI::App* sub, TrainFlags& f, bool with_preset) {
  if (with_preset) {
    sub->add_option("--preset", f.preset, "RAW49 | HYBRID73 | TWOFEAT | ONEFEAT | SUBDOMAIN");
  }
  sub->add_option("--features", f.features, "comma-separated input columns (overrides the preset's)");
  sub->add_option("--lr", f.lr, "Adam learning rate");
  sub->add_option("--batch", f.batch, "minibatch size");
  sub->add_option("--epochs", f.epochs, "maximum epochs");
  sub->add_option("--patience", f.patience, "early-stopping patience in epochs (default min(6, epochs))");
  sub->add_option("--val-fraction", f.val_fraction, "stratified validation fraction");
  sub->add_option("--width-scale", f.width_scale, "divide hidden widths by this factor");
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& part : split(s, ',')) {
    if (!part.empty()) out.push_back(canonical_feature_name(part));
  }
  return out;
}

class Session {
 public:
  Session(std::string command, const std::vector<std::string>& argv, const Globals& g, std::ostream& out)
      : command_(std::move(command)), argv_(argv), g_(g), log_(g.quiet ? null_ : out) {
    start_ = std::chrono::steady_clock::now();
  }

  std::ostream& log() { return log_; }
  void input(const std::string& p) { inputs_.push_back(p); }
  void output(const std::string& p) { outputs_.push_back(p); }
  json& flags() { return flags_; }

  void write_manifest(const fs::path& primary) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j;
    j["command"] = command_;
    j["argv"] = argv_;
    j["flags"] = flags_;
    j["seed"] = g_.seed;
    j["threads"] = g_.threads;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["tool_version"] = kToolVersion;
    j["wall_seconds"] = wall;
    write_text_file(fs::path(primary.string() + ".manifest.json"), j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  const Globals& g_;
  std::ostream null_{nullptr};
  std::ostream& log_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  json flags_ = json::object();
  std::chrono::steady_clock::time_point start_;
};

void record_flags(json& flags, const CLI::App* app) {
  for (const CLI::Option* opt : app->get_options()) {
    const std::string name = opt->get_name();
    if (name == "--help" || name == "-h" || name == "--version") continue;
    if (opt->count() > 0) {
      flags[name] = join(opt->results(), ",");
    } else {
      flags[name] = opt->get_default_str();
    }
  }
}

std::string require_out(const Globals& g, std::string_view command) {
  if (g.out.empty()) throw CLI::RequiredError(std::string(command) + " needs --out");
  return g.out;
}

LabConfig load_lab_config(const Globals& g) {
  return g.config.empty() ? default_config() : load_config(g.config);
}

// -------------------------------------------------------------------- gen

struct GenFlags {
  std::size_t n = 7;
  std::uint64_t per_class = 1000;
  int workers = 0;
  std::uint64_t attempt_cap = 1'000'000'000ULL;
  double neg_tol = 0.0;
  std::string csv;
};

int cmd_gen(const GenFlags& f, const Globals& g, Session& s) {
  const std::string out = require_out(g, "gen");
  GenerateOptions o;
  o.n = f.n;
  o.per_class = f.per_class;
  o.seed = g.seed;
  o.workers = f.workers > 0 ? f.workers : std::max(1, g.threads > 0 ? g.threads : omp_get_max_threads());
  o.attempt_cap = f.attempt_cap;
  o.neg_tol = f.neg_tol;
  Dataset d;
  try {
    d = generate_balanced(o);
  } catch (const AttemptCapExceeded& e) {
    std::ostringstream msg;
    msg << "attempt cap reached after " << e.attempts() << " attempts: " << e.monotone_found() << " monotone and "
        << e.non_monotone_found() << " non-monotone of " << f.per_class << " per class";
    throw AttemptCapExceeded(msg.str(), e.monotone_found(), e.non_monotone_found(), e.attempts());
  }
  save_dataset(d, out);
  s.output(out);
  if (!f.csv.empty()) {
    std::ostringstream csv;
    export_dataset_csv(d, csv);
    write_text_file(f.csv, csv.str());
    s.output(f.csv);
  }
  s.log() << "wrote " << d.samples.size() << " samples (n=" << d.n << ", " << d.meta.monotone_count
          << " monotone) after " << d.meta.attempts << " attempts to " << out << "\n";
  s.write_manifest(out);
  return kExitOk;
}

// -------------------------------------------------------------- featurize

struct FeaturizeFlags {
  std::string in;
  bool no_standardize = false;
};

int cmd_featurize(const FeaturizeFlags& f, const Globals& g, Session& s) {
  const std::string out = require_out(g, "featurize");
  s.input(f.in);
  const Dataset d = load_dataset(f.in);
  FeatureTable t = featurize_dataset(d);
  for (const auto& fail : t.failures)
    s.log() << "row " << fail.sample_index << " skipped: " << fail.message << "\n";
  std::optional<Standardizer> st;
  if (!f.no_standardize) {
    std::vector<std::uint8_t> all(t.rows(), 1);
    st = fit_standardizer(t.values, t.cols(), all);
    st->transform_rows(t.values);
  }
  write_feature_csv(t, out);
  const fs::path sidecar = schema_sidecar_path(out);
  write_schema_json(t, st ? &*st : nullptr, sidecar);
  s.output(out);
  s.output(sidecar.string());
  s.log() << "wrote " << t.rows() << " rows x " << t.cols() << " features (+label,r01,r012)"
          << (st ? ", standardized" : ", raw") << " to " << out << "\n";
  s.write_manifest(out);
  return kExitOk;
}

// ------------------------------------------------------------------ train

struct TrainedRun {
  TrainOutcome outcome;
  InputMatrix x;
  std::vector<std::uint8_t> labels;
  std::size_t excluded = 0;
};

TrainedRun train_on_table(const FeatureTable& t, const TrainFlags& f, const Globals& g, const LabConfig& cfg,
                          Session& s) {
  const Preset preset = parse_preset(f.preset);
  std::vector<std::string> cols = f.features.empty() ? preset_columns(preset, t.schema) : split_names(f.features);
  TrainedRun run;
  std::vector<std::size_t> kept, dropped;
  run.x = select_columns(t, cols, &kept, &dropped);
  run.excluded = dropped.size();
  if (run.excluded > 0) s.log() << "excluded " << run.excluded << " rows with Undefined inputs\n";
  for (std::size_t i : kept) run.labels.push_back(t.labels[i]);

  double scale = f.width_scale;
  if (scale <= 0.0) {
    auto it = cfg.width_scale.find(std::string(preset_name(preset)));
    scale = it != cfg.width_scale.end() ? it->second : 1.0;
  }
  const MlpSpec spec = preset_spec(preset, run.x.cols(), scale);
  TrainConfig tc;
  tc.learning_rate = f.lr;
  tc.batch_size = f.batch;
  tc.max_epochs = f.epochs;
  tc.patience = f.patience > 0 ? f.patience : std::min<std::size_t>(6, f.epochs);
  tc.val_fraction = f.val_fraction;
  tc.seed = g.seed;
  run.outcome = train(run.x, run.labels, spec, g.seed, tc);
  run.outcome.classifier.schema_hash = t.schema.hash();
  run.outcome.classifier.preset = std::string(preset_name(preset));
  return run;
}

json metrics_json(const ConfusionCounts& c) {
  const Metrics m = metrics(c);
  auto opt = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["confusion"] = {{"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}, {"tp", c.tp}};
  j["accuracy"] = opt(m.accuracy);
  j["precision"] = opt(m.precision);
  j["recall"] = opt(m.recall);
  j["specificity"] = opt(m.specificity);
  return j;
}

ConfusionCounts split_confusion(const TrainedRun& run, const std::vector<std::size_t>& idx) {
  std::vector<double> rows;
  std::vector<std::uint8_t> labels;
  for (std::size_t i : idx) {
    const auto r = run.x.row(i);
    rows.insert(rows.end(), r.begin(), r.end());
    labels.push_back(run.labels[i]);
  }
  return confusion(run.outcome.classifier.predict_raw(rows), labels);
}

void save_training_outputs(const TrainedRun& run, const std::string& out, Session& s, json extra = json::object()) {
  save_classifier(run.outcome.classifier, out);
  const std::string hist = out + ".history.csv";
  write_history_csv(run.outcome.history, hist);
  const ConfusionCounts val = split_confusion(run, run.outcome.split.val);
  const ConfusionCounts tr = split_confusion(run, run.outcome.split.train);
  json j = extra;
  j["preset"] = run.outcome.classifier.preset;
  j["inputs"] = run.x.names;
  j["rows"] = run.x.rows;
  j["excluded_undefined_rows"] = run.excluded;
  j["train_rows"] = run.outcome.split.train.size();
  j["val_rows"] = run.outcome.split.val.size();
  j["epochs_run"] = run.outcome.classifier.model.meta.epochs_run;
  j["best_epoch"] = run.outcome.classifier.model.meta.best_epoch;
  j["parameters"] = run.outcome.classifier.model.parameter_count();
  j["threshold"] = 0.5;
  j["validation"] = metrics_json(val);
  j["train"] = metrics_json(tr);
  const std::string mpath = out + ".metrics.json";
  write_text_file(mpath, j.dump(2) + "\n");
  s.output(out);
  s.output(hist);
  s.output(mpath);
  const Metrics vm = metrics(val);
  s.log() << run.outcome.classifier.preset << ": " << run.x.rows << " rows, "
          << run.outcome.classifier.model.meta.epochs_run << " epochs (best " << run.outcome.classifier.model.meta.best_epoch
          << "), validation accuracy " << format_optional(vm.accuracy) << "\n";
}

struct TrainCmdFlags {
  std::string in;
  TrainFlags train;
};

int cmd_train(const TrainCmdFlags& f, const Globals& g, Session& s) {
  const std::string out = require_out(g, "train");
  const LabConfig cfg = load_lab_config(g);
  s.input(f.in);
  const FeatureTable t = load_feature_table(f.in);
  const TrainedRun run = train_on_table(t, f.train, g, cfg, s);
  save_training_outputs(run, out, s);
  s.write_manifest(out);
  return kExitOk;
}

// --------------------------------------------------------------------- ig

struct IgFlags {
  std::string model;
  std::string in;
  std::size_t steps = 100;
  std::string quadrature = "trapezoid";
  std::size_t top_k = 30;
  std::size_t max_rows = 0;
};

AttributionReport run_ig(const Classifier& c, const FeatureTable& t, const IgFlags& f, std::size_t max_rows) {
  InputMatrix x = select_columns(t, c.input_names);
  if (max_rows > 0 && x.rows > max_rows) {
    x.values.resize(max_rows * x.cols());
    x.rows = max_rows;
  }
  x.values = c.prepare(x.values);
  IgConfig cfg;
  cfg.steps = f.steps;
  cfg.quadrature = parse_quadrature(f.quadrature);
  return attribute_dataset(c.model, x, cfg, c.standardizer ? "standardized" : "raw");
}

int write_ig_outputs(const AttributionReport& rep, const std::string& out, std::size_t top_k, Session& s) {
  write_attribution_csv(rep, out);
  write_topk_json(rep, top_k, out + ".topk.json");
  save_ig_matrix(rep, out + ".igmx");
  s.output(out);
  s.output(out + ".topk.json");
  s.output(out + ".igmx");
  double mean_res = 0.0;
  std::size_t k = 0;
  for (double r : rep.residuals)
    if (!std::isnan(r)) {
      mean_res += r;
      ++k;
    }
  s.log() << "completeness residual over " << k << " rows: max " << format_double(rep.max_residual) << ", mean "
          << format_double(k ? mean_res / static_cast<double>(k) : 0.0) << " (tolerance "
          << format_double(rep.tolerance) << ")\n";
  for (const auto& r : monolab::top_k(rep, std::min<std::size_t>(top_k, 5)))
    s.log() << "  " << r.rank << ". " << r.name << " " << format_double(r.mean_abs_ig) << "\n";
  if (!rep.within_tolerance) {
    s.log() << "FAIL: completeness residual exceeds tolerance\n";
    return kExitDomain;
  }
  return kExitOk;
}

int cmd_ig(const IgFlags& f, const Globals& g, Session& s) {
  const std::string out = require_out(g, "ig");
  s.input(f.model);
  s.input(f.in);
  const Classifier c = load_classifier(f.model);
  const FeatureTable t = load_feature_table(f.in);
  if (c.schema_hash != 0 && c.schema_hash != t.schema.hash()) {
    throw DimensionMismatch("model was trained on a different feature schema");
  }
  const AttributionReport rep = run_ig(c, t, f, f.max_rows);
  const int code = write_ig_outputs(rep, out, f.top_k, s);
  s.write_manifest(out);
  return code;
}

// ------------------------------------------------------ tree / stump / svm

struct TreeFlags {
  std::string in;
  std::string on = "labels";
  std::string model;
  std::size_t depth = 4;
  std::size_t min_leaf = kDefaultMinLeaf;
  std::string features = "abs_c_0,abs_c_1";
};

int cmd_tree(const TreeFlags& f, const Globals& g, Session& s) {
  const std::string out = require_out(g, "tree");
  s.input(f.in);
  const FeatureTable full = load_feature_table(f.in);
  const std::vector<std::string> cols = f.features == "all" ? full.schema.names() : split_names(f.features);

  std::optional<Classifier> model;
  if (f.on == "predictions") {
    if (f.model.empty()) throw CLI::RequiredError("tree --on predictions needs --model");
    s.input(f.model);
    model = load_classifier(f.model);
  } else if (f.on != "labels") {
    throw InvalidSpec("--on must be 'labels' or 'predictions'");
  }

  // rows usable by both the tree columns and the model inputs
  std::vector<std::uint8_t> keep(full.rows(), 1);
  std::vector<std::size_t> kept;
  select_columns(full, cols, &kept);
  std::vector<std::uint8_t> ok(full.rows(), 0);
  for (std::size_t i : kept) ok[i] = 1;
  if (model) {
    std::vector<std::size_t> kept_m;
    select_columns(full, model->input_names, &kept_m);
    std::vector<std::uint8_t> ok_m(full.rows(), 0);
    for (std::size_t i : kept_m) ok_m[i] = 1;
    for (std::size_t i = 0; i < full.rows(); ++i) ok[i] = ok[i] && ok_m[i];
  }
  const FeatureTable t = filter_rows(full, ok);
  const InputMatrix x = select_columns(t, cols);
  std::vector<std::uint8_t> labels = t.labels;
  if (model) {
    const InputMatrix mx = select_columns(t, model->input_names);
    const auto p = model->predict_raw(mx.values);
    for (std::size_t i = 0; i < p.size(); ++i) labels[i] = p[i] > 0.5 ? 1 : 0;
  }

  const DecisionTree tree = fit_tree(x, labels, f.depth, f.min_leaf);
  std::optional<std::vector<MonotoneBand>> bands;
  try {
    bands = extract_monotone_bands(tree);
  } catch (const NonPlanarTree& e) {
    s.log() << "no (|c0|,|c1|) bands: " << e.what() << "\n";
  }
  write_tree_json(tree, bands ? &*bands : nullptr, out);
  std::string rules = tree_rules_text(tree);
  if (bands) rules += "\n# monotone bands, r = |c0|, s = |c1|\n" + band_rules_text(*bands);
  write_text_file(out + ".rules.txt", rules);
  s.output(out);
  s.output(out + ".rules.txt");

  const double fidelity = agreement(tree, x, labels);
  s.log() << "tree depth " << tree.depth() << ", " << tree.leaves().size() << " leaves, agreement with "
          << (model ? "model predictions" : "labels") << " " << format_double(fidelity) << "\n";
  if (model) s.log() << "agreement with ground truth " << format_double(agreement(tree, x, t.labels)) << "\n";
  s.log() << rules;
  s.write_manifest(out);
  return kExitOk;
}

struct StumpFlags {
  std::string in;
  std::string feature = "r01";
};

int cmd_stump(const StumpFlags& f, const Globals& g, Session& s) {
  const std::string out = require_out(g, "stump");
  s.input(f.in);
  const FeatureTable t = load_feature_table(f.in);
  const std::string name = canonical_feature_name(f.feature);
  const StumpResult r = fit_stump(t.column(name), t.labels);
  json j;
  j["feature"] = name;
  j["threshold"] = r.threshold;
  j["accuracy"] = r.accuracy;
  j["rows_used"] = r.rows_used;
  j["excluded_undefined_rows"] = r.excluded;
  j["rule"] = "monotone iff " + name + " <= threshold";
  write_text_file(out, j.dump(2) + "\n");
  s.output(out);
  s.log() << "stump on " << name << ": threshold " << format_double(r.threshold) << ", accuracy "
          << format_double(r.accuracy) << " (" << r.rows_used << " rows, " << r.excluded << " Undefined excluded)\n";
  s.write_manifest(out);
  return kExitOk;
}

struct SvmFlags {
  std::string in;
  std::string features = "abs_c_0,abs_c_1";
  double C = 1.0;
  std::size_t epochs = 50;
};

int cmd_svm(const SvmFlags& f, const Globals& g, Session& s) {
  const std::string out = require_out(g, "svm");
  s.input(f.in);
  const FeatureTable t = load_feature_table(f.in);
  std::vector<std::size_t> kept;
  const InputMatrix x = select_columns(t, split_names(f.features), &kept);
  std::vector<std::uint8_t> labels;
  for (std::size_t i : kept) labels.push_back(t.labels[i]);
  const LinearSvmModel m = fit_linear_svm(x, labels, f.C, f.epochs, g.seed);
  write_svm_json(m, out);
  s.output(out);
  s.log() << "hyperplane:";
  for (std::size_t i = 0; i < m.weights.size(); ++i) s.log() << " " << format_double(m.weights[i]) << "*" << m.feature_names[i];
  s.log() << " + " << format_double(m.bias) << " = 0; training accuracy " << format_double(m.training_accuracy) << "\n";
  s.write_manifest(out);
  return kExitOk;
}

// -------------------------------------------------------------------- evt

struct EvtFlags {
  std::string in;
  std::string cls = "monotone";
  std::string feature = "r01";
  double u = 0.075;
  std::optional<double> t;
  std::string grid;
  std::string mrl_grid;
  std::size_t replicates = 1000;
  double level = 0.95;
};

int cmd_evt(const EvtFlags& f, const Globals& g, Session& s) {
  const std::string out = require_out(g, "evt");
  s.input(f.in);
  const FeatureTable t = load_feature_table(f.in);
  const std::vector<double> col = t.column(canonical_feature_name(f.feature));
  int want = -1;
  if (f.cls == "monotone") {
    want = 1;
  } else if (f.cls == "non-monotone") {
    want = 0;
  } else if (f.cls != "all") {
    throw InvalidSpec("--class must be monotone, non-monotone or all");
  }
  std::vector<double> xs;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    if (want >= 0 && t.labels[i] != want) continue;
    if (!std::isnan(col[i])) xs.push_back(col[i]);
  }
  if (xs.empty()) throw EmptyTail("evt: no values in the selected class");

  std::vector<double> mgrid;
  if (!f.mrl_grid.empty()) {
    mgrid = parse_grid(f.mrl_grid);
  } else {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    for (int i = 1; i <= 50; ++i) mgrid.push_back(*lo + (*hi - *lo) * i / 51.0);
  }
  const MrlCurve mrl = mean_residual_life(xs, mgrid);
  write_mrl_csv(mrl, out + ".mrl.csv");
  s.output(out + ".mrl.csv");

  BootstrapResult boot;
  const TailSummary ts = tail_summary(xs, f.u, f.t, f.replicates, g.seed, f.level, &boot);
  write_tail_json(ts, out);
  write_bootstrap_csv(boot, out + ".bootstrap.csv");
  s.output(out);
  s.output(out + ".bootstrap.csv");

  s.log() << "sample max T = " << format_double(ts.sample_max) << " over " << xs.size() << " values\n";
  s.log() << "GPD at u = " << format_double(f.u) << ": xi = " << format_double(ts.fit.xi) << " +- "
          << format_double(ts.fit.se_xi) << ", sigma = " << format_double(ts.fit.sigma) << " +- "
          << format_double(ts.fit.se_sigma) << ", N_u = " << ts.fit.n_exceed << "\n";
  s.log() << "endpoint: " << (ts.endpoint ? format_double(*ts.endpoint) : std::string("Unbounded")) << "\n";
  s.log() << "P(X > " << format_double(ts.t) << ") = " << format_double(ts.exceed_prob) << ", "
          << format_double(100 * f.level) << "% bootstrap CI [" << format_double(ts.ci_low) << ", "
          << format_double(ts.ci_high) << "]" << (ts.ci_valid ? "" : " (INVALID: too many failed refits)") << "\n";

  if (!f.grid.empty()) {
    const StabilityScan scan = stability_scan(xs, parse_grid(f.grid), ts.t);
    write_stability_csv(scan, out + ".stability.csv");
    s.output(out + ".stability.csv");
    std::size_t failed = 0;
    for (const auto& r : scan.rows) failed += !r.ok;
    if (auto spread = scan.exceed_prob_spread()) {
      s.log() << "stability scan: mean P = " << format_double(spread->first) << " +- " << format_double(spread->second)
              << " over " << scan.rows.size() - failed << " thresholds";
    } else {
      s.log() << "stability scan: no converged thresholds";
    }
    s.log() << (failed ? " (" + std::to_string(failed) + " flagged)" : std::string()) << "\n";
  }
  s.write_manifest(out);
  return kExitOk;
}

// ------------------------------------------------------------------ check

struct CheckFlags {
  std::string matrix;
  std::string file;
  std::optional<double> threshold;
  bool json_out = false;
};

int cmd_check(const CheckFlags& f, const Globals& g, Session& s, std::ostream& out) {
  if (f.matrix.empty() == f.file.empty()) throw CLI::ValidationError("check needs exactly one of --matrix or --file");
  const LabConfig cfg = load_lab_config(g);
  std::string text = f.matrix;
  if (!f.file.empty()) {
    s.input(f.file);
    text = read_text_file(f.file);
  }
  const SquareMatrix a = parse_matrix_text(text);
  const CheckReport r = check_matrix(a, cfg, f.threshold);
  const std::string report = format_check_report(r);
  if (f.json_out) {
    auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["n"] = r.n;
    j["oracle_monotone"] = r.oracle_monotone;
    j["singular"] = r.singular;
    j["r01"] = opt(r.r01);
    j["threshold"] = opt(r.threshold);
    j["ratio_pass"] = opt(r.ratio_pass);
    j["inverse_trace"] = opt(r.inverse_trace);
    j["abs_c0"] = r.c0_abs;
    j["formula_p_hat"] = opt(r.formula_p_hat);
    j["formula_monotone"] = r.formula_monotone;
    j["formula_reduced_rule"] = r.formula_reduced;
    j["note"] = "ratio thresholds are statistical, distribution-specific";
    out << j.dump(2) << "\n";
  } else {
    out << report;
  }
  if (!g.out.empty()) {
    write_text_file(g.out, report);
    s.output(g.out);
    s.write_manifest(g.out);
  }
  return kExitOk;
}

// -------------------------------------------------------------- subdomain

struct SubdomainFlags {
  std::string in;
  double ratio_cut = 0.08;
  TrainFlags train;
  std::size_t steps = 100;
  std::size_t top_k = 30;
  std::size_t ig_rows = 0;
  std::string global_ig;
};

int cmd_subdomain(SubdomainFlags f, const Globals& g, Session& s) {
  const std::string out = require_out(g, "subdomain");
  const LabConfig cfg = load_lab_config(g);
  s.input(f.in);
  const FeatureTable full = load_feature_table(f.in);
  FeatureTable sub = subdomain_filter(full, f.ratio_cut, g.seed);
  s.log() << "subdomain r01 < " << format_double(f.ratio_cut) << ": " << sub.rows() << " rows after balancing\n";

  // persisted the same way featurize does: standardized columns plus sidecar
  FeatureTable persisted = sub;
  std::vector<std::uint8_t> all(persisted.rows(), 1);
  const Standardizer st = fit_standardizer(persisted.values, persisted.cols(), all);
  st.transform_rows(persisted.values);
  const std::string feat_out = out + ".features.csv";
  write_feature_csv(persisted, feat_out);
  write_schema_json(persisted, &st, schema_sidecar_path(feat_out));
  s.output(feat_out);
  s.output(schema_sidecar_path(feat_out).string());

  f.train.preset = "SUBDOMAIN";
  const TrainedRun run = train_on_table(sub, f.train, g, cfg, s);
  const std::string model_out = out + ".model";
  save_training_outputs(run, model_out, s, json{{"ratio_cut", f.ratio_cut}});

  IgFlags igf;
  igf.steps = f.steps;
  const AttributionReport rep = run_ig(run.outcome.classifier, sub, igf, f.ig_rows);
  const std::string ig_out = out + ".ig.csv";
  const int code = write_ig_outputs(rep, ig_out, f.top_k, s);

  if (!f.global_ig.empty()) {
    s.input(f.global_ig);
    const auto lines = split(read_text_file(f.global_ig), '\n');
    if (lines.size() < 2) throw FormatError("global attribution CSV has no rows");
    const std::string global_top = split(lines[1], ',').at(0);
    const std::string sub_top = rep.feature_names[rep.ranking[0]];
    s.log() << "top feature: global " << global_top << ", subdomain " << sub_top
            << (global_top == sub_top ? " (unchanged)" : " (changed)") << "\n";
  }
  s.write_manifest(out + ".model");
  return code;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const NonSquareInput*>(&e) ||
      dynamic_cast<const InvalidSpec*>(&e) || dynamic_cast<const DimensionMismatch*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const std::out_of_range*>(&e)) {
    return kExitUsage;
  }
  return kExitDomain;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const FileNotFound*>(&e)) return "FileNotFound";
  if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  if (dynamic_cast<const NonSquareInput*>(&e)) return "NonSquareInput";
  if (dynamic_cast<const InvalidSpec*>(&e)) return "InvalidSpec";
  if (dynamic_cast<const DimensionMismatch*>(&e)) return "DimensionMismatch";
  if (dynamic_cast<const SingularMatrix*>(&e)) return "SingularMatrix";
  if (dynamic_cast<const ConvergenceFailure*>(&e)) return "ConvergenceFailure";
  if (dynamic_cast<const DegenerateData*>(&e)) return "DegenerateData";
  if (dynamic_cast<const NonPlanarTree*>(&e)) return "NonPlanarTree";
  if (dynamic_cast<const EmptyTail*>(&e)) return "EmptyTail";
  if (dynamic_cast<const InsufficientTail*>(&e)) return "InsufficientTail";
  if (dynamic_cast<const NonConvergence*>(&e)) return "NonConvergence";
  if (dynamic_cast<const AttemptCapExceeded*>(&e)) return "AttemptCapExceeded";
  return "error";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monotone matrix lab: dataset generation, features, classifiers, attribution, surrogates and tail analysis"};
  app.name(args.empty() ? "monotone-lab" : fs::path(args[0]).filename().string());
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);

  Globals g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out, "primary output path");
  app.add_flag("--quiet", g.quiet, "suppress progress output");
  app.add_option("--threads", g.threads, "OpenMP threads (0 = runtime default)");
  app.add_option("--config", g.config, "key-value config file (thresholds, presets)");

  GenFlags gen_f;
  auto* gen = app.add_subcommand("gen", "generate a balanced labeled dataset by rejection sampling");
  gen->add_option("-n", gen_f.n, "matrix size");
  gen->add_option("--per-class", gen_f.per_class, "samples per class");
  gen->add_option("--workers", gen_f.workers, "parallel workers (0 = thread count)");
  gen->add_option("--attempt-cap", gen_f.attempt_cap, "maximum attempts before giving up");
  gen->add_option("--neg-tol", gen_f.neg_tol, "tolerance for negative inverse entries");
  gen->add_option("--csv", gen_f.csv, "also export the dataset as CSV");

  FeaturizeFlags feat_f;
  auto* feat = app.add_subcommand("featurize", "compute the hybrid feature table");
  feat->add_option("--in", feat_f.in, "dataset file")->required();
  feat->add_flag("--no-standardize", feat_f.no_standardize, "write raw feature values");

  TrainCmdFlags train_f;
  auto* trn = app.add_subcommand("train", "train a preset classifier on a feature table");
  trn->add_option("--in", train_f.in, "feature CSV")->required();
  add_train_flags(trn, train_f.train, true);

  IgFlags ig_f;
  auto* ig = app.add_subcommand("ig", "integrated-gradients attribution over a feature table");
  ig->add_option("--model", ig_f.model, "model checkpoint")->required();
  ig->add_option("--in", ig_f.in, "feature CSV")->required();
  ig->add_option("--steps", ig_f.steps, "integration steps");
  ig->add_option("--quadrature", ig_f.quadrature, "trapezoid | midpoint");
  ig->add_option("--top-k", ig_f.top_k, "features in the top-k JSON");
  ig->add_option("--max-rows", ig_f.max_rows, "attribute only the first N rows (0 = all)");

  TreeFlags tree_f;
  auto* tree = app.add_subcommand("tree", "fit a CART surrogate tree");
  tree->add_option("--in", tree_f.in, "feature CSV")->required();
  tree->add_option("--on", tree_f.on, "labels | predictions");
  tree->add_option("--model", tree_f.model, "model checkpoint for --on predictions");
  tree->add_option("--depth", tree_f.depth, "maximum depth");
  tree->add_option("--min-leaf", tree_f.min_leaf, "minimum rows per leaf");
  tree->add_option("--features", tree_f.features, "comma-separated columns, or 'all'");

  StumpFlags stump_f;
  auto* stump = app.add_subcommand("stump", "fit a depth-1 threshold on one column");
  stump->add_option("--in", stump_f.in, "feature CSV")->required();
  stump->add_option("--feature", stump_f.feature, "column name");

  SvmFlags svm_f;
  auto* svm = app.add_subcommand("svm", "fit a linear soft-margin SVM");
  svm->add_option("--in", svm_f.in, "feature CSV")->required();
  svm->add_option("--features", svm_f.features, "comma-separated columns");
  svm->add_option("--C", svm_f.C, "soft-margin constant");
  svm->add_option("--epochs", svm_f.epochs, "passes over the data");

  EvtFlags evt_f;
  auto* evt = app.add_subcommand("evt", "peaks-over-threshold tail analysis of a ratio column");
  evt->add_option("--in", evt_f.in, "feature CSV")->required();
  evt->add_option("--class", evt_f.cls, "monotone | non-monotone | all");
  evt->add_option("--feature", evt_f.feature, "column name");
  evt->add_option("--u", evt_f.u, "POT threshold");
  evt->add_option("--t", evt_f.t, "exceedance level (default: sample maximum)");
  evt->add_option("--grid", evt_f.grid, "stability scan thresholds a:b:k");
  evt->add_option("--mrl-grid", evt_f.mrl_grid, "mean residual life thresholds a:b:k");
  evt->add_option("--replicates", evt_f.replicates, "bootstrap replicates");
  evt->add_option("--level", evt_f.level, "confidence level");

  CheckFlags check_f;
  auto* check = app.add_subcommand("check", "monotonicity oracle and necessary-condition report for one matrix");
  check->add_option("--matrix", check_f.matrix, "inline matrix, rows separated by ';'");
  check->add_option("--file", check_f.file, "matrix text file");
  check->add_option("--threshold", check_f.threshold, "override the configured T_n");
  check->add_flag("--json", check_f.json_out, "print JSON instead of text");

  SubdomainFlags sub_f;
  auto* sub = app.add_subcommand("subdomain", "filter r01 < cut, rebalance, retrain and re-attribute");
  sub->add_option("--in", sub_f.in, "feature CSV")->required();
  sub->add_option("--ratio-cut", sub_f.ratio_cut, "keep rows with r01 below this");
  add_train_flags(sub, sub_f.train, false);
  sub->add_option("--steps", sub_f.steps, "integration steps");
  sub->add_option("--top-k", sub_f.top_k, "features in the top-k JSON");
  sub->add_option("--ig-rows", sub_f.ig_rows, "attribute only the first N rows (0 = all)");
  sub->add_option("--global-ig", sub_f.global_ig, "global attribution CSV to compare against");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (g.threads < 0) {
    err << "error: --threads must be >= 0\n";
    return kExitUsage;
  }
  if (g.threads > 0) omp_set_num_threads(g.threads);

  CLI::App* chosen = app.get_subcommands().front();
  Session s(chosen->get_name(), args, g, out);
  record_flags(s.flags(), &app);
  record_flags(s.flags(), chosen);
  try {
    if (chosen == gen) return cmd_gen(gen_f, g, s);
    if (chosen == feat) return cmd_featurize(feat_f, g, s);
    if (chosen == trn) return cmd_train(train_f, g, s);
    if (chosen == ig) return cmd_ig(ig_f, g, s);
    if (chosen == tree) return cmd_tree(tree_f, g, s);
    if (chosen == stump) return cmd_stump(stump_f, g, s);
    if (chosen == svm) return cmd_svm(svm_f, g, s);
    if (chosen == evt) return cmd_evt(evt_f, g, s);
    if (chosen == check) return cmd_check(check_f, g, s, out);
    if (chosen == sub) return cmd_subdomain(sub_f, g, s);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << error_kind(e) << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace monolab::cli
