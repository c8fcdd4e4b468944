#include "monolab/surrogate.hpp"

#include <algorithm>
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

constexpr double kMinGain = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double gini(std::uint64_t neg, std::uint64_t pos) {
  const double n = static_cast<double>(neg + pos);
  if (n == 0.0) return 0.0;
  const double p = static_cast<double>(pos) / n;
  return 2.0 * p * (1.0 - p);
}

struct Candidate {
  double gain = -1.0;
  double threshold = 0.0;
  bool found = false;
};

Candidate best_split_for_feature(const InputMatrix& x, std::span<const std::uint8_t> labels,
                                 const std::vector<std::size_t>& rows, std::size_t f, std::size_t min_leaf,
                                 double parent_gini) {
  std::vector<std::pair<double, std::uint8_t>> v;
  v.reserve(rows.size());
  for (std::size_t r : rows) v.emplace_back(x.values[r * x.cols() + f], labels[r]);
  std::sort(v.begin(), v.end());
  std::uint64_t total_pos = 0;
  for (const auto& p : v) total_pos += p.second;
  const std::uint64_t total = v.size();
  const double n = static_cast<double>(total);

  Candidate best;
  std::uint64_t left_pos = 0;
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    left_pos += v[k].second;
    if (v[k].first == v[k + 1].first) continue;
    const std::uint64_t nl = k + 1;
    const std::uint64_t nr = total - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    const double w = (static_cast<double>(nl) * gini(nl - left_pos, left_pos) +
                      static_cast<double>(nr) * gini(nr - (total_pos - left_pos), total_pos - left_pos)) /
                     n;
    const double gain = parent_gini - w;
    if (!best.found || gain > best.gain + kMinGain) {
      best = {gain, 0.5 * (v[k].first + v[k + 1].first), true};
    }
  }
  return best;
}

struct Builder {
  const InputMatrix& x;
  std::span<const std::uint8_t> labels;
  DecisionTree& tree;

  int build(const std::vector<std::size_t>& rows, std::size_t depth) {
    TreeNode node;
    node.depth = depth;
    for (std::size_t r : rows) node.counts[labels[r]]++;
    node.predicted = node.counts[1] > node.counts[0] ? 1 : 0;
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);

    const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
    if (pure || depth >= tree.max_depth || rows.size() < 2 * tree.min_leaf) return id;

    const double parent = gini(node.counts[0], node.counts[1]);
    const std::size_t F = x.cols();
    std::vector<Candidate> per_feature(F);
    const auto nf = static_cast<std::int64_t>(F);
#pragma omp parallel for schedule(dynamic) if (rows.size() * F > 20000)
    for (std::int64_t f = 0; f < nf; ++f) {
      per_feature[static_cast<std::size_t>(f)] =
          best_split_for_feature(x, labels, rows, static_cast<std::size_t>(f), tree.min_leaf, parent);
    }
    Candidate best;
    std::size_t best_f = 0;
    for (std::size_t f = 0; f < F; ++f) {
      const Candidate& c = per_feature[f];
      if (c.found && (!best.found || c.gain > best.gain + kMinGain)) {
        best = c;
        best_f = f;
      }
    }
    if (!best.found || best.gain <= kMinGain) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (x.values[r * F + best_f] <= best.threshold ? left : right).push_back(r);
    const int l = build(left, depth + 1);
    const int rr = build(right, depth + 1);
    TreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
    n.leaf = false;
    n.feature = best_f;
    n.threshold = best.threshold;
    n.left = l;
    n.right = rr;
    return id;
  }
};

void check_labels(std::span<const std::uint8_t> labels) {
  for (auto v : labels)
    if (v > 1) throw DegenerateData("labels must be binary");
}

}  // namespace

std::uint8_t DecisionTree::predict_row(std::span<const double> x) const {
  if (x.size() != feature_names.size()) throw DimensionMismatch("tree input width mismatch");
  std::size_t i = 0;
  while (!nodes[i].leaf) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].predicted;
}

std::vector<std::uint8_t> DecisionTree::predict(const InputMatrix& x) const {
  std::vector<std::uint8_t> out(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) out[r] = predict_row(x.row(r));
  return out;
}

std::size_t DecisionTree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes)
    if (n.leaf) d = std::max(d, n.depth);
  return d;
}

std::vector<std::size_t> DecisionTree::split_features() const {
  std::vector<std::size_t> f;
  for (const auto& n : nodes)
    if (!n.leaf) f.push_back(n.feature);
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

std::vector<std::size_t> DecisionTree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].leaf) out.push_back(i);
  return out;
}

DecisionTree fit_tree(const InputMatrix& x, std::span<const std::uint8_t> labels, std::size_t max_depth,
                      std::size_t min_leaf) {
  if (labels.size() != x.rows) throw DimensionMismatch("fit_tree: label count mismatch");
  if (min_leaf == 0) throw InvalidSpec("fit_tree: min_leaf must be >= 1");
  if (x.rows < 2 * min_leaf) throw DegenerateData("fit_tree: fewer than 2 * min_leaf rows");
  check_labels(labels);
  DecisionTree t;
  t.feature_names = x.names;
  t.max_depth = max_depth;
  t.min_leaf = min_leaf;
  std::vector<std::size_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Builder{x, labels, t}.build(rows, 0);
  return t;
}

double agreement(const DecisionTree& t, const InputMatrix& x, std::span<const std::uint8_t> labels) {
  if (labels.size() != x.rows) throw DimensionMismatch("agreement: label count mismatch");
  if (x.rows == 0) return 0.0;
  std::size_t same = 0;
  for (std::size_t r = 0; r < x.rows; ++r) same += t.predict_row(x.row(r)) == labels[r];
  return static_cast<double>(same) / static_cast<double>(x.rows);
}

std::vector<MonotoneBand> extract_monotone_bands(const DecisionTree& t, const std::string& r_feature,
                                                 const std::string& s_feature) {
  auto index = [&](const std::string& name) -> std::optional<std::size_t> {
    const std::string want = canonical_feature_name(name);
    for (std::size_t i = 0; i < t.feature_names.size(); ++i)
      if (canonical_feature_name(t.feature_names[i]) == want) return i;
    return std::nullopt;
  };
  const auto ri = index(r_feature);
  const auto si = index(s_feature);
  for (std::size_t f : t.split_features()) {
    if (f != ri && f != si) throw NonPlanarTree("tree splits on " + t.feature_names[f]);
  }

  std::vector<MonotoneBand> bands;
  struct Frame {
    std::size_t node;
    MonotoneBand box;
  };
  std::vector<Frame> stack{{0, {-kInf, kInf, -kInf, kInf, {}}}};
  while (!stack.empty()) {
    Frame fr = stack.back();
    stack.pop_back();
    const TreeNode& n = t.nodes[fr.node];
    if (n.leaf) {
      if (n.predicted == 1) {
        fr.box.counts = n.counts;
        bands.push_back(fr.box);
      }
      continue;
    }
    MonotoneBand lo = fr.box, hi = fr.box;
    if (ri && n.feature == *ri) {
      lo.r_max = std::min(lo.r_max, n.threshold);
      hi.r_min = std::max(hi.r_min, n.threshold);
    } else {
      lo.s_max = std::min(lo.s_max, n.threshold);
      hi.s_min = std::max(hi.s_min, n.threshold);
    }
    stack.push_back({static_cast<std::size_t>(n.right), hi});
    stack.push_back({static_cast<std::size_t>(n.left), lo});
  }
  std::sort(bands.begin(), bands.end(), [](const MonotoneBand& a, const MonotoneBand& b) {
    return a.r_min != b.r_min ? a.r_min < b.r_min : a.s_min < b.s_min;
  });
  return bands;
}

namespace {

std::string interval_text(const std::string& var, double lo, double hi) {
  const bool has_lo = std::isfinite(lo);
  const bool has_hi = std::isfinite(hi);
  if (has_lo && has_hi) return format_double(lo) + " < " + var + " <= " + format_double(hi);
  if (has_lo) return var + " > " + format_double(lo);
  if (has_hi) return var + " <= " + format_double(hi);
  return "";
}

void collect_rules(const DecisionTree& t, std::size_t node, std::vector<std::string>& conds, std::ostringstream& out) {
  const TreeNode& n = t.nodes[node];
  if (n.leaf) {
    out << "if ";
    if (conds.empty()) out << "true";
    for (std::size_t i = 0; i < conds.size(); ++i) out << (i ? " and " : "") << conds[i];
    out << " => " << (n.predicted ? "monotone" : "non-monotone") << " [" << n.counts[0] << " non-monotone, "
        << n.counts[1] << " monotone]\n";
    return;
  }
  const std::string& name = t.feature_names[n.feature];
  conds.push_back(name + " <= " + format_double(n.threshold));
  collect_rules(t, static_cast<std::size_t>(n.left), conds, out);
  conds.back() = name + " > " + format_double(n.threshold);
  collect_rules(t, static_cast<std::size_t>(n.right), conds, out);
  conds.pop_back();
}

nlohmann::ordered_json node_json(const DecisionTree& t, std::size_t i) {
  const TreeNode& n = t.nodes[i];
  nlohmann::ordered_json j;
  j["counts"] = {n.counts[0], n.counts[1]};
  if (n.leaf) {
    j["leaf"] = true;
    j["predicted"] = n.predicted ? "monotone" : "non-monotone";
    return j;
  }
  j["leaf"] = false;
  j["feature"] = t.feature_names[n.feature];
  j["threshold"] = n.threshold;
  j["left"] = node_json(t, static_cast<std::size_t>(n.left));
  j["right"] = node_json(t, static_cast<std::size_t>(n.right));
  return j;
}

nlohmann::json bound(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string tree_rules_text(const DecisionTree& t) {
  std::ostringstream out;
  std::vector<std::string> conds;
  collect_rules(t, 0, conds, out);
  return out.str();
}

std::string band_rules_text(std::span<const MonotoneBand> bands) {
  std::ostringstream out;
  for (const auto& b : bands) {
    std::vector<std::string> parts;
    for (auto s : {interval_text("r", b.r_min, b.r_max), interval_text("s", b.s_min, b.s_max)})
      if (!s.empty()) parts.push_back(s);
    out << "if " << (parts.empty() ? std::string("true") : join(parts, " and ")) << " => monotone\n";
  }
  return out.str();
}

void write_tree_json(const DecisionTree& t, const std::vector<MonotoneBand>* bands,
                     const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["max_depth"] = t.max_depth;
  j["min_leaf"] = t.min_leaf;
  j["depth"] = t.depth();
  j["features"] = t.feature_names;
  j["root"] = node_json(t, 0);
  if (bands) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& b : *bands) {
      arr.push_back({{"r_min", bound(b.r_min)},
                     {"r_max", bound(b.r_max)},
                     {"s_min", bound(b.s_min)},
                     {"s_max", bound(b.s_max)},
                     {"counts", {b.counts[0], b.counts[1]}}});
    }
    j["bands"] = arr;
  }
  write_text_file(path, j.dump(2) + "\n");
}

StumpResult fit_stump(std::span<const double> values, std::span<const std::uint8_t> labels) {
  if (values.size() != labels.size()) throw DimensionMismatch("fit_stump: length mismatch");
  check_labels(labels);
  StumpResult res;
  std::vector<std::pair<double, std::uint8_t>> v;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) {
      ++res.excluded;
      continue;
    }
    v.emplace_back(values[i], labels[i]);
  }
  std::uint64_t pos = 0;
  for (const auto& p : v) pos += p.second;
  const std::uint64_t neg = v.size() - pos;
  if (v.size() < 2 || pos == 0 || neg == 0) throw DegenerateData("fit_stump: need both classes among defined rows");
  std::sort(v.begin(), v.end());

  // correct(T) = positives at or below T + negatives above T
  std::uint64_t best_correct = 0;
  bool found = false;
  std::uint64_t pos_below = 0, neg_below = 0;
  for (std::size_t k = 0; k + 1 < v.size(); ++k) {
    (v[k].second ? pos_below : neg_below)++;
    if (v[k].first == v[k + 1].first) continue;
    const std::uint64_t correct = pos_below + (neg - neg_below);
    if (!found || correct > best_correct) {
      found = true;
      best_correct = correct;
      res.threshold = 0.5 * (v[k].first + v[k + 1].first);
    }
  }
  if (!found) throw DegenerateData("fit_stump: all values equal, no split candidate");
  res.rows_used = v.size();
  res.accuracy = static_cast<double>(best_correct) / static_cast<double>(v.size());
  return res;
}

double LinearSvmModel::decision(std::span<const double> x) const {
  if (x.size() != weights.size()) throw DimensionMismatch("svm input width mismatch");
  double s = bias;
  for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
  return s;
}

double svm_objective(const LinearSvmModel& m, const InputMatrix& x, std::span<const std::uint8_t> labels) {
  double reg = m.bias * m.bias;
  for (double w : m.weights) reg += w * w;
  double hinge = 0.0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double y = labels[r] ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * m.decision(x.row(r)));
  }
  return 0.5 * reg + m.C * hinge;
}

LinearSvmModel fit_linear_svm(const InputMatrix& x, std::span<const std::uint8_t> labels, double C,
                              std::size_t epochs, std::uint64_t seed) {
  if (labels.size() != x.rows) throw DimensionMismatch("fit_linear_svm: label count mismatch");
  if (!(C > 0.0)) throw InvalidSpec("fit_linear_svm: C must be positive");
  if (epochs == 0) throw InvalidSpec("fit_linear_svm: epochs must be positive");
  if (x.rows == 0) throw DegenerateData("fit_linear_svm: no rows");
  check_labels(labels);
  for (double v : x.values)
    if (!std::isfinite(v)) throw std::invalid_argument("fit_linear_svm: non-finite feature");

  const std::size_t d = x.cols();
  const std::size_t n = x.rows;
  const double lambda = 1.0 / (C * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  std::vector<double> w(d + 1, 0.0);  // last coordinate is the bias
  std::vector<double> avg(d + 1, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  LinearSvmModel m;
  m.feature_names = x.names;
  m.C = C;
  std::uint64_t t = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    RngStream rng(seed, e);
    shuffle(order.begin(), order.end(), rng);
    std::fill(avg.begin(), avg.end(), 0.0);
    for (std::size_t idx : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const auto row = x.row(idx);
      const double y = labels[idx] ? 1.0 : -1.0;
      double margin = w[d];
      for (std::size_t i = 0; i < d; ++i) margin += w[i] * row[i];
      margin *= y;
      const double shrink = 1.0 - eta * lambda;
      for (double& v : w) v *= shrink;
      if (margin < 1.0) {
        for (std::size_t i = 0; i < d; ++i) w[i] += eta * y * row[i];
        w[d] += eta * y;
      }
      double norm2 = 0.0;
      for (double v : w) norm2 += v * v;
      if (norm2 > radius * radius) {
        const double s = radius / std::sqrt(norm2);
        for (double& v : w) v *= s;
      }
      for (std::size_t i = 0; i <= d; ++i) avg[i] += w[i];
    }
    for (double& v : avg) v /= static_cast<double>(n);
    m.weights.assign(avg.begin(), avg.begin() + static_cast<std::ptrdiff_t>(d));
    m.bias = avg[d];
    m.objective_history.push_back(svm_objective(m, x, labels));
  }

  std::size_t correct = 0;
  for (std::size_t r = 0; r < n; ++r) correct += (m.decision(x.row(r)) > 0.0) == (labels[r] == 1);
  m.training_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return m;
}

void write_svm_json(const LinearSvmModel& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json w;
  for (std::size_t i = 0; i < m.weights.size(); ++i) w[m.feature_names[i]] = m.weights[i];
  j["weights"] = w;
  j["bias"] = m.bias;
  j["C"] = m.C;
  j["training_accuracy"] = m.training_accuracy;
  j["objective_first_epoch"] = m.objective_history.empty() ? 0.0 : m.objective_history.front();
  j["objective_final_epoch"] = m.objective_history.empty() ? 0.0 : m.objective_history.back();
  write_text_file(path, j.dump(2) + "\n");
}

SymbolicVerdict symbolic_formula(double c0_abs) {
  if (!(c0_abs >= 0.0)) throw std::invalid_argument("symbolic_formula: |c_0| must be >= 0");
  SymbolicVerdict v;
  v.reduced_rule = c0_abs <= kFormulaReducedCut;
  const double denom = kFormulaPole - c0_abs;
  if (std::abs(denom) <= 1e-12) return v;
  v.p_hat = kFormulaA + kFormulaB / denom;
  v.monotone = *v.p_hat > 0.0;
  return v;
}

}  // namespace monolab
