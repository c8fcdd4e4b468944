#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "monolab/features.hpp"

namespace monolab {

struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;  // rows with x <= threshold go left
  int left = -1;
  int right = -1;
  std::uint8_t predicted = 0;
  std::array<std::uint64_t, 2> counts{};  // {non-monotone, monotone}
  std::size_t depth = 0;
};

// CART tree with Gini impurity; nodes[0] is the root.
struct DecisionTree {
  std::vector<std::string> feature_names;
  std::vector<TreeNode> nodes;
  std::size_t max_depth = 0;
  std::size_t min_leaf = 1;

  std::uint8_t predict_row(std::span<const double> x) const;
  std::vector<std::uint8_t> predict(const InputMatrix& x) const;
  std::size_t depth() const;
  std::vector<std::size_t> split_features() const;  // sorted, unique
  std::vector<std::size_t> leaves() const;
};

inline constexpr std::size_t kDefaultMinLeaf = 50;

// Greedy best-Gini splits. Candidate thresholds are midpoints of consecutive
// sorted unique values; ties go to the lower feature index, then the lower
// threshold. Leaves predict the majority class (ties -> non-monotone).
DecisionTree fit_tree(const InputMatrix& x, std::span<const std::uint8_t> labels, std::size_t max_depth,
                      std::size_t min_leaf = kDefaultMinLeaf);

// Fraction of rows where tree and labels agree.
double agreement(const DecisionTree& t, const InputMatrix& x, std::span<const std::uint8_t> labels);

// Region r_min < |c_0| <= r_max, s_min < |c_1| <= s_max; infinite bounds mean
// unbounded on that side.
struct MonotoneBand {
  double r_min;
  double r_max;
  double s_min;
  double s_max;
  std::array<std::uint64_t, 2> counts{};

  bool contains(double r, double s) const { return r > r_min && r <= r_max && s > s_min && s <= s_max; }
};

// One band per monotone leaf, sorted by (r_min, s_min). Throws NonPlanarTree
// if the tree splits on anything other than the two named features.
std::vector<MonotoneBand> extract_monotone_bands(const DecisionTree& t, const std::string& r_feature = "abs_c_0",
                                                 const std::string& s_feature = "abs_c_1");

// Human-readable rules, one line per leaf.
std::string tree_rules_text(const DecisionTree& t);
std::string band_rules_text(std::span<const MonotoneBand> bands);
void write_tree_json(const DecisionTree& t, const std::vector<MonotoneBand>* bands,
                     const std::filesystem::path& path);

struct StumpResult {
  double threshold = 0.0;
  double accuracy = 0.0;
  std::size_t rows_used = 0;
  std::size_t excluded = 0;  // NaN (Undefined) rows
};

// Depth-1 split predicting monotone iff value <= threshold, chosen over all
// midpoint candidates by accuracy; ties go to the smaller threshold.
StumpResult fit_stump(std::span<const double> values, std::span<const std::uint8_t> labels);

struct LinearSvmModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;
  double bias = 0.0;
  double C = 1.0;
  double training_accuracy = 0.0;
  std::vector<double> objective_history;  // per epoch, at the epoch's averaged iterate

  double decision(std::span<const double> x) const;
};

// Soft-margin primal objective (1/2)(|w|^2 + b^2) + C * sum hinge.
double svm_objective(const LinearSvmModel& m, const InputMatrix& x, std::span<const std::uint8_t> labels);

// Pegasos-style stochastic subgradient descent with step 1/(lambda t),
// lambda = 1 / (C N). The bias is an extra regularized coordinate; each
// epoch's iterates are averaged and the last epoch's average is returned.
LinearSvmModel fit_linear_svm(const InputMatrix& x, std::span<const std::uint8_t> labels, double C = 1.0,
                              std::size_t epochs = 50, std::uint64_t seed = 0);

void write_svm_json(const LinearSvmModel& m, const std::filesystem::path& path);

struct SymbolicVerdict {
  std::optional<double> p_hat;  // nullopt at the pole
  bool monotone = false;        // literal rule p_hat > 0
  bool reduced_rule = false;    // |c_0| <= 1.59
};

inline constexpr double kFormulaA = 0.9720;
inline constexpr double kFormulaB = 0.0331;
inline constexpr double kFormulaPole = 1.5541;
inline constexpr double kFormulaReducedCut = 1.59;

SymbolicVerdict symbolic_formula(double c0_abs);

}  // namespace monolab
