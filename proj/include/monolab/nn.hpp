#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "monolab/features.hpp"
#include "monolab/rng.hpp"

namespace monolab {

// Feed-forward body of ReLU dense layers followed by the shared head
// Dense(head_width) -> ReLU -> Dropout -> Dense(1) -> sigmoid.
struct MlpSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths;
  std::vector<double> dropout_rates;  // one per hidden layer
  double l2_lambda = 0.0;
  std::size_t head_width = 32;
  double head_dropout = 0.0;

  void validate() const;  // throws InvalidSpec
};

enum class Preset { Raw49, Hybrid73, TwoFeat, OneFeat, Subdomain };

Preset parse_preset(std::string_view name);
std::string_view preset_name(Preset p);

// Named architectures. input_dim overrides the preset's nominal input width
// (49/73/2/1/73), which lets the same body be used for n != 7. width_scale
// divides every hidden width (rounded, minimum 4) for desk-scale runs.
MlpSpec preset_spec(Preset p, std::optional<std::size_t> input_dim = std::nullopt,
                    double width_scale = 1.0);

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // in x out, input-major
  std::vector<double> b;
};

struct TrainMeta {
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
};

// Stack of dense layers; every layer but the last is ReLU with inverted
// dropout at dropout[l], the last is a single sigmoid unit.
struct MlpModel {
  MlpSpec spec;
  std::vector<DenseLayer> layers;
  std::vector<double> dropout;  // per non-final layer
  double l2_lambda = 0.0;
  TrainMeta meta;

  std::size_t input_dim() const { return layers.front().in; }
  std::size_t parameter_count() const;
  std::vector<std::size_t> layer_widths() const;  // outputs of the non-final layers

  // Wraps explicit layers (last one must have a single output).
  static MlpModel from_layers(std::vector<DenseLayer> layers, std::vector<double> dropout = {},
                              double l2_lambda = 0.0);
};

// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
MlpModel build_model(const MlpSpec& spec, std::uint64_t seed);

// Sigmoid output for one input. train_mode applies inverted dropout drawn
// from dropout_rng, which must then be non-null.
double forward(const MlpModel& m, std::span<const double> x, bool train_mode = false,
               RngStream* dropout_rng = nullptr);

// Inference over row-major inputs.
std::vector<double> predict(const MlpModel& m, std::span<const double> rows);

// dF/dx for the sigmoid output F, inference mode.
std::vector<double> input_gradient(const MlpModel& m, std::span<const double> x);

// Row-major gradients for each input row plus the outputs F at those rows.
void input_gradient_batch(const MlpModel& m, std::span<const double> rows,
                          std::vector<double>& grads, std::vector<double>& outputs);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 25;
  std::size_t patience = 6;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochRecord> history;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Per-class seeded shuffle; round(val_fraction * class_count) rows of each
// class go to validation.
Split stratified_split(std::span<const std::uint8_t> labels, double val_fraction, std::uint64_t seed);

// Adam on BCE + l2 * sum ||W||^2 with early stopping on validation BCE; the
// best-validation parameters are restored. Single-threaded control flow; the
// dense kernels parallelize with a fixed summation order.
TrainResult fit(MlpModel model, const InputMatrix& train_x, std::span<const std::uint8_t> train_y,
                const InputMatrix& val_x, std::span<const std::uint8_t> val_y, const TrainConfig& cfg);

// Network plus the input columns it reads and the standardizer fitted on its
// training split.
struct Classifier {
  std::vector<std::string> input_names;
  std::optional<Standardizer> standardizer;
  MlpModel model;
  std::uint64_t schema_hash = 0;
  std::string preset;

  // Applies the standardizer (if any) to row-major raw inputs.
  std::vector<double> prepare(std::span<const double> raw_rows) const;
  std::vector<double> predict_raw(std::span<const double> raw_rows) const;
};

struct TrainOutcome {
  Classifier classifier;
  std::vector<EpochRecord> history;
  Split split;
};

// Stratified split, optional standardization fitted on the training rows,
// then fit(). Throws DegenerateData unless each class has >= 2 rows.
TrainOutcome train(const InputMatrix& x, std::span<const std::uint8_t> labels, const MlpSpec& spec,
                   std::uint64_t init_seed, const TrainConfig& cfg, bool standardize = true);

struct ConfusionCounts {
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tp = 0;
  std::uint64_t total() const { return tn + fp + fn + tp; }
};

// Positive prediction iff probability > threshold.
ConfusionCounts confusion(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                          double threshold = 0.5);
ConfusionCounts evaluate(const MlpModel& m, const InputMatrix& x, std::span<const std::uint8_t> labels,
                         double threshold = 0.5);

struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> specificity;
};

Metrics metrics(const ConfusionCounts& c);

void save_classifier(const Classifier& c, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

void write_history_csv(std::span<const EpochRecord> history, const std::filesystem::path& path);

}  // namespace monolab
