#include "monolab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "monolab/errors.hpp"
#include "monolab/io.hpp"
#include "monolab/kernels.hpp"

namespace monolab {

void MlpSpec::validate() const {
  if (input_dim == 0) throw InvalidSpec("MlpSpec: input_dim must be positive");
  if (hidden_widths.empty()) throw InvalidSpec("MlpSpec: hidden_widths must be nonempty");
  if (dropout_rates.size() != hidden_widths.size()) {
    throw InvalidSpec("MlpSpec: one dropout rate per hidden layer required");
  }
  for (std::size_t w : hidden_widths)
    if (w == 0) throw InvalidSpec("MlpSpec: zero-width hidden layer");
  for (double r : dropout_rates)
    if (!(r >= 0.0 && r < 1.0)) throw InvalidSpec("MlpSpec: dropout rate outside [0,1)");
  if (!(head_dropout >= 0.0 && head_dropout < 1.0)) throw InvalidSpec("MlpSpec: head dropout outside [0,1)");
  if (head_width == 0) throw InvalidSpec("MlpSpec: head width must be positive");
  if (!(l2_lambda >= 0.0)) throw InvalidSpec("MlpSpec: l2_lambda must be >= 0");
}

Preset parse_preset(std::string_view name) {
  if (name == "RAW49") return Preset::Raw49;
  if (name == "HYBRID73") return Preset::Hybrid73;
  if (name == "TWOFEAT") return Preset::TwoFeat;
  if (name == "ONEFEAT") return Preset::OneFeat;
  if (name == "SUBDOMAIN") return Preset::Subdomain;
  throw InvalidSpec("unknown preset: " + std::string(name));
}

std::string_view preset_name(Preset p) {
  switch (p) {
    case Preset::Raw49: return "RAW49";
    case Preset::Hybrid73: return "HYBRID73";
    case Preset::TwoFeat: return "TWOFEAT";
    case Preset::OneFeat: return "ONEFEAT";
    case Preset::Subdomain: return "SUBDOMAIN";
  }
  return "?";
}

MlpSpec preset_spec(Preset p, std::optional<std::size_t> input_dim, double width_scale) {
  if (!(width_scale > 0.0)) throw InvalidSpec("preset_spec: width_scale must be > 0");
  MlpSpec s;
  std::vector<std::size_t> body = {1024, 512, 256, 128, 64, 32};
  double rate = 0.35;
  switch (p) {
    case Preset::Raw49:
      s.input_dim = 49;
      rate = 0.25;
      break;
    case Preset::Hybrid73:
    case Preset::Subdomain:
      s.input_dim = 73;
      break;
    case Preset::TwoFeat:
      s.input_dim = 2;
      break;
    case Preset::OneFeat:
      s.input_dim = 1;
      break;
  }
  if (p != Preset::Raw49) body.insert(body.begin(), 2056);
  s.l2_lambda = (p == Preset::Subdomain) ? 1e-3 : 1e-4;
  if (input_dim) s.input_dim = *input_dim;
  for (std::size_t& w : body) {
    w = std::max<std::size_t>(4, static_cast<std::size_t>(std::lround(static_cast<double>(w) / width_scale)));
  }
  s.hidden_widths = body;
  s.dropout_rates.assign(body.size(), rate);
  s.head_width = std::max<std::size_t>(4, static_cast<std::size_t>(std::lround(32.0 / width_scale)));
  s.head_dropout = rate;
  s.validate();
  return s;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t c = 0;
  for (const auto& l : layers) c += l.w.size() + l.b.size();
  return c;
}

std::vector<std::size_t> MlpModel::layer_widths() const {
  std::vector<std::size_t> w;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) w.push_back(layers[l].out);
  return w;
}

MlpModel MlpModel::from_layers(std::vector<DenseLayer> layers, std::vector<double> dropout,
                               double l2_lambda) {
  if (layers.empty() || layers.back().out != 1) throw InvalidSpec("from_layers: last layer must have one output");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& d = layers[l];
    if (d.w.size() != d.in * d.out || d.b.size() != d.out) throw InvalidSpec("from_layers: bad layer shape");
    if (l > 0 && layers[l - 1].out != d.in) throw InvalidSpec("from_layers: layer widths do not chain");
  }
  if (dropout.empty()) dropout.assign(layers.size() - 1, 0.0);
  if (dropout.size() != layers.size() - 1) throw InvalidSpec("from_layers: one dropout rate per hidden layer");
  MlpModel m;
  m.layers = std::move(layers);
  m.dropout = std::move(dropout);
  m.l2_lambda = l2_lambda;
  m.spec.input_dim = m.layers.front().in;
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    m.spec.hidden_widths.push_back(m.layers[l].out);
    m.spec.dropout_rates.push_back(m.dropout[l]);
  }
  m.spec.l2_lambda = l2_lambda;
  m.spec.head_width = 0;  // not built from a preset head
  return m;
}

MlpModel build_model(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  MlpModel m;
  m.spec = spec;
  m.l2_lambda = spec.l2_lambda;
  m.meta.seed = seed;
  std::vector<std::size_t> widths = spec.hidden_widths;
  widths.push_back(spec.head_width);
  widths.push_back(1);
  m.dropout = spec.dropout_rates;
  m.dropout.push_back(spec.head_dropout);

  RngStream rng(seed, 0);
  std::size_t in = spec.input_dim;
  for (std::size_t out : widths) {
    DenseLayer d{in, out, std::vector<double>(in * out), std::vector<double>(out, 0.0)};
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (double& w : d.w) w = limit * rng.uniform_pm1();
    m.layers.push_back(std::move(d));
    in = out;
  }
  return m;
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) - y z, i.e. BCE evaluated on the logit
double bce_from_logit(double z, double y) {
  const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  return softplus - y * z;
}

struct Workspace {
  std::vector<std::vector<double>> acts;   // acts[l]: input of layer l
  std::vector<std::vector<double>> pre;    // pre[l]: pre-activation of layer l
  std::vector<std::vector<double>> masks;  // masks[l]: dropout scale after layer l
  std::vector<std::vector<double>> wt;     // transposed weights
  std::vector<double> delta;
  std::vector<double> dx;
  std::size_t rows = 0;
  bool train = false;
};

void forward_batch(const MlpModel& m, const double* x, std::size_t rows, bool train, RngStream* rng,
                   Workspace& ws) {
  const std::size_t L = m.layers.size();
  ws.acts.resize(L);
  ws.pre.resize(L);
  ws.masks.resize(L);
  ws.rows = rows;
  ws.train = train;
  ws.acts[0].assign(x, x + rows * m.input_dim());
  for (std::size_t l = 0; l < L; ++l) {
    const DenseLayer& d = m.layers[l];
    ws.pre[l].resize(rows * d.out);
    kernels::dense_forward(ws.acts[l].data(), rows, d.in, d.w.data(), d.b.data(), d.out, ws.pre[l].data());
    if (l + 1 == L) break;
    auto& next = ws.acts[l + 1];
    next.resize(rows * d.out);
    for (std::size_t k = 0; k < next.size(); ++k) next[k] = ws.pre[l][k] > 0.0 ? ws.pre[l][k] : 0.0;
    const double rate = m.dropout[l];
    if (train && rate > 0.0) {
      auto& mask = ws.masks[l];
      mask.resize(next.size());
      const double keep_scale = 1.0 / (1.0 - rate);
      for (std::size_t k = 0; k < mask.size(); ++k) {
        mask[k] = rng->uniform01() < rate ? 0.0 : keep_scale;
        next[k] *= mask[k];
      }
    } else {
      ws.masks[l].clear();
    }
  }
}

// dlogit: per-row derivative of the objective w.r.t. the output logit.
// Fills grads (if non-null, same layout as layers) and ws.dx (if want_input).
void backward_batch(const MlpModel& m, Workspace& ws, std::span<const double> dlogit,
                    std::vector<DenseLayer>* grads, bool want_input) {
  const std::size_t L = m.layers.size();
  const std::size_t rows = ws.rows;
  ws.wt.resize(L);
  ws.delta.assign(dlogit.begin(), dlogit.end());
  for (std::size_t l = L; l-- > 0;) {
    const DenseLayer& d = m.layers[l];
    if (grads) {
      DenseLayer& g = (*grads)[l];
      kernels::dense_backward_weights(ws.acts[l].data(), ws.delta.data(), rows, d.in, d.out, g.w.data(),
                                      g.b.data());
    }
    if (l == 0 && !want_input) break;
    ws.wt[l].resize(d.in * d.out);
    kernels::transpose(d.w.data(), d.in, d.out, ws.wt[l].data());
    ws.dx.resize(rows * d.in);
    kernels::dense_backward_input(ws.delta.data(), rows, d.out, ws.wt[l].data(), d.in, ws.dx.data());
    if (l == 0) break;
    // through dropout and ReLU of layer l-1
    const auto& pre = ws.pre[l - 1];
    const auto& mask = ws.masks[l - 1];
    for (std::size_t k = 0; k < ws.dx.size(); ++k) {
      double g = pre[k] > 0.0 ? ws.dx[k] : 0.0;
      if (!mask.empty()) g *= mask[k];
      ws.dx[k] = g;
    }
    std::swap(ws.delta, ws.dx);
  }
}

void check_input(const MlpModel& m, std::size_t size) {
  if (size != m.input_dim()) {
    throw DimensionMismatch("model expects " + std::to_string(m.input_dim()) + " inputs, got " +
                            std::to_string(size));
  }
}

void check_rows(const MlpModel& m, std::size_t size) {
  if (size % m.input_dim() != 0) throw DimensionMismatch("input block is not a whole number of rows");
}

constexpr std::size_t kPredictChunk = 256;

}  // namespace

double forward(const MlpModel& m, std::span<const double> x, bool train_mode, RngStream* dropout_rng) {
  check_input(m, x.size());
  if (train_mode && dropout_rng == nullptr) throw std::invalid_argument("forward: train mode needs a dropout rng");
  Workspace ws;
  forward_batch(m, x.data(), 1, train_mode, dropout_rng, ws);
  return sigmoid(ws.pre.back()[0]);
}

std::vector<double> predict(const MlpModel& m, std::span<const double> rows) {
  check_rows(m, rows.size());
  const std::size_t dim = m.input_dim();
  const std::size_t count = rows.size() / dim;
  std::vector<double> out(count);
  Workspace ws;
  for (std::size_t start = 0; start < count; start += kPredictChunk) {
    const std::size_t len = std::min(kPredictChunk, count - start);
    forward_batch(m, rows.data() + start * dim, len, false, nullptr, ws);
    for (std::size_t r = 0; r < len; ++r) out[start + r] = sigmoid(ws.pre.back()[r]);
  }
  return out;
}

void input_gradient_batch(const MlpModel& m, std::span<const double> rows, std::vector<double>& grads,
                          std::vector<double>& outputs) {
  check_rows(m, rows.size());
  const std::size_t dim = m.input_dim();
  const std::size_t count = rows.size() / dim;
  grads.assign(rows.size(), 0.0);
  outputs.assign(count, 0.0);
  Workspace ws;
  std::vector<double> dlogit;
  for (std::size_t start = 0; start < count; start += kPredictChunk) {
    const std::size_t len = std::min(kPredictChunk, count - start);
    forward_batch(m, rows.data() + start * dim, len, false, nullptr, ws);
    dlogit.resize(len);
    for (std::size_t r = 0; r < len; ++r) {
      const double p = sigmoid(ws.pre.back()[r]);
      outputs[start + r] = p;
      dlogit[r] = p * (1.0 - p);
    }
    backward_batch(m, ws, dlogit, nullptr, true);
    std::copy(ws.dx.begin(), ws.dx.end(), grads.begin() + static_cast<std::ptrdiff_t>(start * dim));
  }
}

std::vector<double> input_gradient(const MlpModel& m, std::span<const double> x) {
  check_input(m, x.size());
  std::vector<double> g, out;
  input_gradient_batch(m, x, g, out);
  return g;
}

void TrainConfig::validate() const {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw std::invalid_argument("TrainConfig: val_fraction must be in (0,1)");
  if (patience > max_epochs) throw std::invalid_argument("TrainConfig: patience must be <= max_epochs");
  if (batch_size == 0 || max_epochs == 0) throw std::invalid_argument("TrainConfig: batch_size and max_epochs must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
}

Split stratified_split(std::span<const std::uint8_t> labels, double val_fraction, std::uint64_t seed) {
  Split s;
  for (std::uint8_t cls : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    RngStream rng(seed, 7u + cls);
    shuffle(idx.begin(), idx.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
    s.val.insert(s.val.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.train.insert(s.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

namespace {

struct AdamState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
  std::size_t t = 0;
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> z;
  for (const auto& l : layers)
    z.push_back({l.in, l.out, std::vector<double>(l.w.size(), 0.0), std::vector<double>(l.b.size(), 0.0)});
  return z;
}

void adam_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, double lr, double c1, double c2) {
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
    v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
    const double mh = m[k] / c1;
    const double vh = v[k] / c2;
    p[k] -= lr * mh / (std::sqrt(vh) + kAdamEps);
  }
}

struct EvalStats {
  double loss = 0.0;
  double acc = 0.0;
};

EvalStats evaluate_loss(const MlpModel& m, const InputMatrix& x, std::span<const std::uint8_t> y) {
  Workspace ws;
  EvalStats s;
  const std::size_t dim = m.input_dim();
  for (std::size_t start = 0; start < x.rows; start += kPredictChunk) {
    const std::size_t len = std::min(kPredictChunk, x.rows - start);
    forward_batch(m, x.values.data() + start * dim, len, false, nullptr, ws);
    for (std::size_t r = 0; r < len; ++r) {
      const double z = ws.pre.back()[r];
      const double yy = y[start + r];
      s.loss += bce_from_logit(z, yy);
      s.acc += ((sigmoid(z) > 0.5) == (yy == 1.0)) ? 1.0 : 0.0;
    }
  }
  s.loss /= static_cast<double>(x.rows);
  s.acc /= static_cast<double>(x.rows);
  return s;
}

bool has_both_classes(std::span<const std::uint8_t> y) {
  bool pos = false, neg = false;
  for (auto v : y) (v ? pos : neg) = true;
  return pos && neg;
}

InputMatrix gather(const InputMatrix& x, std::span<const std::size_t> idx) {
  InputMatrix out;
  out.names = x.names;
  out.rows = idx.size();
  out.values.reserve(idx.size() * x.cols());
  for (std::size_t i : idx) {
    const auto r = x.row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace

TrainResult fit(MlpModel model, const InputMatrix& train_x, std::span<const std::uint8_t> train_y,
                const InputMatrix& val_x, std::span<const std::uint8_t> val_y, const TrainConfig& cfg) {
  cfg.validate();
  if (train_x.cols() != model.input_dim() || val_x.cols() != model.input_dim()) {
    throw DimensionMismatch("fit: input width does not match the model");
  }
  if (train_y.size() != train_x.rows || val_y.size() != val_x.rows) throw DimensionMismatch("fit: label count mismatch");
  if (!has_both_classes(train_y)) throw DegenerateData("fit: training split has a single class");
  if (val_x.rows == 0) throw DegenerateData("fit: empty validation split");

  const std::size_t dim = model.input_dim();
  const std::size_t n = train_x.rows;
  RngStream shuffle_rng(cfg.seed, 101);
  RngStream dropout_rng(cfg.seed, 202);
  AdamState adam{zeros_like(model.layers), zeros_like(model.layers), 0};
  std::vector<DenseLayer> grads = zeros_like(model.layers);

  TrainResult result;
  std::vector<DenseLayer> best = model.layers;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> batch_x;
  std::vector<double> dlogit;
  Workspace ws;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.shuffle) shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    double correct = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      batch_x.resize(len * dim);
      for (std::size_t r = 0; r < len; ++r) {
        const auto row = train_x.row(order[start + r]);
        std::copy(row.begin(), row.end(), batch_x.begin() + static_cast<std::ptrdiff_t>(r * dim));
      }
      forward_batch(model, batch_x.data(), len, true, &dropout_rng, ws);
      dlogit.resize(len);
      for (std::size_t r = 0; r < len; ++r) {
        const double z = ws.pre.back()[r];
        const double y = train_y[order[start + r]];
        const double p = sigmoid(z);
        loss_sum += bce_from_logit(z, y);
        correct += ((p > 0.5) == (y == 1.0)) ? 1.0 : 0.0;
        dlogit[r] = (p - y) / static_cast<double>(len);
      }
      backward_batch(model, ws, dlogit, &grads, false);

      ++adam.t;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& p = model.layers[l];
        auto& g = grads[l];
        if (model.l2_lambda > 0.0) {
          for (std::size_t k = 0; k < g.w.size(); ++k) g.w[k] += 2.0 * model.l2_lambda * p.w[k];
        }
        adam_update(p.w, g.w, adam.m[l].w, adam.v[l].w, cfg.learning_rate, c1, c2);
        adam_update(p.b, g.b, adam.m[l].b, adam.v[l].b, cfg.learning_rate, c1, c2);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_acc = correct / static_cast<double>(n);
    const EvalStats v = evaluate_loss(model, val_x, val_y);
    rec.val_loss = v.loss;
    rec.val_acc = v.acc;
    result.history.push_back(rec);

    for (const auto& l : model.layers) {
      for (double w : l.w)
        if (!std::isfinite(w)) throw NonConvergence("fit: non-finite parameter after epoch " + std::to_string(epoch));
    }

    if (v.loss < best_loss) {
      best_loss = v.loss;
      best = model.layers;
      best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  model.layers = std::move(best);
  model.meta.epochs_run = result.history.size();
  model.meta.best_epoch = best_epoch;
  result.model = std::move(model);
  return result;
}

std::vector<double> Classifier::prepare(std::span<const double> raw_rows) const {
  std::vector<double> x(raw_rows.begin(), raw_rows.end());
  if (standardizer) standardizer->transform_rows(x);
  return x;
}

std::vector<double> Classifier::predict_raw(std::span<const double> raw_rows) const {
  return predict(model, prepare(raw_rows));
}

TrainOutcome train(const InputMatrix& x, std::span<const std::uint8_t> labels, const MlpSpec& spec,
                   std::uint64_t init_seed, const TrainConfig& cfg, bool standardize) {
  cfg.validate();
  if (labels.size() != x.rows) throw DimensionMismatch("train: label count mismatch");
  if (spec.input_dim != x.cols()) throw DimensionMismatch("train: spec input_dim does not match columns");
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (pos < 2 || x.rows - pos < 2) throw DegenerateData("train: need at least 2 samples per class");

  TrainOutcome out;
  out.split = stratified_split(labels, cfg.val_fraction, cfg.seed);
  out.classifier.input_names = x.names;

  InputMatrix tx = gather(x, out.split.train);
  InputMatrix vx = gather(x, out.split.val);
  std::vector<std::uint8_t> ty, vy;
  for (std::size_t i : out.split.train) ty.push_back(labels[i]);
  for (std::size_t i : out.split.val) vy.push_back(labels[i]);

  if (standardize) {
    std::vector<std::uint8_t> all(tx.rows, 1);
    Standardizer s = fit_standardizer(tx.values, tx.cols(), all);
    s.transform_rows(tx.values);
    if (vx.rows) s.transform_rows(vx.values);
    out.classifier.standardizer = std::move(s);
  }
  TrainResult r = fit(build_model(spec, init_seed), tx, ty, vx, vy, cfg);
  out.classifier.model = std::move(r.model);
  out.history = std::move(r.history);
  return out;
}

ConfusionCounts confusion(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                          double threshold) {
  if (probabilities.size() != labels.size()) throw DimensionMismatch("confusion: length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = probabilities[i] > threshold;
    const bool truth = labels[i] != 0;
    if (truth) {
      (pred ? c.tp : c.fn)++;
    } else {
      (pred ? c.fp : c.tn)++;
    }
  }
  return c;
}

ConfusionCounts evaluate(const MlpModel& m, const InputMatrix& x, std::span<const std::uint8_t> labels,
                         double threshold) {
  return confusion(predict(m, x.values), labels, threshold);
}

Metrics metrics(const ConfusionCounts& c) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  return m;
}

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'L', 'P', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_classifier(const Classifier& c, const std::filesystem::path& path) {
  const MlpModel& m = c.model;
  nlohmann::ordered_json j;
  j["format"] = "monolab-mlp";
  j["preset"] = c.preset;
  j["spec"] = {{"input_dim", m.spec.input_dim},
               {"hidden_widths", m.spec.hidden_widths},
               {"dropout_rates", m.spec.dropout_rates},
               {"l2_lambda", m.spec.l2_lambda},
               {"head_width", m.spec.head_width},
               {"head_dropout", m.spec.head_dropout}};
  j["seed"] = m.meta.seed;
  j["epochs_run"] = m.meta.epochs_run;
  j["best_epoch"] = m.meta.best_epoch;
  j["schema_hash"] = hex64(c.schema_hash);
  j["input_names"] = c.input_names;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    layers.push_back({{"in", m.layers[l].in},
                      {"out", m.layers[l].out},
                      {"dropout", l < m.dropout.size() ? m.dropout[l] : 0.0}});
  }
  j["layers"] = layers;
  j["l2_lambda"] = m.l2_lambda;
  if (c.standardizer) {
    j["standardizer"] = {{"means", c.standardizer->means}, {"stds", c.standardizer->stds}};
  }
  const std::string header = j.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  BinaryWriter w(out);
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(header.size());
  w.bytes(header.data(), header.size());
  w.u64(m.parameter_count());
  for (const auto& l : m.layers) {
    for (double v : l.w) w.f64(v);
    for (double v : l.b) w.f64(v);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Classifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open model: " + path.string());
  BinaryReader r(in, path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("bad checkpoint magic: " + path.string());
  if (r.u32() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  const std::uint64_t len = r.u64();
  if (len > r.remaining()) throw FormatError("truncated checkpoint header");
  std::string header(len, '\0');
  r.bytes(header.data(), len);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }

  Classifier c;
  c.preset = j.value("preset", "");
  c.input_names = j.at("input_names").get<std::vector<std::string>>();
  c.schema_hash = std::stoull(j.at("schema_hash").get<std::string>(), nullptr, 16);
  std::vector<DenseLayer> layers;
  std::vector<double> dropout;
  for (const auto& lj : j.at("layers")) {
    DenseLayer d;
    d.in = lj.at("in").get<std::size_t>();
    d.out = lj.at("out").get<std::size_t>();
    layers.push_back(std::move(d));
    dropout.push_back(lj.at("dropout").get<double>());
  }
  dropout.pop_back();
  const std::uint64_t count = r.u64();
  std::uint64_t expected = 0;
  for (const auto& d : layers) expected += d.in * d.out + d.out;
  if (count != expected) throw FormatError("checkpoint parameter count mismatch");
  for (auto& d : layers) {
    d.w.resize(d.in * d.out);
    d.b.resize(d.out);
    for (double& v : d.w) v = r.f64();
    for (double& v : d.b) v = r.f64();
  }
  c.model = MlpModel::from_layers(std::move(layers), std::move(dropout), j.value("l2_lambda", 0.0));
  const auto& sj = j.at("spec");
  c.model.spec.input_dim = sj.at("input_dim").get<std::size_t>();
  c.model.spec.hidden_widths = sj.at("hidden_widths").get<std::vector<std::size_t>>();
  c.model.spec.dropout_rates = sj.at("dropout_rates").get<std::vector<double>>();
  c.model.spec.l2_lambda = sj.at("l2_lambda").get<double>();
  c.model.spec.head_width = sj.at("head_width").get<std::size_t>();
  c.model.spec.head_dropout = sj.at("head_dropout").get<double>();
  c.model.meta.seed = j.value("seed", std::uint64_t{0});
  c.model.meta.epochs_run = j.value("epochs_run", std::size_t{0});
  c.model.meta.best_epoch = j.value("best_epoch", std::size_t{0});
  if (j.contains("standardizer")) {
    Standardizer s;
    s.means = j["standardizer"].at("means").get<std::vector<double>>();
    s.stds = j["standardizer"].at("stds").get<std::vector<double>>();
    s.zero_variance.assign(s.means.size(), 0);
    c.standardizer = std::move(s);
  }
  return c;
}

void write_history_csv(std::span<const EpochRecord> history, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,train_acc,val_acc\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << format_double(h.train_loss) << ',' << format_double(h.val_loss) << ','
        << format_double(h.train_acc) << ',' << format_double(h.val_acc) << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace monolab
