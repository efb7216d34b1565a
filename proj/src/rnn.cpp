#include "cinet/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "cinet/error.hpp"
#include "cinet/random.hpp"

namespace cinet::rnn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(CellKind cell) {
  switch (cell) {
    case CellKind::kVanilla:
      return "vanilla";
    case CellKind::kGru:
      return "gru";
    case CellKind::kLstm:
      return "lstm";
  }
  return "?";
}

CellKind parse_cell(std::string_view text) {
  if (text == "vanilla" || text == "rnn") return CellKind::kVanilla;
  if (text == "gru") return CellKind::kGru;
  if (text == "lstm") return CellKind::kLstm;
  throw ConfigError("unknown cell '" + std::string(text) +
                    "' (expected vanilla, gru or lstm)");
}

int gate_count(CellKind cell) {
  switch (cell) {
    case CellKind::kVanilla:
      return 1;
    case CellKind::kGru:
      return 3;
    case CellKind::kLstm:
      return 4;
  }
  return 1;
}

void RnnConfig::validate() const {
  if (layers < 1 || layers > 3) throw ConfigError("layers must be 1, 2 or 3");
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (l2_lambda < 0.0) throw ConfigError("l2_lambda must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (early_stop_patience < 1) {
    throw ConfigError("early_stop_patience must be >= 1");
  }
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
}

RnnModel::RnnModel(const RnnConfig& cfg) : config_(cfg) {
  cfg.validate();
  const int gh = gate_count(cfg.cell) * cfg.hidden;
  for (int l = 0; l < cfg.layers; ++l) {
    const int d = l == 0 ? cfg.input_dim : cfg.hidden;
    const std::string prefix = "layer" + std::to_string(l) + ".";
    params_.push_back({prefix + "w_x", MatrixXd::Zero(gh, d), true});
    params_.push_back({prefix + "w_h", MatrixXd::Zero(gh, cfg.hidden), true});
    params_.push_back({prefix + "b", MatrixXd::Zero(gh, 1), false});
  }
  params_.push_back({"head.w", MatrixXd::Zero(1, cfg.hidden), true});
  params_.push_back({"head.b", MatrixXd::Zero(1, 1), false});
}

RnnModel RnnModel::zeros(const RnnConfig& cfg) { return RnnModel(cfg); }

RnnModel RnnModel::initialize(const RnnConfig& cfg) {
  RnnModel model(cfg);
  Rng rng(cfg.seed);
  auto fill = [&rng](MatrixXd& m, double fan_in) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in),
                                             1.0 / std::sqrt(fan_in));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
    }
  };
  for (int l = 0; l < cfg.layers; ++l) {
    const int d = l == 0 ? cfg.input_dim : cfg.hidden;
    fill(model.params_[3 * l].value, d);
    fill(model.params_[3 * l + 1].value, cfg.hidden);
    if (cfg.cell == CellKind::kLstm) {
      model.params_[3 * l + 2].value.block(cfg.hidden, 0, cfg.hidden, 1).setOnes();
    }
  }
  fill(model.params_[3 * cfg.layers].value, cfg.hidden);
  return model;
}

Grads RnnModel::zero_grads() const {
  Grads g;
  g.reserve(params_.size());
  for (const auto& p : params_) {
    g.push_back(MatrixXd::Zero(p.value.rows(), p.value.cols()));
  }
  return g;
}

std::size_t RnnModel::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

namespace {

VectorXd sigmoid(const VectorXd& a) {
  return (1.0 + (-a.array()).exp()).inverse().matrix();
}

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// Per-step activations kept for the backward pass.
struct StepCache {
  VectorXd input;
  VectorXd h_prev;
  VectorXd c_prev;  // LSTM only
  VectorXd gates;   // activated gate values
  VectorXd rh;      // GRU: r * h_prev
  VectorXd c;       // LSTM only
  VectorXd h;
};

using LayerCache = std::vector<StepCache>;

void check_sequence(const RnnModel& model, const Sequence& x) {
  if (x.empty()) throw ShapeError("sequence must contain at least one step");
  const int expected = model.config().input_dim;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (x[t].size() != expected) {
      throw ShapeError("input step " + std::to_string(t) + " has dimension " +
                       std::to_string(x[t].size()) + ", expected " +
                       std::to_string(expected));
    }
  }
}

void cell_forward(const RnnModel& model, int layer, StepCache& s) {
  const int h = model.config().hidden;
  const MatrixXd& wx = model.w_x(layer);
  const MatrixXd& wh = model.w_h(layer);
  const MatrixXd& b = model.bias(layer);
  switch (model.config().cell) {
    case CellKind::kVanilla: {
      s.gates = (wx * s.input + wh * s.h_prev + b.col(0)).array().tanh();
      s.h = s.gates;
      break;
    }
    case CellKind::kGru: {
      VectorXd ax = wx * s.input + b.col(0);
      VectorXd zr = ax.head(2 * h) + wh.topRows(2 * h) * s.h_prev;
      s.gates.resize(3 * h);
      s.gates.head(2 * h) = sigmoid(zr);
      const auto z = s.gates.segment(0, h);
      const auto r = s.gates.segment(h, h);
      s.rh = r.cwiseProduct(s.h_prev);
      s.gates.segment(2 * h, h) =
          (ax.segment(2 * h, h) + wh.bottomRows(h) * s.rh).array().tanh();
      const auto n = s.gates.segment(2 * h, h);
      s.h = (1.0 - z.array()) * n.array() + z.array() * s.h_prev.array();
      break;
    }
    case CellKind::kLstm: {
      VectorXd a = wx * s.input + wh * s.h_prev + b.col(0);
      s.gates.resize(4 * h);
      s.gates.segment(0, 2 * h) = sigmoid(a.segment(0, 2 * h));
      s.gates.segment(2 * h, h) = a.segment(2 * h, h).array().tanh();
      s.gates.segment(3 * h, h) = sigmoid(a.segment(3 * h, h));
      const auto i = s.gates.segment(0, h);
      const auto f = s.gates.segment(h, h);
      const auto g = s.gates.segment(2 * h, h);
      const auto o = s.gates.segment(3 * h, h);
      s.c = f.cwiseProduct(s.c_prev) + i.cwiseProduct(g);
      s.h = o.array() * s.c.array().tanh();
      break;
    }
  }
}

// Runs every layer over the sequence, filling caches. Returns the final
// top-layer hidden state.
VectorXd run(const RnnModel& model, const Sequence& x,
             std::vector<LayerCache>& caches) {
  const RnnConfig& cfg = model.config();
  const auto steps = x.size();
  caches.assign(cfg.layers, LayerCache(steps));
  for (int l = 0; l < cfg.layers; ++l) {
    VectorXd h = VectorXd::Zero(cfg.hidden);
    VectorXd c = VectorXd::Zero(cfg.hidden);
    for (std::size_t t = 0; t < steps; ++t) {
      StepCache& s = caches[l][t];
      s.input = l == 0 ? x[t] : caches[l - 1][t].h;
      s.h_prev = h;
      if (cfg.cell == CellKind::kLstm) s.c_prev = c;
      cell_forward(model, l, s);
      h = s.h;
      if (cfg.cell == CellKind::kLstm) c = s.c;
    }
  }
  return caches.back().back().h;
}

// Backpropagates dh (gradient w.r.t. each step's output of `layer`) through
// time. Accumulates parameter gradients and writes the gradient w.r.t. each
// step's input into d_input.
void layer_backward(const RnnModel& model, int layer, const LayerCache& cache,
                    const std::vector<VectorXd>& dh_out, Grads& grads,
                    std::vector<VectorXd>& d_input) {
  const RnnConfig& cfg = model.config();
  const int h = cfg.hidden;
  const MatrixXd& wx = model.w_x(layer);
  const MatrixXd& wh = model.w_h(layer);
  MatrixXd& g_wx = grads[3 * layer];
  MatrixXd& g_wh = grads[3 * layer + 1];
  MatrixXd& g_b = grads[3 * layer + 2];
  const auto steps = cache.size();
  d_input.assign(steps, VectorXd());

  VectorXd dh_next = VectorXd::Zero(h);
  VectorXd dc_next = VectorXd::Zero(h);
  for (std::size_t tt = steps; tt-- > 0;) {
    const StepCache& s = cache[tt];
    VectorXd dh = dh_out[tt] + dh_next;
    VectorXd da;
    switch (cfg.cell) {
      case CellKind::kVanilla: {
        da = dh.array() * (1.0 - s.h.array().square());
        g_wh.noalias() += da * s.h_prev.transpose();
        dh_next = wh.transpose() * da;
        break;
      }
      case CellKind::kGru: {
        const auto z = s.gates.segment(0, h).array();
        const auto r = s.gates.segment(h, h).array();
        const auto n = s.gates.segment(2 * h, h).array();
        da.resize(3 * h);
        const VectorXd dn = dh.array() * (1.0 - z);
        const VectorXd dz = dh.array() * (s.h_prev.array() - n);
        da.segment(2 * h, h) = dn.array() * (1.0 - n.square());
        const VectorXd drh = wh.bottomRows(h).transpose() * da.segment(2 * h, h);
        const VectorXd dr = drh.array() * s.h_prev.array();
        da.segment(0, h) = dz.array() * z * (1.0 - z);
        da.segment(h, h) = dr.array() * r * (1.0 - r);
        g_wh.topRows(2 * h).noalias() += da.head(2 * h) * s.h_prev.transpose();
        g_wh.bottomRows(h).noalias() += da.segment(2 * h, h) * s.rh.transpose();
        dh_next = dh.array() * z + drh.array() * r;
        dh_next.noalias() += wh.topRows(2 * h).transpose() * da.head(2 * h);
        break;
      }
      case CellKind::kLstm: {
        const auto i = s.gates.segment(0, h).array();
        const auto f = s.gates.segment(h, h).array();
        const auto g = s.gates.segment(2 * h, h).array();
        const auto o = s.gates.segment(3 * h, h).array();
        const VectorXd tc = s.c.array().tanh();
        const VectorXd dc =
            dc_next.array() + dh.array() * o * (1.0 - tc.array().square());
        da.resize(4 * h);
        da.segment(0, h) = dc.array() * g * i * (1.0 - i);
        da.segment(h, h) = dc.array() * s.c_prev.array() * f * (1.0 - f);
        da.segment(2 * h, h) = dc.array() * i * (1.0 - g.square());
        da.segment(3 * h, h) = dh.array() * tc.array() * o * (1.0 - o);
        dc_next = dc.array() * f;
        g_wh.noalias() += da * s.h_prev.transpose();
        dh_next = wh.transpose() * da;
        break;
      }
    }
    g_wx.noalias() += da * s.input.transpose();
    g_b.col(0) += da;
    d_input[tt] = wx.transpose() * da;
  }
}

// Adds this sample's loss gradient (no L2) into `grads`; returns y-hat.
double accumulate_sample(const RnnModel& model, const Sequence& x, int y,
                         Grads& grads) {
  check_sequence(model, x);
  const RnnConfig& cfg = model.config();
  std::vector<LayerCache> caches;
  const VectorXd top = run(model, x, caches);
  const double logit = (model.head_w() * top)(0, 0) + model.head_b();
  const double y_hat = sigmoid(logit);
  const double d_logit = y_hat - y;

  grads[3 * cfg.layers].noalias() += d_logit * top.transpose();
  grads[3 * cfg.layers + 1](0, 0) += d_logit;

  const auto steps = x.size();
  std::vector<VectorXd> dh(steps, VectorXd::Zero(cfg.hidden));
  dh.back() = d_logit * model.head_w().transpose();
  std::vector<VectorXd> d_input;
  for (int l = cfg.layers - 1; l >= 0; --l) {
    layer_backward(model, l, caches[l], dh, grads, d_input);
    if (l > 0) dh.swap(d_input);
  }
  return y_hat;
}

double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

double bce(double y_hat, int y) {
  const double p = clamp_prob(y_hat);
  return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

void add_l2(const RnnModel& model, double l2_lambda, Grads& grads) {
  if (l2_lambda == 0.0) return;
  const auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].regularized) grads[i] += 2.0 * l2_lambda * params[i].value;
  }
}

void add_into(Grads& acc, const Grads& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

void scale(Grads& g, double s) {
  for (auto& m : g) m *= s;
}

constexpr std::size_t kChunk = 8;

}  // namespace

double forward(const RnnModel& model, const Sequence& x) {
  check_sequence(model, x);
  std::vector<LayerCache> caches;
  const VectorXd top = run(model, x, caches);
  return sigmoid((model.head_w() * top)(0, 0) + model.head_b());
}

std::vector<VectorXd> hidden_states(const RnnModel& model, const Sequence& x) {
  check_sequence(model, x);
  std::vector<LayerCache> caches;
  run(model, x, caches);
  std::vector<VectorXd> out;
  for (const auto& s : caches.back()) out.push_back(s.h);
  return out;
}

double l2_penalty(const RnnModel& model, double l2_lambda) {
  double sum = 0.0;
  for (const auto& p : model.params()) {
    if (p.regularized) sum += p.value.squaredNorm();
  }
  return l2_lambda * sum;
}

double loss(std::span<const double> predictions, std::span<const int> labels,
            const RnnModel& model, double l2_lambda) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    throw InputError("loss needs equal, non-zero numbers of predictions and labels");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = predictions[i];
    if (p <= 0.0 || p >= 1.0) {
      std::clog << "cinet: clamping prediction " << p << " inside the loss\n";
    }
    sum += bce(p, labels[i]);
  }
  return sum / double(predictions.size()) + l2_penalty(model, l2_lambda);
}

BatchGradient gradients_serial(const RnnModel& model,
                               std::span<const TrainingPair* const> batch) {
  if (batch.empty()) throw InputError("gradient batch is empty");
  BatchGradient out;
  out.grads = model.zero_grads();
  out.predictions.resize(batch.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double y_hat = accumulate_sample(model, batch[i]->x, batch[i]->y, out.grads);
    out.predictions[i] = y_hat;
    sum += bce(y_hat, batch[i]->y);
    out.correct += (y_hat >= 0.5 ? 1 : 0) == batch[i]->y;
  }
  const double n = double(batch.size());
  scale(out.grads, 1.0 / n);
  add_l2(model, model.config().l2_lambda, out.grads);
  out.loss = sum / n + l2_penalty(model, model.config().l2_lambda);
  return out;
}

BatchGradient gradients(const RnnModel& model,
                        std::span<const TrainingPair* const> batch) {
  if (batch.empty()) throw InputError("gradient batch is empty");
  const std::size_t n = batch.size();
  const auto chunks = static_cast<std::ptrdiff_t>((n + kChunk - 1) / kChunk);
  std::vector<Grads> chunk_grads(static_cast<std::size_t>(chunks));
  std::vector<double> chunk_loss(static_cast<std::size_t>(chunks), 0.0);
  BatchGradient out;
  out.predictions.resize(n);
  // Exceptions must not escape an OpenMP region; shape errors are caught
  // up front instead.
  for (const auto* p : batch) check_sequence(model, p->x);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    Grads g = model.zero_grads();
    double sum = 0.0;
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(n, begin + kChunk);
    for (std::size_t i = begin; i < end; ++i) {
      const double y_hat = accumulate_sample(model, batch[i]->x, batch[i]->y, g);
      out.predictions[i] = y_hat;
      sum += bce(y_hat, batch[i]->y);
    }
    chunk_grads[c] = std::move(g);
    chunk_loss[c] = sum;
  }
  out.grads = model.zero_grads();
  double sum = 0.0;
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    add_into(out.grads, chunk_grads[c]);
    sum += chunk_loss[c];
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.correct += (out.predictions[i] >= 0.5 ? 1 : 0) == batch[i]->y;
  }
  scale(out.grads, 1.0 / double(n));
  add_l2(model, model.config().l2_lambda, out.grads);
  out.loss = sum / double(n) + l2_penalty(model, model.config().l2_lambda);
  return out;
}

AdamState AdamState::like(const RnnModel& model) {
  AdamState s;
  s.m = model.zero_grads();
  s.v = model.zero_grads();
  return s;
}

void adam_step(AdamState& state, RnnModel& model, const Grads& grads,
               double learning_rate) {
  auto& params = model.params();
  if (state.m.size() != params.size() || grads.size() != params.size()) {
    throw ShapeError("optimizer state does not match the model");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, double(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] +
                 (1.0 - state.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i].value.array() -=
        learning_rate * (state.m[i].array() / c1) /
        ((state.v[i].array() / c2).sqrt() + state.epsilon);
  }
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,train_loss,train_acc,val_acc\n";
  for (const auto& r : records) {
    out << r.epoch << ',' << r.train_loss << ',' << r.train_acc << ','
        << r.val_acc << '\n';
  }
  return out.str();
}

namespace {

void check_dims(const std::vector<const TrainingPair*>& pairs, int dim) {
  for (const auto* p : pairs) {
    for (const auto& step : p->x) {
      if (step.size() != dim) {
        throw ShapeError("pair vector has dimension " +
                         std::to_string(step.size()) + ", model expects " +
                         std::to_string(dim));
      }
    }
  }
}

}  // namespace

TrainResult train(const dataset::PairSet& pairs, const RnnConfig& cfg_in) {
  RnnConfig cfg = cfg_in;
  cfg.input_mode = pairs.mode;
  cfg.validate();
  const auto train_set = pairs.select(dataset::Split::kTrain);
  const auto val_set = pairs.select(cfg.early_stop_on_test
                                        ? dataset::Split::kTest
                                        : dataset::Split::kValidation);
  if (train_set.empty()) throw InputError("training split is empty");
  if (val_set.empty()) {
    throw InputError(cfg.early_stop_on_test ? "test split is empty"
                                            : "validation split is empty");
  }
  check_dims(train_set, cfg.input_dim);
  check_dims(val_set, cfg.input_dim);

  RnnModel model = RnnModel::initialize(cfg);
  AdamState adam = AdamState::like(model);
  Rng rng(derive_seed(cfg.seed, {0x7EA1ULL}));
  std::vector<const TrainingPair*> order = train_set;

  TrainResult result{model, {}};
  double best_acc = -1.0;
  double best_loss = 0.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::span<const TrainingPair* const> batch(order.data() + begin, end - begin);
      BatchGradient bg = gradients(model, batch);
      if (!std::isfinite(bg.loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch
            << " (learning rate " << cfg.learning_rate << ")";
        throw TrainingError(msg.str());
      }
      loss_sum += bg.loss * double(end - begin);
      correct += bg.correct;
      adam_step(adam, model, bg.grads, cfg.learning_rate);
    }

    const EvalResult val = evaluate(model, val_set);
    double val_loss = 0.0;
    for (std::size_t i = 0; i < val_set.size(); ++i) {
      val_loss += bce(val.probabilities[i], val_set[i]->y);
    }
    val_loss /= double(val_set.size());

    EpochRecord rec{epoch, loss_sum / double(order.size()),
                    double(correct) / double(order.size()), val.accuracy};
    result.history.records.push_back(rec);
    result.history.stopping_epoch = epoch;

    const bool improved = val.accuracy > best_acc ||
                          (val.accuracy == best_acc && val_loss < best_loss);
    if (improved) {
      best_acc = val.accuracy;
      best_loss = val_loss;
      since_best = 0;
      result.history.best_epoch = epoch;
      if (cfg.restore_best) result.model = model;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  if (!cfg.restore_best) {
    result.model = model;
  }
  return result;
}

EvalResult evaluate_serial(const RnnModel& model,
                           std::span<const TrainingPair* const> pairs) {
  if (pairs.empty()) throw InputError("cannot evaluate an empty pair set");
  EvalResult out;
  int correct = 0;
  for (const auto* p : pairs) {
    const double y_hat = forward(model, p->x);
    out.probabilities.push_back(y_hat);
    correct += (y_hat >= 0.5 ? 1 : 0) == p->y;
  }
  out.accuracy = double(correct) / double(pairs.size());
  return out;
}

EvalResult evaluate(const RnnModel& model,
                    std::span<const TrainingPair* const> pairs) {
  if (pairs.empty()) throw InputError("cannot evaluate an empty pair set");
  for (const auto* p : pairs) check_sequence(model, p->x);
  EvalResult out;
  out.probabilities.resize(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out.probabilities[i] = forward(model, pairs[i]->x);
  }
  int correct = 0;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    correct += (out.probabilities[i] >= 0.5 ? 1 : 0) == pairs[i]->y;
  }
  out.accuracy = double(correct) / double(pairs.size());
  return out;
}

using nlohmann::json;

std::string model_to_json(const RnnModel& model) {
  const RnnConfig& c = model.config();
  json j;
  j["format_version"] = io::kFormatVersion;
  j["config"] = {{"cell", std::string(to_string(c.cell))},
                 {"layers", c.layers},
                 {"hidden", c.hidden},
                 {"input_dim", c.input_dim},
                 {"input_mode", std::string(dataset::to_string(c.input_mode))},
                 {"l2_lambda", c.l2_lambda},
                 {"learning_rate", c.learning_rate},
                 {"batch_size", c.batch_size},
                 {"seed", c.seed},
                 {"early_stop_patience", c.early_stop_patience},
                 {"max_epochs", c.max_epochs}};
  json params = json::object();
  for (const auto& p : model.params()) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(p.value.cols()));
      for (Eigen::Index k = 0; k < p.value.cols(); ++k) row[k] = p.value(r, k);
      rows.push_back(std::move(row));
    }
    params[p.name] = std::move(rows);
  }
  j["params"] = std::move(params);
  return j.dump() + "\n";
}

RnnModel model_from_json(const std::string& text, int expected_version) {
  try {
    const json j = json::parse(text);
    const int version = j.at("format_version").get<int>();
    if (version != expected_version) {
      throw FormatError("CINet checkpoint has format_version " +
                        std::to_string(version) + ", expected " +
                        std::to_string(expected_version));
    }
    const json& c = j.at("config");
    RnnConfig cfg;
    cfg.cell = parse_cell(c.at("cell").get<std::string>());
    cfg.layers = c.at("layers").get<int>();
    cfg.hidden = c.at("hidden").get<int>();
    cfg.input_dim = c.at("input_dim").get<int>();
    cfg.input_mode = dataset::parse_input_mode(c.at("input_mode").get<std::string>());
    cfg.l2_lambda = c.at("l2_lambda").get<double>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.early_stop_patience = c.at("early_stop_patience").get<int>();
    cfg.max_epochs = c.at("max_epochs").get<int>();
    RnnModel model = RnnModel::zeros(cfg);
    const json& params = j.at("params");
    for (auto& p : model.params()) {
      const auto rows = params.at(p.name).get<std::vector<std::vector<double>>>();
      if (static_cast<Eigen::Index>(rows.size()) != p.value.rows()) {
        throw FormatError("parameter " + p.name + " has wrong row count");
      }
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != p.value.cols()) {
          throw FormatError("parameter " + p.name + " has wrong column count");
        }
        for (Eigen::Index k = 0; k < p.value.cols(); ++k) {
          if (!std::isfinite(rows[r][k])) {
            throw FormatError("parameter " + p.name + " is not finite");
          }
          p.value(r, k) = rows[r][k];
        }
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("CINet checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("CINet checkpoint: ") + e.what());
  }
}

void save_model(const RnnModel& model, const std::filesystem::path& path) {
  io::write_atomic(path, model_to_json(model));
}

RnnModel load_model(const std::filesystem::path& path, int expected_version) {
  return model_from_json(io::read_file(path), expected_version);
}

}  // namespace cinet::rnn
