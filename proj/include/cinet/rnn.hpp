#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cinet/dataset.hpp"

namespace cinet::rnn {

using dataset::Sequence;
using dataset::TrainingPair;

enum class CellKind { kVanilla, kGru, kLstm };

std::string_view to_string(CellKind cell);
CellKind parse_cell(std::string_view text);
// Number of stacked gate blocks in the cell's weight matrices.
int gate_count(CellKind cell);

struct RnnConfig {
  CellKind cell = CellKind::kLstm;
  int layers = 1;
  int hidden = 50;
  int input_dim = 1;
  dataset::InputMode input_mode = dataset::InputMode::kContextGivenObject;
  double l2_lambda = 1e-4;
  double learning_rate = 1e-3;
  int batch_size = 100;
  std::uint64_t seed = 0;
  int early_stop_patience = 10;
  int max_epochs = 200;
  // Return the best-validation snapshot instead of the last epoch.
  bool restore_best = true;
  // Early-stop on the test split instead of the validation split.
  bool early_stop_on_test = false;

  void validate() const;
};

// A named parameter block. Biases are excluded from the L2 penalty.
struct Param {
  std::string name;
  Eigen::MatrixXd value;
  bool regularized = true;
};

using Grads = std::vector<Eigen::MatrixXd>;

// Stacked recurrent sequence-to-label network. For layer l the parameter
// list holds, in order, the input weights (G*H x d), recurrent weights
// (G*H x H) and bias (G*H x 1); the output head (1 x H weight, 1 x 1 bias)
// comes last. Gate blocks are stacked as [z; r; n] for GRU and [i; f; g; o]
// for LSTM.
class RnnModel {
 public:
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases except
  // the LSTM forget gate, which starts at 1.
  static RnnModel initialize(const RnnConfig& cfg);
  static RnnModel zeros(const RnnConfig& cfg);

  const RnnConfig& config() const { return config_; }
  RnnConfig& mutable_config() { return config_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  Grads zero_grads() const;
  std::size_t num_values() const;

  const Eigen::MatrixXd& w_x(int layer) const { return params_[3 * layer].value; }
  const Eigen::MatrixXd& w_h(int layer) const { return params_[3 * layer + 1].value; }
  const Eigen::MatrixXd& bias(int layer) const { return params_[3 * layer + 2].value; }
  const Eigen::MatrixXd& head_w() const { return params_[3 * config_.layers].value; }
  double head_b() const { return params_[3 * config_.layers + 1].value(0, 0); }

 private:
  explicit RnnModel(const RnnConfig& cfg);
  RnnConfig config_;
  std::vector<Param> params_;
};

// Probability of "increment" for one sequence. Zero initial states; the
// final top-layer hidden state feeds the head.
double forward(const RnnModel& model, const Sequence& x);

// Top-layer hidden states, one per step (exposed for bound checks).
std::vector<Eigen::VectorXd> hidden_states(const RnnModel& model,
                                           const Sequence& x);

inline constexpr double kProbClamp = 1e-12;

double l2_penalty(const RnnModel& model, double l2_lambda);
// Mean binary cross-entropy plus l2_lambda * sum of squared weights.
// Predictions are clamped to [1e-12, 1 - 1e-12].
double loss(std::span<const double> predictions, std::span<const int> labels,
            const RnnModel& model, double l2_lambda);

struct BatchGradient {
  Grads grads;
  double loss = 0.0;  // includes the L2 term
  int correct = 0;
  std::vector<double> predictions;
};

// Exact gradient of the batch loss by backpropagation through time. Samples
// are processed in fixed-size chunks in parallel and the chunk sums are
// reduced in order, so the result is independent of the thread count.
BatchGradient gradients(const RnnModel& model,
                        std::span<const TrainingPair* const> batch);
// Plain sequential accumulation; reference for the parallel version.
BatchGradient gradients_serial(const RnnModel& model,
                               std::span<const TrainingPair* const> batch);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long t = 0;
  Grads m;
  Grads v;

  static AdamState like(const RnnModel& model);
};

void adam_step(AdamState& state, RnnModel& model, const Grads& grads,
               double learning_rate);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  int stopping_epoch = 0;
  int best_epoch = 0;

  std::string to_csv() const;
};

struct TrainResult {
  RnnModel model;
  TrainHistory history;
};

TrainResult train(const dataset::PairSet& pairs, const RnnConfig& cfg);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> probabilities;
};

// Prediction is "increment" iff probability >= 0.5.
EvalResult evaluate(const RnnModel& model,
                    std::span<const TrainingPair* const> pairs);
EvalResult evaluate_serial(const RnnModel& model,
                           std::span<const TrainingPair* const> pairs);

std::string model_to_json(const RnnModel& model);
RnnModel model_from_json(const std::string& text,
                         int expected_version = io::kFormatVersion);
void save_model(const RnnModel& model, const std::filesystem::path& path);
RnnModel load_model(const std::filesystem::path& path,
                    int expected_version = io::kFormatVersion);

}  // namespace cinet::rnn
