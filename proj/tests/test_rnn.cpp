#include <doctest.h>

#include <cmath>
#include <limits>

#include "cinet/error.hpp"
#include "cinet/parallel.hpp"
#include "cinet/rnn.hpp"
#include "test_util.hpp"

using namespace cinet;
using namespace cinet::rnn;
using dataset::PairSet;
using dataset::Split;

namespace {

RnnConfig tiny(CellKind cell, int layers) {
  RnnConfig cfg;
  cfg.cell = cell;
  cfg.layers = layers;
  cfg.hidden = 4;
  cfg.input_dim = 3;
  cfg.l2_lambda = 1e-3;
  cfg.seed = 12;
  return cfg;
}

std::vector<const TrainingPair*> pointers(const PairSet& set) {
  std::vector<const TrainingPair*> out;
  for (const auto& p : set.pairs) out.push_back(&p);
  return out;
}

double batch_loss(const RnnModel& model, std::span<const TrainingPair* const> batch) {
  std::vector<double> preds;
  std::vector<int> labels;
  for (const auto* p : batch) {
    preds.push_back(forward(model, p->x));
    labels.push_back(p->y);
  }
  return loss(preds, labels, model, model.config().l2_lambda);
}

// label 1 iff the first feature of the last step exceeds 0.5
PairSet threshold_task(int n, std::uint64_t seed) {
  PairSet set = testutil::random_pairs(n, 3, 4, seed);
  for (auto& p : set.pairs) p.y = p.x.back()[0] > 0.5 ? 1 : 0;
  return set;
}

}  // namespace

TEST_CASE("cell names and gate counts") {
  CHECK(parse_cell("lstm") == CellKind::kLstm);
  CHECK(parse_cell(to_string(CellKind::kGru)) == CellKind::kGru);
  CHECK(parse_cell(to_string(CellKind::kVanilla)) == CellKind::kVanilla);
  CHECK(gate_count(CellKind::kVanilla) == 1);
  CHECK(gate_count(CellKind::kGru) == 3);
  CHECK(gate_count(CellKind::kLstm) == 4);
  CHECK_THROWS_AS(parse_cell("transformer"), ConfigError);
}

TEST_CASE("config validation") {
  RnnConfig cfg = tiny(CellKind::kLstm, 1);
  CHECK_NOTHROW(cfg.validate());
  cfg.layers = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny(CellKind::kLstm, 1);
  cfg.hidden = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny(CellKind::kLstm, 1);
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("parameter shapes and initialisation") {
  const RnnModel lstm = RnnModel::initialize(tiny(CellKind::kLstm, 2));
  CHECK(lstm.params().size() == 3 * 2 + 2);
  CHECK(lstm.w_x(0).rows() == 16);
  CHECK(lstm.w_x(0).cols() == 3);
  CHECK(lstm.w_x(1).cols() == 4);
  CHECK(lstm.w_h(1).rows() == 16);
  CHECK(lstm.head_w().cols() == 4);
  // forget gate bias (second block) starts at one, the rest at zero
  for (int l = 0; l < 2; ++l) {
    CHECK(lstm.bias(l).block(0, 0, 4, 1).isZero(0.0));
    CHECK(lstm.bias(l).block(4, 0, 4, 1).isOnes(0.0));
    CHECK(lstm.bias(l).block(8, 0, 8, 1).isZero(0.0));
  }
  const double bound = 1.0 / std::sqrt(3.0);
  CHECK(lstm.w_x(0).cwiseAbs().maxCoeff() <= bound);
  for (const auto& p : lstm.params()) {
    const bool is_bias = p.name.ends_with(".b");
    CHECK(p.regularized == !is_bias);
  }
  const RnnModel gru = RnnModel::initialize(tiny(CellKind::kGru, 1));
  CHECK(gru.w_h(0).rows() == 12);
  CHECK(gru.bias(0).isZero(0.0));
  CHECK(RnnModel::initialize(tiny(CellKind::kGru, 1)).w_x(0) == gru.w_x(0));
}

TEST_CASE("forward on a zero model gives one half") {
  const RnnModel model = RnnModel::zeros(tiny(CellKind::kGru, 2));
  const PairSet set = testutil::random_pairs(3, 3, 5, 1);
  for (const auto& p : set.pairs) CHECK(forward(model, p.x) == 0.5);
  CHECK_THROWS_AS(forward(model, {}), ShapeError);
  CHECK_THROWS_AS(forward(model, {Eigen::VectorXd::Zero(4)}), ShapeError);
}

TEST_CASE("hidden states have one entry per step") {
  const RnnModel model = RnnModel::initialize(tiny(CellKind::kVanilla, 3));
  const PairSet set = testutil::random_pairs(1, 3, 5, 2);
  const auto hs = hidden_states(model, set.pairs[0].x);
  CHECK(hs.size() == set.pairs[0].x.size());
  for (const auto& h : hs) {
    CHECK(h.size() == 4);
    CHECK(h.cwiseAbs().maxCoeff() < 1.0);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  const PairSet set = testutil::random_pairs(5, 3, 4, 33);
  const auto batch = pointers(set);
  for (CellKind cell : {CellKind::kVanilla, CellKind::kGru, CellKind::kLstm}) {
    for (int layers = 1; layers <= 3; ++layers) {
      CAPTURE(to_string(cell));
      CAPTURE(layers);
      RnnModel model = RnnModel::initialize(tiny(cell, layers));
      const BatchGradient g = gradients_serial(model, batch);
      CHECK(g.loss == doctest::Approx(batch_loss(model, batch)).epsilon(1e-12));
      double worst = 0.0;
      const double h = 1e-6;
      for (std::size_t i = 0; i < model.params().size(); ++i) {
        Eigen::MatrixXd& w = model.params()[i].value;
        for (Eigen::Index j = 0; j < w.size(); ++j) {
          const double saved = w.data()[j];
          w.data()[j] = saved + h;
          const double up = batch_loss(model, batch);
          w.data()[j] = saved - h;
          const double down = batch_loss(model, batch);
          w.data()[j] = saved;
          const double numeric = (up - down) / (2 * h);
          const double analytic = g.grads[i].data()[j];
          const double rel = std::abs(numeric - analytic) /
                             std::max(1e-5, std::abs(numeric) + std::abs(analytic));
          worst = std::max(worst, rel);
        }
      }
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("parallel gradients equal the serial reference exactly") {
  const PairSet set = testutil::random_pairs(37, 3, 6, 8);
  const auto batch = pointers(set);
  const RnnModel model = RnnModel::initialize(tiny(CellKind::kLstm, 2));
  const BatchGradient serial = gradients_serial(model, batch);
  const int threads = max_threads();
  for (int t : {1, 2, 4}) {
    set_threads(t);
    const BatchGradient par = gradients(model, batch);
    CHECK(par.correct == serial.correct);
    CHECK(par.predictions == serial.predictions);
    CHECK(std::abs(par.loss - serial.loss) <= 1e-12 * std::abs(serial.loss));
    for (std::size_t i = 0; i < par.grads.size(); ++i) {
      CHECK((par.grads[i] - serial.grads[i]).cwiseAbs().maxCoeff() <= 1e-12);
    }
    // same result at every thread count
    CHECK(par.grads == gradients(model, batch).grads);
  }
  set_threads(threads);
  CHECK_THROWS_AS(gradients(model, std::span<const TrainingPair* const>{}), InputError);
}

TEST_CASE("the loss clamps predictions and adds the weight penalty") {
  const RnnModel model = RnnModel::zeros(tiny(CellKind::kVanilla, 1));
  const std::vector<double> preds{0.0, 1.0};
  const std::vector<int> labels{1, 0};
  CHECK(loss(preds, labels, model, 0.0) == doctest::Approx(-std::log(kProbClamp)));
  CHECK(std::isfinite(loss(preds, labels, model, 0.0)));
  RnnModel ones = RnnModel::zeros(tiny(CellKind::kVanilla, 1));
  for (auto& p : ones.params()) p.value.setOnes();
  // weights: w_x 4x3, w_h 4x4, head 1x4; biases are not penalised
  CHECK(l2_penalty(ones, 0.5) == doctest::Approx(0.5 * (12 + 16 + 4)));
}

TEST_CASE("the first Adam step moves each weight by the learning rate") {
  RnnModel model = RnnModel::zeros(tiny(CellKind::kVanilla, 1));
  Grads g = model.zero_grads();
  g[0].setConstant(-3.0);
  g[1].setConstant(0.25);
  AdamState state = AdamState::like(model);
  adam_step(state, model, g, 0.01);
  CHECK(state.t == 1);
  CHECK(model.w_x(0)(0, 0) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(model.w_h(0)(1, 1) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(model.bias(0).isZero(0.0));
  // second step with the same gradient is again lr-sized
  adam_step(state, model, g, 0.01);
  CHECK(model.w_x(0)(0, 0) == doctest::Approx(0.02).epsilon(1e-6));
}

TEST_CASE("Adam memorises a handful of random sequences") {
  const PairSet set = testutil::random_pairs(8, 3, 4, 5);
  const auto batch = pointers(set);
  RnnConfig cfg = tiny(CellKind::kLstm, 1);
  cfg.hidden = 8;
  cfg.l2_lambda = 0.0;
  RnnModel model = RnnModel::initialize(cfg);
  AdamState state = AdamState::like(model);
  double last = 0.0;
  for (int step = 0; step < 600; ++step) {
    const BatchGradient g = gradients(model, batch);
    last = g.loss;
    adam_step(state, model, g.grads, 0.02);
  }
  CHECK(last < 0.05);
  CHECK(evaluate(model, batch).accuracy == 1.0);
}

TEST_CASE("evaluate thresholds at one half and matches the serial path") {
  const PairSet set = testutil::random_pairs(20, 3, 3, 6);
  const auto ptrs = pointers(set);
  const RnnModel zero = RnnModel::zeros(tiny(CellKind::kGru, 1));
  // every prediction is exactly 0.5, so everything is called positive
  const EvalResult all_pos = evaluate(zero, ptrs);
  CHECK(all_pos.accuracy == doctest::Approx(0.5));
  const RnnModel model = RnnModel::initialize(tiny(CellKind::kGru, 2));
  const EvalResult a = evaluate(model, ptrs);
  const EvalResult b = evaluate_serial(model, ptrs);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.probabilities == b.probabilities);
  CHECK_THROWS_AS(evaluate(model, std::span<const TrainingPair* const>{}), InputError);
}

TEST_CASE("train learns a separable task and restores the best epoch") {
  PairSet set = threshold_task(300, 4);
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    set.pairs[i].split = i < 200 ? Split::kTrain : i < 250 ? Split::kValidation : Split::kTest;
  }
  RnnConfig cfg = tiny(CellKind::kGru, 1);
  cfg.hidden = 8;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 20;
  cfg.max_epochs = 80;
  cfg.early_stop_patience = 10;
  const TrainResult result = train(set, cfg);
  const auto& hist = result.history;
  REQUIRE(!hist.records.empty());
  CHECK(hist.stopping_epoch == int(hist.records.size()));
  CHECK(hist.best_epoch <= hist.stopping_epoch);
  CHECK(evaluate(result.model, set.select(Split::kTest)).accuracy >= 0.9);
  const double best_val = hist.records[hist.best_epoch - 1].val_acc;
  CHECK(evaluate(result.model, set.select(Split::kValidation)).accuracy == doctest::Approx(best_val));
  for (const auto& r : hist.records) CHECK(r.val_acc <= best_val);
  CHECK(hist.to_csv().starts_with("epoch,train_loss,train_acc,val_acc\n"));

  // same seed, same run
  const TrainResult again = train(set, cfg);
  CHECK(again.history.stopping_epoch == hist.stopping_epoch);
  CHECK(again.model.params()[0].value == result.model.params()[0].value);
}

TEST_CASE("train stops early when validation stalls") {
  PairSet set = testutil::random_pairs(60, 3, 3, 9);
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    set.pairs[i].split = i < 40 ? Split::kTrain : Split::kValidation;
  }
  RnnConfig cfg = tiny(CellKind::kVanilla, 1);
  cfg.max_epochs = 500;
  cfg.early_stop_patience = 3;
  const TrainResult result = train(set, cfg);
  CHECK(result.history.stopping_epoch < 500);
  CHECK(result.history.stopping_epoch - result.history.best_epoch == 3);
}

TEST_CASE("train reports a diverging loss") {
  PairSet set = threshold_task(40, 10);
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    set.pairs[i].split = i < 30 ? Split::kTrain : Split::kValidation;
  }
  set.pairs[3].x[0][1] = std::numeric_limits<double>::quiet_NaN();
  RnnConfig cfg = tiny(CellKind::kLstm, 1);
  cfg.learning_rate = 0.05;
  try {
    train(set, cfg);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("0.05") != std::string::npos);
  }
}

TEST_CASE("train validates pair shapes and splits") {
  PairSet set = testutil::random_pairs(10, 3, 3, 1);
  RnnConfig cfg = tiny(CellKind::kLstm, 1);
  CHECK_THROWS_AS(train(set, cfg), InputError);  // no validation split
  for (auto& p : set.pairs) p.split = Split::kValidation;
  set.pairs[0].split = Split::kTrain;
  cfg.input_dim = 5;
  CHECK_THROWS_AS(train(set, cfg), ShapeError);
}

TEST_CASE("checkpoint round trip reproduces predictions") {
  RnnConfig cfg = tiny(CellKind::kLstm, 2);
  cfg.input_mode = dataset::InputMode::kConcat;
  const RnnModel model = RnnModel::initialize(cfg);
  const RnnModel back = model_from_json(model_to_json(model));
  CHECK(back.config().cell == CellKind::kLstm);
  CHECK(back.config().layers == 2);
  CHECK(back.config().input_mode == dataset::InputMode::kConcat);
  const PairSet set = testutil::random_pairs(4, 3, 4, 2);
  for (const auto& p : set.pairs) CHECK(forward(back, p.x) == forward(model, p.x));
  CHECK_THROWS_AS(model_from_json(model_to_json(model), 7), FormatError);
  CHECK_THROWS_AS(model_from_json("{\"format_version\": 1}"), FormatError);
}

TEST_CASE("a scalar vanilla cell matches hand arithmetic") {
  RnnConfig cfg;
  cfg.cell = CellKind::kVanilla;
  cfg.hidden = 1;
  cfg.input_dim = 1;
  RnnModel model = RnnModel::zeros(cfg);
  auto& p = model.params();
  p[0].value(0, 0) = 0.5;   // w_x
  p[1].value(0, 0) = -0.3;  // w_h
  p[2].value(0, 0) = 0.1;   // b
  p[3].value(0, 0) = 2.0;   // head.w
  p[4].value(0, 0) = -0.5;  // head.b
  const Sequence x{Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, -2.0)};
  CHECK(forward(model, x) == doctest::Approx(0.11183029207446817).epsilon(1e-14));
}

TEST_CASE("loss reference values") {
  RnnConfig cfg;
  cfg.cell = CellKind::kVanilla;
  cfg.hidden = 1;
  cfg.input_dim = 1;
  RnnModel model = RnnModel::zeros(cfg);
  const std::vector<double> half{0.5};
  const std::vector<double> p09{0.9};
  const std::vector<int> one{1};
  const std::vector<int> zero{0};
  CHECK(std::abs(loss(half, one, model, 0.0) - std::log(2.0)) <= 1e-12);
  CHECK(std::abs(loss(half, zero, model, 0.0) - std::log(2.0)) <= 1e-12);
  CHECK(loss(p09, one, model, 0.0) == doctest::Approx(0.10536051565782628).epsilon(1e-14));
  // two penalised weights {1, -2}, a perfect prediction
  model.params()[0].value(0, 0) = 1.0;
  model.params()[1].value(0, 0) = -2.0;
  model.params()[2].value(0, 0) = 7.0;  // bias, not penalised
  const std::vector<double> perfect{1.0};
  CHECK(loss(perfect, one, model, 0.01) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("a zero gradient leaves parameters unchanged") {
  RnnModel model = RnnModel::initialize(tiny(CellKind::kLstm, 2));
  const RnnModel before = model;
  AdamState state = AdamState::like(model);
  for (int i = 0; i < 3; ++i) adam_step(state, model, model.zero_grads(), 0.1);
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    CHECK(model.params()[i].value == before.params()[i].value);
  }
}

TEST_CASE("train memorises 20 pairs without early stopping") {
  PairSet set = testutil::random_pairs(24, 3, 4, 17);
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    set.pairs[i].split = i < 20 ? Split::kTrain : Split::kValidation;
  }
  RnnConfig cfg = tiny(CellKind::kLstm, 1);
  cfg.hidden = 10;
  cfg.l2_lambda = 0.0;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 20;
  cfg.max_epochs = 200;
  cfg.early_stop_patience = 200;
  cfg.restore_best = false;
  const TrainResult result = train(set, cfg);
  CHECK(result.history.stopping_epoch == 200);
  CHECK(result.history.records.back().train_acc == 1.0);
  CHECK(evaluate(result.model, set.select(Split::kTrain)).accuracy == 1.0);
}

TEST_CASE("a constant 0.9 model is perfect on all-positive labels") {
  RnnModel model = RnnModel::zeros(tiny(CellKind::kGru, 1));
  model.params().back().value(0, 0) = std::log(0.9 / 0.1);
  PairSet set = testutil::random_pairs(10, 3, 3, 4);
  for (auto& p : set.pairs) p.y = 1;
  const EvalResult r = evaluate(model, pointers(set));
  CHECK(r.accuracy == 1.0);
  CHECK(r.probabilities[0] == doctest::Approx(0.9));
}
