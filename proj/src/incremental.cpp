#include "cinet/incremental.hpp"

#include <cmath>
#include <sstream>

#include "cinet/dataset.hpp"
#include "cinet/error.hpp"
#include "cinet/random.hpp"

namespace cinet::incremental {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_cinet_fits(const rnn::RnnModel& cinet, int vocab_size) {
  const auto mode = cinet.config().input_mode;
  const int expected = dataset::input_dim(mode, vocab_size);
  if (cinet.config().input_dim != expected) {
    throw ConfigError("CINet expects input_dim " +
                      std::to_string(cinet.config().input_dim) + " but mode " +
                      std::string(dataset::to_string(mode)) +
                      " over a vocabulary of " + std::to_string(vocab_size) +
                      " gives " + std::to_string(expected));
  }
}

double cinet_probability(const rnn::RnnModel& cinet, const lda::LdaModel& model) {
  return rnn::forward(cinet, dataset::encode_input(lda::prob_view(model),
                                                   cinet.config().input_mode));
}

}  // namespace

void validate(const IncrementPolicy& policy) {
  std::visit(Overloaded{
                 [](const CinetPolicy& p) {
                   if (p.model == nullptr) throw ConfigError("CINet policy has no model");
                   if (!(p.threshold > 0.0 && p.threshold < 1.0)) {
                     throw ConfigError("CINet threshold must lie in (0, 1)");
                   }
                 },
                 [](const EntropyRulePolicy& p) {
                   if (p.window < 1) throw ConfigError("rule window must be >= 1");
                   if (p.trial_sweeps < 0) {
                     throw ConfigError("rule trial_sweeps must be >= 0");
                   }
                 },
                 [](const OraclePolicy& p) {
                   if (p.truth_k < 1) throw ConfigError("oracle truth_k must be >= 1");
                 },
             },
             policy);
}

std::string IncrementTrace::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "scenes_seen,k0,increment_prob,entropy,decision\n";
  for (const auto& r : records) {
    out << r.scenes_seen << ',' << r.k0 << ',' << r.increment_prob << ','
        << r.entropy << ',' << static_cast<int>(r.decision) << '\n';
  }
  return out.str();
}

bool rule_decide(const lda::LdaModel& model, const EntropyRulePolicy& policy,
                 std::span<const double> history, double rho) {
  const auto window = static_cast<std::size_t>(policy.window);
  if (window < 1 || history.size() < window) return false;
  const double first = history[history.size() - window];
  const double last = history.back();
  if (!(first > 0.0)) return false;
  if ((first - last) / first >= policy.threshold) return false;

  const double current = lda::system_entropy(model, rho);
  if (!(current > 0.0)) return false;
  lda::LdaModel trial = model;
  lda::add_context(trial);
  trial.sweeps(policy.trial_sweeps);
  return (current - lda::system_entropy(trial, rho)) / current > policy.threshold;
}

StreamResult run_stream(std::span<const lda::Scene> scenes, int vocab_size,
                        int initial_k0, const IncrementPolicy& policy,
                        const Schedule& schedule, std::uint64_t seed,
                        lda::Priors priors) {
  validate(policy);
  if (initial_k0 < 1) throw ConfigError("initial_k0 must be >= 1");
  if (schedule.cadence < 1) throw ConfigError("cadence must be >= 1");
  if (schedule.sweeps_per_scene < 0 || schedule.settle_sweeps < 0) {
    throw ConfigError("sweep counts must be >= 0");
  }
  if (schedule.max_k0 < initial_k0) throw ConfigError("max_k0 must be >= initial_k0");
  if (const auto* c = std::get_if<CinetPolicy>(&policy)) {
    check_cinet_fits(*c->model, vocab_size);
  }
  for (const auto& s : scenes) {
    for (int o : s.objects) {
      if (o < 0 || o >= vocab_size) {
        throw InputError("scene " + std::to_string(s.id) + ": object " +
                         std::to_string(o) + " outside vocabulary of size " +
                         std::to_string(vocab_size));
      }
    }
  }

  StreamResult result{lda::LdaModel::empty(vocab_size, initial_k0, priors, seed), {}};
  lda::LdaModel& model = result.model;
  std::vector<double> history;
  int seen = 0;
  for (const auto& scene : scenes) {
    lda::update_with_scene(model, scene, schedule.sweeps_per_scene);
    ++seen;
    if (seen % schedule.cadence != 0) continue;

    const double entropy_before = lda::system_entropy(model, schedule.rho);
    double prob = 0.0;
    bool fire = false;
    std::visit(Overloaded{
                   [&](const CinetPolicy& p) {
                     prob = cinet_probability(*p.model, model);
                     fire = prob >= p.threshold;
                   },
                   [&](const EntropyRulePolicy& p) {
                     fire = rule_decide(model, p, history, schedule.rho);
                     prob = fire ? 1.0 : 0.0;
                   },
                   [&](const OraclePolicy& p) {
                     fire = model.k0() < p.truth_k;
                     prob = fire ? 1.0 : 0.0;
                   },
               },
               policy);
    history.push_back(entropy_before);

    TraceRecord rec;
    rec.scenes_seen = seen;
    rec.increment_prob = prob;
    if (fire && model.k0() >= schedule.max_k0) {
      rec.decision = Decision::kCapped;
      result.trace.hit_cap = true;
    } else if (fire) {
      lda::add_context(model);
      model.sweeps(schedule.settle_sweeps);
      rec.decision = Decision::kIncrement;
    }
    rec.k0 = model.k0();
    rec.entropy = rec.decision == Decision::kIncrement
                      ? lda::system_entropy(model, schedule.rho)
                      : entropy_before;
    result.trace.records.push_back(rec);
  }
  return result;
}

namespace {

std::vector<SweepPoint> sweep(const lda::Corpus& corpus,
                              const rnn::RnnModel& cinet,
                              const SweepConfig& cfg, bool parallel) {
  if (cfg.k0_values.empty()) throw ConfigError("k0 range is empty");
  if (cfg.fits_per_k0 < 1) throw ConfigError("fits_per_k0 must be >= 1");
  for (int k0 : cfg.k0_values) {
    if (k0 < 1) throw ConfigError("k0 values must be >= 1");
  }
  if (corpus.scenes.empty()) throw InputError("cannot sweep an empty corpus");
  check_cinet_fits(cinet, corpus.vocab_size);

  const std::size_t per = static_cast<std::size_t>(cfg.fits_per_k0);
  std::vector<double> probs(cfg.k0_values.size() * per);
  const auto n = static_cast<std::ptrdiff_t>(probs.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const int k0 = cfg.k0_values[static_cast<std::size_t>(i) / per];
    const auto fit = static_cast<std::uint64_t>(static_cast<std::size_t>(i) % per);
    const std::uint64_t seed = derive_seed(cfg.seed, {std::uint64_t(k0), fit});
    const lda::LdaModel model =
        lda::gibbs_fit(corpus, k0, cfg.gibbs_iterations, seed, cfg.priors);
    probs[i] = cinet_probability(cinet, model);
  }

  std::vector<SweepPoint> curve;
  for (std::size_t j = 0; j < cfg.k0_values.size(); ++j) {
    double mean = 0.0;
    for (std::size_t f = 0; f < per; ++f) mean += probs[j * per + f];
    mean /= double(per);
    double var = 0.0;
    for (std::size_t f = 0; f < per; ++f) {
      const double d = probs[j * per + f] - mean;
      var += d * d;
    }
    curve.push_back({cfg.k0_values[j], mean, std::sqrt(var / double(per))});
  }
  return curve;
}

}  // namespace

std::vector<SweepPoint> sweep_increment(const lda::Corpus& corpus,
                                        const rnn::RnnModel& cinet,
                                        const SweepConfig& cfg) {
  return sweep(corpus, cinet, cfg, true);
}

std::vector<SweepPoint> sweep_increment_serial(const lda::Corpus& corpus,
                                               const rnn::RnnModel& cinet,
                                               const SweepConfig& cfg) {
  return sweep(corpus, cinet, cfg, false);
}

std::string sweep_to_csv(std::span<const SweepPoint> curve) {
  std::ostringstream out;
  out.precision(17);
  out << "k0,mean_prob,std_prob\n";
  for (const auto& p : curve) {
    out << p.k0 << ',' << p.mean_prob << ',' << p.std_prob << '\n';
  }
  return out.str();
}

}  // namespace cinet::incremental
