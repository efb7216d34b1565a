#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cinet/lda.hpp"
#include "cinet/rnn.hpp"

namespace cinet::incremental {

// Learned policy: increment when CINet's probability reaches `threshold`.
struct CinetPolicy {
  const rnn::RnnModel* model = nullptr;
  double threshold = 0.5;
};

// Hand-crafted baseline: increment once the entropy has plateaued and a
// trial extra context would lower it.
struct EntropyRulePolicy {
  double threshold = 0.02;  // relative entropy drop
  int window = 3;           // decision points looked back over
  int trial_sweeps = 50;
};

// Increments until the known ground-truth count is reached.
struct OraclePolicy {
  int truth_k = 1;
};

using IncrementPolicy = std::variant<CinetPolicy, EntropyRulePolicy, OraclePolicy>;

void validate(const IncrementPolicy& policy);

struct Schedule {
  int sweeps_per_scene = 50;
  int cadence = 5;  // decide after every `cadence` scenes
  int settle_sweeps = 50;
  int max_k0 = 64;
  double rho = lda::kDefaultRho;
};

enum class Decision { kKeep = 0, kIncrement = 1, kCapped = 2 };

struct TraceRecord {
  int scenes_seen = 0;
  int k0 = 0;  // after the decision was applied
  double increment_prob = 0.0;
  double entropy = 0.0;  // after the decision was applied
  Decision decision = Decision::kKeep;
};

struct IncrementTrace {
  std::vector<TraceRecord> records;
  bool hit_cap = false;

  // scenes_seen,k0,increment_prob,entropy,decision
  std::string to_csv() const;
};

struct StreamResult {
  lda::LdaModel model;
  IncrementTrace trace;
};

// Streams scenes into an initially empty model with `initial_k0` contexts,
// consulting the policy every `schedule.cadence` scenes. At most one context
// is added per decision point.
StreamResult run_stream(std::span<const lda::Scene> scenes, int vocab_size,
                        int initial_k0, const IncrementPolicy& policy,
                        const Schedule& schedule, std::uint64_t seed,
                        lda::Priors priors = {});

// Relative-drop rule. `history` holds entropies at previous decision points,
// most recent last. Too little history means no increment.
bool rule_decide(const lda::LdaModel& model, const EntropyRulePolicy& policy,
                 std::span<const double> history, double rho = lda::kDefaultRho);

struct SweepPoint {
  int k0 = 0;
  double mean_prob = 0.0;
  double std_prob = 0.0;  // population standard deviation over fits
};

struct SweepConfig {
  std::vector<int> k0_values;
  int fits_per_k0 = 5;
  int gibbs_iterations = 200;
  lda::Priors priors;
  std::uint64_t seed = 0;
};

// CINet probability as a function of the fitted context count. Fits run in
// parallel; each owns its seed.
std::vector<SweepPoint> sweep_increment(const lda::Corpus& corpus,
                                        const rnn::RnnModel& cinet,
                                        const SweepConfig& cfg);
std::vector<SweepPoint> sweep_increment_serial(const lda::Corpus& corpus,
                                               const rnn::RnnModel& cinet,
                                               const SweepConfig& cfg);

// k0,mean_prob,std_prob
std::string sweep_to_csv(std::span<const SweepPoint> curve);

}  // namespace cinet::incremental
