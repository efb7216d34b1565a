#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cinet/random.hpp"

namespace cinet::lda {

// A scene is a bag of object IDs; order is kept so token assignments can be
// addressed by position.
struct Scene {
  int id = 0;
  std::vector<int> objects;
};

struct Corpus {
  int vocab_size = 0;
  std::vector<Scene> scenes;
  std::optional<int> truth_k;  // set only for synthetic corpora

  std::size_t num_tokens() const;
};

// Everything drawn while sampling a synthetic corpus.
struct GroundTruth {
  int k = 0;
  std::vector<std::vector<double>> phi;    // k x V
  std::vector<std::vector<double>> theta;  // one length-k vector per scene
  std::vector<std::vector<int>> assignments;
};

struct SceneLength {
  enum class Kind { kFixed, kPoisson };
  Kind kind = Kind::kFixed;
  double value = 100;  // n for kFixed, lambda for kPoisson

  static SceneLength fixed(int n) { return {Kind::kFixed, double(n)}; }
  static SceneLength poisson(double lambda) { return {Kind::kPoisson, lambda}; }
};

struct Priors {
  double alpha = 0.9;
  double beta = 0.01;

  bool operator==(const Priors&) const = default;
};

struct SampleConfig {
  int k = 1;
  int num_scenes = 1;
  int vocab_size = 1;
  SceneLength scene_len = SceneLength::fixed(100);
  Priors priors;
  std::uint64_t seed = 0;
};

// Draws a corpus from the LDA generative process. phi rows are drawn once
// per context from Dir(beta), theta once per scene from Dir(alpha).
std::pair<Corpus, GroundTruth> sample_corpus(const SampleConfig& cfg);

// Collapsed-Gibbs state for a fixed number of contexts. Owns the token
// stream so that incremental updates can resweep every token.
//
// Every mutating operation draws its randomness from a generator seeded by
// (seed, operation counter), so a model is a pure function of the sequence
// of calls made on it.
class LdaModel {
 public:
  // Model with no scenes.
  static LdaModel empty(int vocab_size, int k0, Priors priors,
                        std::uint64_t seed);
  // Model with explicit assignments; validates ranges.
  static LdaModel from_assignments(int vocab_size, int k0, Priors priors,
                                   std::vector<std::vector<int>> objects,
                                   std::vector<std::vector<int>> assignments,
                                   std::uint64_t seed, std::uint64_t ops = 0);

  int k0() const { return k0_; }
  int vocab_size() const { return vocab_size_; }
  int num_scenes() const { return static_cast<int>(objects_.size()); }
  double alpha() const { return priors_.alpha; }
  double beta() const { return priors_.beta; }
  const Priors& priors() const { return priors_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t ops() const { return ops_; }
  long long total_tokens() const { return total_tokens_; }

  int n_co(int c, int o) const { return n_co_[c][o]; }
  int n_sc(int s, int c) const { return n_sc_[s][c]; }
  int n_c(int c) const { return n_c_[c]; }
  const std::vector<std::vector<int>>& n_co() const { return n_co_; }
  const std::vector<std::vector<int>>& n_sc() const { return n_sc_; }
  const std::vector<int>& n_c() const { return n_c_; }
  const std::vector<std::vector<int>>& objects() const { return objects_; }
  const std::vector<std::vector<int>>& assignments() const {
    return assignments_;
  }

  // Appends a scene with uniformly random assignments (no sweep).
  void append_scene(const std::vector<int>& objects);
  // One collapsed-Gibbs pass over every token.
  void sweep();
  void sweeps(int n);
  // Adds an empty context; existing assignments are untouched.
  void add_context();

  // Full recount from assignments compared against the stored tables.
  bool counts_consistent() const;

  bool operator==(const LdaModel&) const = default;

 private:
  LdaModel() = default;
  Rng next_rng() { return Rng(derive_seed(seed_, {ops_++})); }

  int vocab_size_ = 0;
  int k0_ = 0;
  Priors priors_;
  std::uint64_t seed_ = 0;
  std::uint64_t ops_ = 0;
  long long total_tokens_ = 0;
  std::vector<std::vector<int>> objects_;
  std::vector<std::vector<int>> assignments_;
  std::vector<std::vector<int>> n_co_;  // k0 x V
  std::vector<std::vector<int>> n_sc_;  // S x k0
  std::vector<int> n_c_;
};

// Random initialization followed by `iterations` sweeps.
LdaModel gibbs_fit(const Corpus& corpus, int k0, int iterations,
                   std::uint64_t seed, Priors priors = {});

// Point estimates read off a model's count tables.
struct ProbView {
  Eigen::MatrixXd phi;               // k0 x V, p(o|c)
  Eigen::MatrixXd theta;             // S x k0, p(c|s)
  Eigen::VectorXd context_marginal;  // k0, p(c)
  Eigen::MatrixXd c_given_o;         // V x k0, p(c|o); zero rows for unused objects
};

ProbView prob_view(const LdaModel& model);

inline constexpr double kDefaultRho = 0.9;

// rho * H(o|c) + (1 - rho) * H(c|s), natural log, 0 ln 0 = 0.
double system_entropy(const ProbView& view, double rho = kDefaultRho);
double system_entropy(const LdaModel& model, double rho = kDefaultRho);

// Appends the scene, then warm-start sweeps over all tokens. Empty scenes
// leave the model untouched.
void update_with_scene(LdaModel& model, const Scene& scene, int sweeps);

void add_context(LdaModel& model);

}  // namespace cinet::lda
