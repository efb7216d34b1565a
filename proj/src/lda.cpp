#include "cinet/lda.hpp"

#include <cmath>
#include <string>

#include "cinet/error.hpp"

namespace cinet::lda {

std::size_t Corpus::num_tokens() const {
  std::size_t n = 0;
  for (const auto& s : scenes) n += s.objects.size();
  return n;
}

namespace {

void check_priors(const Priors& p) {
  if (!(p.alpha > 0.0) || !(p.beta > 0.0)) {
    throw ConfigError("alpha and beta must be positive (alpha=" +
                      std::to_string(p.alpha) +
                      ", beta=" + std::to_string(p.beta) + ")");
  }
}

std::vector<double> to_cdf(const std::vector<double>& p) {
  std::vector<double> cdf(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    cdf[i] = acc;
  }
  return cdf;
}

}  // namespace

std::pair<Corpus, GroundTruth> sample_corpus(const SampleConfig& cfg) {
  check_priors(cfg.priors);
  if (cfg.k < 1) throw ConfigError("context count k must be >= 1");
  if (cfg.num_scenes < 1) throw ConfigError("num_scenes must be >= 1");
  if (cfg.vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
  if (!(cfg.scene_len.value > 0)) {
    throw ConfigError("scene length parameter must be positive");
  }

  Rng rng(cfg.seed);
  GroundTruth truth;
  truth.k = cfg.k;
  std::vector<std::vector<double>> phi_cdf;
  for (int c = 0; c < cfg.k; ++c) {
    truth.phi.push_back(sample_dirichlet(rng, cfg.vocab_size, cfg.priors.beta));
    phi_cdf.push_back(to_cdf(truth.phi.back()));
  }

  Corpus corpus;
  corpus.vocab_size = cfg.vocab_size;
  corpus.truth_k = cfg.k;
  std::poisson_distribution<int> poisson(
      cfg.scene_len.kind == SceneLength::Kind::kPoisson ? cfg.scene_len.value
                                                        : 1.0);
  for (int s = 0; s < cfg.num_scenes; ++s) {
    int n = static_cast<int>(cfg.scene_len.value);
    if (cfg.scene_len.kind == SceneLength::Kind::kPoisson) {
      do {
        n = poisson(rng);
      } while (n == 0);
    }
    std::vector<double> theta = sample_dirichlet(rng, cfg.k, cfg.priors.alpha);
    const std::vector<double> theta_cdf = to_cdf(theta);
    Scene scene;
    scene.id = s;
    std::vector<int> z(static_cast<std::size_t>(n));
    scene.objects.resize(z.size());
    for (int i = 0; i < n; ++i) {
      z[i] = cfg.k == 1 ? 0 : sample_from_cdf(theta_cdf, rng);
      scene.objects[i] = sample_from_cdf(phi_cdf[z[i]], rng);
    }
    corpus.scenes.push_back(std::move(scene));
    truth.theta.push_back(std::move(theta));
    truth.assignments.push_back(std::move(z));
  }
  return {std::move(corpus), std::move(truth)};
}

LdaModel LdaModel::empty(int vocab_size, int k0, Priors priors,
                         std::uint64_t seed) {
  check_priors(priors);
  if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
  if (k0 < 1) throw ConfigError("k0 must be >= 1");
  LdaModel m;
  m.vocab_size_ = vocab_size;
  m.k0_ = k0;
  m.priors_ = priors;
  m.seed_ = seed;
  m.n_co_.assign(k0, std::vector<int>(vocab_size, 0));
  m.n_c_.assign(k0, 0);
  return m;
}

LdaModel LdaModel::from_assignments(int vocab_size, int k0, Priors priors,
                                    std::vector<std::vector<int>> objects,
                                    std::vector<std::vector<int>> assignments,
                                    std::uint64_t seed, std::uint64_t ops) {
  LdaModel m = empty(vocab_size, k0, priors, seed);
  m.ops_ = ops;
  if (objects.size() != assignments.size()) {
    throw InputError("objects and assignments differ in scene count");
  }
  for (std::size_t s = 0; s < objects.size(); ++s) {
    if (objects[s].size() != assignments[s].size()) {
      throw InputError("scene " + std::to_string(s) +
                       ": objects and assignments differ in length");
    }
    std::vector<int> row(k0, 0);
    for (std::size_t i = 0; i < objects[s].size(); ++i) {
      const int o = objects[s][i];
      const int c = assignments[s][i];
      if (o < 0 || o >= vocab_size) {
        throw InputError("scene " + std::to_string(s) + ": object " +
                         std::to_string(o) + " outside vocabulary");
      }
      if (c < 0 || c >= k0) {
        throw InputError("scene " + std::to_string(s) + ": context " +
                         std::to_string(c) + " outside [0, k0)");
      }
      ++m.n_co_[c][o];
      ++m.n_c_[c];
      ++row[c];
    }
    m.total_tokens_ += static_cast<long long>(objects[s].size());
    m.n_sc_.push_back(std::move(row));
  }
  m.objects_ = std::move(objects);
  m.assignments_ = std::move(assignments);
  return m;
}

void LdaModel::append_scene(const std::vector<int>& objects) {
  for (int o : objects) {
    if (o < 0 || o >= vocab_size_) {
      throw InputError("object " + std::to_string(o) + " outside vocabulary");
    }
  }
  Rng rng = next_rng();
  std::uniform_int_distribution<int> pick(0, k0_ - 1);
  std::vector<int> z(objects.size());
  std::vector<int> row(k0_, 0);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    z[i] = pick(rng);
    ++n_co_[z[i]][objects[i]];
    ++n_c_[z[i]];
    ++row[z[i]];
  }
  total_tokens_ += static_cast<long long>(objects.size());
  objects_.push_back(objects);
  assignments_.push_back(std::move(z));
  n_sc_.push_back(std::move(row));
}

void LdaModel::sweep() {
  Rng rng = next_rng();
  const double alpha = priors_.alpha;
  const double beta = priors_.beta;
  const double vbeta = vocab_size_ * beta;
  std::vector<double> cdf(k0_);
  for (std::size_t s = 0; s < objects_.size(); ++s) {
    std::vector<int>& row = n_sc_[s];
    const std::vector<int>& objs = objects_[s];
    std::vector<int>& z = assignments_[s];
    for (std::size_t i = 0; i < objs.size(); ++i) {
      const int o = objs[i];
      int c = z[i];
      --n_co_[c][o];
      --n_c_[c];
      --row[c];
      double acc = 0.0;
      for (int t = 0; t < k0_; ++t) {
        acc += (n_co_[t][o] + beta) / (n_c_[t] + vbeta) * (row[t] + alpha);
        cdf[t] = acc;
      }
      c = sample_from_cdf(cdf, rng);
      z[i] = c;
      ++n_co_[c][o];
      ++n_c_[c];
      ++row[c];
    }
  }
}

void LdaModel::sweeps(int n) {
  for (int i = 0; i < n; ++i) sweep();
}

void LdaModel::add_context() {
  n_co_.emplace_back(vocab_size_, 0);
  n_c_.push_back(0);
  for (auto& row : n_sc_) row.push_back(0);
  ++k0_;
}

bool LdaModel::counts_consistent() const {
  std::vector<std::vector<int>> co(k0_, std::vector<int>(vocab_size_, 0));
  std::vector<int> c_tot(k0_, 0);
  if (objects_.size() != assignments_.size() ||
      n_sc_.size() != objects_.size()) {
    return false;
  }
  long long tokens = 0;
  for (std::size_t s = 0; s < objects_.size(); ++s) {
    if (objects_[s].size() != assignments_[s].size()) return false;
    std::vector<int> row(k0_, 0);
    for (std::size_t i = 0; i < objects_[s].size(); ++i) {
      const int c = assignments_[s][i];
      if (c < 0 || c >= k0_) return false;
      ++co[c][objects_[s][i]];
      ++c_tot[c];
      ++row[c];
    }
    if (row != n_sc_[s]) return false;
    tokens += static_cast<long long>(objects_[s].size());
  }
  return co == n_co_ && c_tot == n_c_ && tokens == total_tokens_;
}

LdaModel gibbs_fit(const Corpus& corpus, int k0, int iterations,
                   std::uint64_t seed, Priors priors) {
  if (corpus.scenes.empty()) throw InputError("cannot fit an empty corpus");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  LdaModel model = LdaModel::empty(corpus.vocab_size, k0, priors, seed);
  for (const Scene& s : corpus.scenes) model.append_scene(s.objects);
  model.sweeps(iterations);
  return model;
}

ProbView prob_view(const LdaModel& model) {
  const int k0 = model.k0();
  const int v = model.vocab_size();
  const int num_scenes = model.num_scenes();
  const double alpha = model.alpha();
  const double beta = model.beta();

  ProbView view;
  view.phi.resize(k0, v);
  for (int c = 0; c < k0; ++c) {
    const double denom = model.n_c(c) + v * beta;
    for (int o = 0; o < v; ++o) view.phi(c, o) = (model.n_co(c, o) + beta) / denom;
  }

  view.theta.resize(num_scenes, k0);
  for (int s = 0; s < num_scenes; ++s) {
    const double denom =
        static_cast<double>(model.objects()[s].size()) + k0 * alpha;
    for (int c = 0; c < k0; ++c) {
      view.theta(s, c) = (model.n_sc(s, c) + alpha) / denom;
    }
  }

  view.context_marginal.resize(k0);
  const double total = static_cast<double>(model.total_tokens());
  for (int c = 0; c < k0; ++c) {
    view.context_marginal(c) = total > 0 ? model.n_c(c) / total : 1.0 / k0;
  }

  view.c_given_o = Eigen::MatrixXd::Zero(v, k0);
  for (int o = 0; o < v; ++o) {
    int used = 0;
    for (int c = 0; c < k0; ++c) used += model.n_co(c, o);
    if (used == 0) continue;
    double norm = 0.0;
    for (int c = 0; c < k0; ++c) {
      view.c_given_o(o, c) = view.phi(c, o) * view.context_marginal(c);
      norm += view.c_given_o(o, c);
    }
    if (norm > 0.0) view.c_given_o.row(o) /= norm;
  }
  return view;
}

namespace {

double entropy_term(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

}  // namespace

double system_entropy(const ProbView& view, double rho) {
  if (rho < 0.0 || rho > 1.0) throw ConfigError("rho must lie in [0, 1]");
  double h_oc = 0.0;
  for (Eigen::Index c = 0; c < view.phi.rows(); ++c) {
    double row = 0.0;
    for (Eigen::Index o = 0; o < view.phi.cols(); ++o) {
      row += entropy_term(view.phi(c, o));
    }
    h_oc += view.context_marginal(c) * row;
  }
  double h_cs = 0.0;
  if (view.theta.rows() > 0) {
    for (Eigen::Index s = 0; s < view.theta.rows(); ++s) {
      for (Eigen::Index c = 0; c < view.theta.cols(); ++c) {
        h_cs += entropy_term(view.theta(s, c));
      }
    }
    h_cs /= static_cast<double>(view.theta.rows());
  }
  return rho * h_oc + (1.0 - rho) * h_cs;
}

double system_entropy(const LdaModel& model, double rho) {
  return system_entropy(prob_view(model), rho);
}

void update_with_scene(LdaModel& model, const Scene& scene, int sweeps) {
  if (scene.objects.empty()) return;
  for (int o : scene.objects) {
    if (o < 0 || o >= model.vocab_size()) {
      throw InputError("scene " + std::to_string(scene.id) + ": object " +
                       std::to_string(o) + " outside vocabulary of size " +
                       std::to_string(model.vocab_size()));
    }
  }
  model.append_scene(scene.objects);
  model.sweeps(sweeps);
}

void add_context(LdaModel& model) { model.add_context(); }

}  // namespace cinet::lda
