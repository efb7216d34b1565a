#include "cinet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cinet/error.hpp"
#include "cinet/random.hpp"

namespace cinet::dataset {

using nlohmann::json;

std::string_view to_string(InputMode mode) {
  switch (mode) {
    case InputMode::kContextGivenObject:
      return "p_c";
    case InputMode::kObjectGivenContext:
      return "p_o";
    case InputMode::kConcat:
      return "concat";
  }
  return "?";
}

InputMode parse_input_mode(std::string_view text) {
  if (text == "p_c" || text == "pc" || text == "P_C") {
    return InputMode::kContextGivenObject;
  }
  if (text == "p_o" || text == "po" || text == "P_O") {
    return InputMode::kObjectGivenContext;
  }
  if (text == "concat" || text == "CONCAT") return InputMode::kConcat;
  throw ConfigError("unknown input mode '" + std::string(text) +
                    "' (expected p_c, p_o or concat)");
}

int input_dim(InputMode mode, int vocab_size) {
  return mode == InputMode::kConcat ? 2 * vocab_size : vocab_size;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "validation") return Split::kValidation;
  if (text == "test") return Split::kTest;
  throw FormatError("unknown split '" + std::string(text) + "'");
}

Sequence encode_input(const lda::ProbView& view, InputMode mode) {
  const Eigen::Index k0 = view.phi.rows();
  const Eigen::Index v = view.phi.cols();
  Sequence seq;
  seq.reserve(static_cast<std::size_t>(k0));
  for (Eigen::Index c = 0; c < k0; ++c) {
    switch (mode) {
      case InputMode::kContextGivenObject:
        seq.emplace_back(view.c_given_o.col(c));
        break;
      case InputMode::kObjectGivenContext:
        seq.emplace_back(view.phi.row(c).transpose());
        break;
      case InputMode::kConcat: {
        Eigen::VectorXd step(2 * v);
        step << view.phi.row(c).transpose(), view.c_given_o.col(c);
        seq.push_back(std::move(step));
        break;
      }
    }
  }
  return seq;
}

std::vector<const TrainingPair*> PairSet::select(Split split) const {
  std::vector<const TrainingPair*> out;
  for (const auto& p : pairs) {
    if (p.split == split) out.push_back(&p);
  }
  return out;
}

std::uint64_t corpus_seed(std::uint64_t base, int k, int replicate) {
  return derive_seed(base, {0xC0C0ULL, std::uint64_t(k), std::uint64_t(replicate)});
}

namespace {

void validate(const PairConfig& cfg) {
  if (cfg.k_min < 1) {
    throw ConfigError("k range must not contain 0 (k_min=" +
                      std::to_string(cfg.k_min) + ")");
  }
  if (cfg.k_max < cfg.k_min) throw ConfigError("k_max must be >= k_min");
  if (cfg.corpora_per_k < 1) throw ConfigError("corpora_per_k must be >= 1");
  if (cfg.seeds_per_positive < 1) {
    throw ConfigError("seeds_per_positive must be >= 1");
  }
  if (cfg.test_corpora_per_k < 0 || cfg.test_corpora_per_k > cfg.corpora_per_k) {
    throw ConfigError("test_corpora_per_k must lie in [0, corpora_per_k]");
  }
  if (cfg.validation_fraction < 0.0 || cfg.validation_fraction >= 1.0) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

struct Task {
  int k;
  int replicate;
  int k0;
  int seed_index;
};

PairSet build(const PairConfig& cfg, bool parallel) {
  validate(cfg);

  struct CorpusSlot {
    int k;
    int replicate;
    std::uint64_t seed;
    lda::Corpus corpus;
  };
  std::vector<CorpusSlot> corpora;
  for (int k = cfg.k_min; k <= cfg.k_max; ++k) {
    for (int r = 0; r < cfg.corpora_per_k; ++r) {
      corpora.push_back({k, r, corpus_seed(cfg.seed, k, r), {}});
    }
  }
  const auto n_corpora = static_cast<std::ptrdiff_t>(corpora.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t i = 0; i < n_corpora; ++i) {
    lda::SampleConfig sc;
    sc.k = corpora[i].k;
    sc.num_scenes = cfg.num_scenes;
    sc.vocab_size = cfg.vocab_size;
    sc.scene_len = cfg.scene_len;
    sc.priors = cfg.priors;
    sc.seed = corpora[i].seed;
    corpora[i].corpus = lda::sample_corpus(sc).first;
  }

  std::vector<Task> tasks;
  std::vector<std::size_t> task_corpus;
  for (std::size_t ci = 0; ci < corpora.size(); ++ci) {
    const int k = corpora[ci].k;
    for (int k0 = 1; k0 <= k; ++k0) {
      const int seeds = k0 < k ? cfg.seeds_per_positive
                               : std::max(1, k - 1) * cfg.seeds_per_positive;
      for (int g = 0; g < seeds; ++g) {
        tasks.push_back({k, corpora[ci].replicate, k0, g});
        task_corpus.push_back(ci);
      }
    }
  }

  PairSet set;
  set.mode = cfg.mode;
  set.vocab_size = cfg.vocab_size;
  set.pairs.resize(tasks.size());
  const auto n_tasks = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t i = 0; i < n_tasks; ++i) {
    const Task& t = tasks[i];
    const CorpusSlot& slot = corpora[task_corpus[i]];
    const std::uint64_t gibbs_seed =
        derive_seed(slot.seed, {std::uint64_t(t.k0), std::uint64_t(t.seed_index)});
    const lda::LdaModel model = lda::gibbs_fit(slot.corpus, t.k0,
                                               cfg.gibbs_iterations, gibbs_seed,
                                               cfg.priors);
    TrainingPair& pair = set.pairs[i];
    pair.x = encode_input(lda::prob_view(model), cfg.mode);
    pair.y = t.k0 < t.k ? 1 : 0;
    pair.meta = {t.k, t.k0, slot.seed, gibbs_seed};
    pair.split = t.replicate >= cfg.corpora_per_k - cfg.test_corpora_per_k
                     ? Split::kTest
                     : Split::kTrain;
  }

  std::stable_sort(set.pairs.begin(), set.pairs.end(),
                   [](const TrainingPair& a, const TrainingPair& b) {
                     return a.meta < b.meta;
                   });

  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    if (set.pairs[i].split == Split::kTrain) train_idx.push_back(i);
  }
  const auto n_val = static_cast<std::size_t>(
      std::llround(cfg.validation_fraction * double(train_idx.size())));
  Rng rng(derive_seed(cfg.seed, {0x5A11ULL}));
  std::shuffle(train_idx.begin(), train_idx.end(), rng);
  for (std::size_t i = 0; i < n_val; ++i) {
    set.pairs[train_idx[i]].split = Split::kValidation;
  }
  return set;
}

}  // namespace

PairSet build_pairs(const PairConfig& cfg) { return build(cfg, true); }

PairSet build_pairs_serial(const PairConfig& cfg) { return build(cfg, false); }

std::string pairs_to_jsonl(const PairSet& set) {
  std::string out;
  out += json{{"format_version", io::kFormatVersion},
              {"mode", std::string(to_string(set.mode))},
              {"vocab_size", set.vocab_size}}
             .dump();
  out += "\n";
  for (const auto& p : set.pairs) {
    json x = json::array();
    for (const auto& step : p.x) {
      x.push_back(std::vector<double>(step.data(), step.data() + step.size()));
    }
    json line = {{"x", std::move(x)},
                 {"y", p.y},
                 {"meta",
                  {{"truth_k", p.meta.truth_k},
                   {"k0", p.meta.k0},
                   {"corpus_seed", p.meta.corpus_seed},
                   {"gibbs_seed", p.meta.gibbs_seed}}},
                 {"split", std::string(to_string(p.split))}};
    out += line.dump();
    out += "\n";
  }
  return out;
}

PairSet pairs_from_jsonl(const std::string& text, int expected_version) {
  PairSet set;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_header = false;
  int dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        const int version = j.at("format_version").get<int>();
        if (version != expected_version) {
          throw FormatError("format_version " + std::to_string(version) +
                            ", expected " + std::to_string(expected_version));
        }
        set.mode = parse_input_mode(j.at("mode").get<std::string>());
        set.vocab_size = j.at("vocab_size").get<int>();
        dim = input_dim(set.mode, set.vocab_size);
        have_header = true;
        continue;
      }
      TrainingPair p;
      for (const auto& step : j.at("x")) {
        const auto v = step.get<std::vector<double>>();
        if (static_cast<int>(v.size()) != dim) {
          throw FormatError("step has " + std::to_string(v.size()) +
                            " entries, expected " + std::to_string(dim));
        }
        p.x.emplace_back(Eigen::Map<const Eigen::VectorXd>(
            v.data(), static_cast<Eigen::Index>(v.size())));
      }
      if (p.x.empty()) throw FormatError("empty sequence");
      p.y = j.at("y").get<int>();
      if (p.y != 0 && p.y != 1) throw FormatError("label must be 0 or 1");
      const json& m = j.at("meta");
      p.meta = {m.at("truth_k").get<int>(), m.at("k0").get<int>(),
                m.at("corpus_seed").get<std::uint64_t>(),
                m.at("gibbs_seed").get<std::uint64_t>()};
      p.split = parse_split(j.value("split", std::string("train")));
      set.pairs.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw FormatError("pair file line " + std::to_string(line_no) + ": " +
                        e.what());
    } catch (const Error& e) {
      throw FormatError("pair file line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  if (!have_header) throw FormatError("pair file line 1: missing header");
  return set;
}

void save_pairs(const PairSet& set, const std::filesystem::path& path) {
  io::write_atomic(path, pairs_to_jsonl(set));
}

PairSet load_pairs(const std::filesystem::path& path, int expected_version) {
  return pairs_from_jsonl(io::read_file(path), expected_version);
}

}  // namespace cinet::dataset
