#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cinet/io.hpp"
#include "cinet/lda.hpp"

namespace cinet::dataset {

// One vector per context, in the fitter's context order.
using Sequence = std::vector<Eigen::VectorXd>;

enum class InputMode {
  kContextGivenObject,  // p(c_t | o_j) over objects j
  kObjectGivenContext,  // p(o_j | c_t) over objects j
  kConcat,              // object-given-context step followed by context-given-object step
};

std::string_view to_string(InputMode mode);
InputMode parse_input_mode(std::string_view text);
int input_dim(InputMode mode, int vocab_size);

Sequence encode_input(const lda::ProbView& view, InputMode mode);

enum class Split { kTrain, kValidation, kTest };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct PairMeta {
  int truth_k = 0;
  int k0 = 0;
  std::uint64_t corpus_seed = 0;
  std::uint64_t gibbs_seed = 0;

  auto operator<=>(const PairMeta&) const = default;
};

struct TrainingPair {
  Sequence x;
  int y = 0;
  PairMeta meta;
  Split split = Split::kTrain;
};

struct PairSet {
  InputMode mode = InputMode::kContextGivenObject;
  int vocab_size = 0;
  std::vector<TrainingPair> pairs;

  std::vector<const TrainingPair*> select(Split split) const;
};

struct PairConfig {
  int k_min = 1;
  int k_max = 6;
  int corpora_per_k = 4;
  // Gibbs seeds per positive (k0 < k) pair. Each k0 = k negative gets
  // max(1, k - 1) times as many so the classes balance.
  int seeds_per_positive = 4;
  int vocab_size = 100;
  int num_scenes = 30;
  lda::SceneLength scene_len = lda::SceneLength::fixed(20);
  lda::Priors priors;
  int gibbs_iterations = 200;
  InputMode mode = InputMode::kContextGivenObject;
  // Replicates per k routed to the test split, whole corpora at a time.
  int test_corpora_per_k = 1;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

// Builds the labeled set. Tasks run in parallel; output order is canonical
// (sorted by meta), so the result does not depend on the thread count.
PairSet build_pairs(const PairConfig& cfg);
// Single-threaded reference with the same output.
PairSet build_pairs_serial(const PairConfig& cfg);

// Seeds used for replicate `r` of ground-truth count k.
std::uint64_t corpus_seed(std::uint64_t base, int k, int replicate);

std::string pairs_to_jsonl(const PairSet& set);
PairSet pairs_from_jsonl(const std::string& text,
                         int expected_version = io::kFormatVersion);
void save_pairs(const PairSet& set, const std::filesystem::path& path);
PairSet load_pairs(const std::filesystem::path& path,
                   int expected_version = io::kFormatVersion);

}  // namespace cinet::dataset
