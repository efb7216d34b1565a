#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cinet/dataset.hpp"
#include "cinet/error.hpp"
#include "cinet/parallel.hpp"
#include "test_util.hpp"

using namespace cinet;
using namespace cinet::dataset;

namespace {

PairConfig small_config() {
  PairConfig cfg;
  cfg.k_min = 1;
  cfg.k_max = 3;
  cfg.corpora_per_k = 3;
  cfg.seeds_per_positive = 2;
  cfg.vocab_size = 15;
  cfg.num_scenes = 6;
  cfg.scene_len = lda::SceneLength::fixed(8);
  cfg.gibbs_iterations = 10;
  cfg.seed = 77;
  return cfg;
}

bool same_pairs(const PairSet& a, const PairSet& b) {
  if (a.pairs.size() != b.pairs.size() || a.mode != b.mode) return false;
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    const auto& p = a.pairs[i];
    const auto& q = b.pairs[i];
    if (p.y != q.y || p.split != q.split || p.meta != q.meta) return false;
    if (p.x.size() != q.x.size()) return false;
    for (std::size_t t = 0; t < p.x.size(); ++t) {
      if (p.x[t] != q.x[t]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("input modes parse and report their width") {
  for (auto m : {InputMode::kContextGivenObject, InputMode::kObjectGivenContext, InputMode::kConcat}) {
    CHECK(parse_input_mode(to_string(m)) == m);
  }
  CHECK(to_string(InputMode::kContextGivenObject) == "p_c");
  CHECK(input_dim(InputMode::kContextGivenObject, 100) == 100);
  CHECK(input_dim(InputMode::kObjectGivenContext, 100) == 100);
  CHECK(input_dim(InputMode::kConcat, 100) == 200);
  CHECK_THROWS_AS(parse_input_mode("both"), ConfigError);
  CHECK(parse_split(to_string(Split::kValidation)) == Split::kValidation);
}

TEST_CASE("encode_input lays out one step per context") {
  const lda::LdaModel model = lda::LdaModel::from_assignments(
      4, 3, {0.9, 0.01}, {{0, 1, 2, 3, 0}}, {{0, 1, 1, 2, 0}}, 0);
  const lda::ProbView view = lda::prob_view(model);

  const Sequence pc = encode_input(view, InputMode::kContextGivenObject);
  REQUIRE(pc.size() == 3);
  for (int t = 0; t < 3; ++t) {
    REQUIRE(pc[t].size() == 4);
    for (int o = 0; o < 4; ++o) CHECK(pc[t][o] == view.c_given_o(o, t));
  }
  // summing the steps gives 1 for every used object
  Eigen::VectorXd total = Eigen::VectorXd::Zero(4);
  for (const auto& step : pc) total += step;
  for (int o = 0; o < 4; ++o) CHECK(total[o] == doctest::Approx(1.0));

  const Sequence po = encode_input(view, InputMode::kObjectGivenContext);
  REQUIRE(po.size() == 3);
  for (int t = 0; t < 3; ++t) {
    CHECK(po[t].isApprox(view.phi.row(t).transpose()));
    CHECK(po[t].sum() == doctest::Approx(1.0));
  }

  const Sequence both = encode_input(view, InputMode::kConcat);
  REQUIRE(both.size() == 3);
  REQUIRE(both[1].size() == 8);
  CHECK(both[1].head(4) == po[1]);
  CHECK(both[1].tail(4) == pc[1]);
}

TEST_CASE("build_pairs labels and counts pairs by construction") {
  const PairConfig cfg = small_config();
  const PairSet set = build_pairs(cfg);
  CHECK(set.vocab_size == 15);
  std::map<std::pair<int, int>, int> per;  // (truth_k, k0) -> pairs
  for (const auto& p : set.pairs) {
    CHECK(p.y == (p.meta.k0 < p.meta.truth_k ? 1 : 0));
    CHECK(int(p.x.size()) == p.meta.k0);
    CHECK(p.meta.k0 <= p.meta.truth_k);
    CHECK(p.meta.k0 >= 1);
    ++per[{p.meta.truth_k, p.meta.k0}];
  }
  // negatives: max(1, k-1) * seeds_per_positive fits per corpus
  CHECK(per[{1, 1}] == 3 * 2);
  CHECK(per[{2, 2}] == 3 * 2);
  CHECK(per[{3, 3}] == 3 * 4);
  // positives: seeds_per_positive fits per (corpus, k0)
  CHECK(per[{2, 1}] == 3 * 2);
  CHECK(per[{3, 1}] == 3 * 2);
  CHECK(per[{3, 2}] == 3 * 2);
  CHECK(per.size() == 6);
}

TEST_CASE("build_pairs holds out whole corpora for test") {
  const PairSet set = build_pairs(small_config());
  std::set<std::uint64_t> train_corpora, test_corpora;
  int validation = 0;
  int train = 0;
  for (const auto& p : set.pairs) {
    if (p.split == Split::kTest) {
      test_corpora.insert(p.meta.corpus_seed);
    } else {
      train_corpora.insert(p.meta.corpus_seed);
      (p.split == Split::kValidation ? validation : train)++;
    }
  }
  for (auto s : test_corpora) CHECK(train_corpora.count(s) == 0);
  CHECK(test_corpora.size() == 3);  // one per k
  CHECK(train_corpora.size() == 6);
  const int non_test = validation + train;
  CHECK(validation == int(std::llround(0.1 * non_test)));
  CHECK(set.select(Split::kTest).size() + non_test == set.pairs.size());
}

TEST_CASE("build_pairs is deterministic and independent of thread count") {
  const PairConfig cfg = small_config();
  const PairSet serial = build_pairs_serial(cfg);
  const PairSet parallel = build_pairs(cfg);
  CHECK(same_pairs(serial, parallel));
  const int threads = max_threads();
  set_threads(3);
  CHECK(same_pairs(serial, build_pairs(cfg)));
  set_threads(threads);
  PairConfig other = cfg;
  other.seed = 78;
  CHECK_FALSE(same_pairs(serial, build_pairs(other)));
}

TEST_CASE("build_pairs rejects bad configurations") {
  PairConfig cfg = small_config();
  cfg.k_min = 0;
  CHECK_THROWS_AS(build_pairs(cfg), ConfigError);
  cfg = small_config();
  cfg.k_max = 0;
  CHECK_THROWS_AS(build_pairs(cfg), ConfigError);
  cfg = small_config();
  cfg.test_corpora_per_k = 4;
  CHECK_THROWS_AS(build_pairs(cfg), ConfigError);
  cfg = small_config();
  cfg.validation_fraction = 1.0;
  CHECK_THROWS_AS(build_pairs(cfg), ConfigError);
}

TEST_CASE("the concat mode doubles the step width") {
  PairConfig cfg = small_config();
  cfg.k_max = 2;
  cfg.mode = InputMode::kConcat;
  const PairSet set = build_pairs(cfg);
  CHECK(set.mode == InputMode::kConcat);
  for (const auto& p : set.pairs) {
    for (const auto& step : p.x) CHECK(step.size() == 30);
  }
}

TEST_CASE("pair JSON-lines round trip") {
  PairConfig cfg = small_config();
  cfg.k_max = 2;
  const PairSet set = build_pairs(cfg);
  const PairSet back = pairs_from_jsonl(pairs_to_jsonl(set));
  CHECK(back.vocab_size == set.vocab_size);
  CHECK(same_pairs(back, set));
}

TEST_CASE("pair JSON-lines errors name the line") {
  const std::string header = "{\"format_version\": 1, \"mode\": \"p_c\", \"vocab_size\": 2}\n";
  const std::string good =
      "{\"x\": [[0.5, 0.5]], \"y\": 0, \"meta\": {\"truth_k\": 1, \"k0\": 1, "
      "\"corpus_seed\": 1, \"gibbs_seed\": 2}, \"split\": \"train\"}\n";
  CHECK(pairs_from_jsonl(header + good).pairs.size() == 1);
  auto line_of = [](const std::string& text) {
    try {
      pairs_from_jsonl(text);
    } catch (const FormatError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(line_of(header + good + "{\"x\": [[0.5]], \"y\": 0}\n").find("line 3") != std::string::npos);
  CHECK(line_of(header + "not json\n").find("line 2") != std::string::npos);
  CHECK(line_of(good).find("line 1") != std::string::npos);
  CHECK_THROWS_AS(pairs_from_jsonl(header + good, 2), FormatError);
}

TEST_CASE("the desk-scale configuration is close to balanced") {
  PairConfig cfg;
  cfg.seed = 2024;
  cfg.gibbs_iterations = 5;  // labels do not depend on fit quality
  const PairSet set = build_pairs(cfg);
  int pos = 0;
  for (const auto& p : set.pairs) pos += p.y;
  const double ratio = double(pos) / double(set.pairs.size() - pos);
  CHECK(ratio >= 0.9);
  CHECK(ratio <= 1.1);
}

TEST_CASE("small label and shape cases") {
  const lda::LdaModel one = lda::LdaModel::from_assignments(5, 1, {}, {{0, 4}}, {{0, 0}}, 0);
  CHECK(encode_input(lda::prob_view(one), InputMode::kContextGivenObject).size() == 1);
  PairConfig cfg = small_config();
  cfg.k_min = 5;
  cfg.k_max = 5;
  cfg.corpora_per_k = 1;
  cfg.test_corpora_per_k = 0;
  cfg.seeds_per_positive = 1;
  for (const auto& p : build_pairs(cfg).pairs) {
    if (p.meta.k0 == 3) CHECK(p.y == 1);
    if (p.meta.k0 == 5) CHECK(p.y == 0);
  }
}

TEST_CASE("an empty pair set round trips") {
  PairSet empty;
  empty.mode = InputMode::kObjectGivenContext;
  empty.vocab_size = 7;
  const PairSet back = pairs_from_jsonl(pairs_to_jsonl(empty));
  CHECK(back.pairs.empty());
  CHECK(back.mode == InputMode::kObjectGivenContext);
  CHECK(back.vocab_size == 7);
}
