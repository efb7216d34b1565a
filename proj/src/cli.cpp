#include "cinet/cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cinet/dataset.hpp"
#include "cinet/error.hpp"
#include "cinet/incremental.hpp"
#include "cinet/io.hpp"
#include "cinet/parallel.hpp"
#include "cinet/rnn.hpp"

namespace cinet::cli {

namespace fs = std::filesystem;

std::string export_cooc(const lda::Corpus& corpus, const lda::LdaModel& model) {
  std::ostringstream out;
  out << "context";
  for (int o = 0; o < corpus.vocab_size; ++o) out << ",o" << o;
  out << '\n';
  if (corpus.num_tokens() == 0) return out.str();
  if (model.vocab_size() != corpus.vocab_size ||
      model.num_scenes() != static_cast<int>(corpus.scenes.size())) {
    throw InputError("model was not fitted on this corpus");
  }
  for (std::size_t s = 0; s < corpus.scenes.size(); ++s) {
    if (model.objects()[s] != corpus.scenes[s].objects) {
      throw InputError("model was not fitted on this corpus (scene " +
                       std::to_string(corpus.scenes[s].id) + " differs)");
    }
  }
  for (int c = 0; c < model.k0(); ++c) {
    out << c;
    for (int o = 0; o < model.vocab_size(); ++o) out << ',' << model.n_co(c, o);
    out << '\n';
  }
  return out.str();
}

namespace {

struct Globals {
  int threads = 0;
  int format_version = io::kFormatVersion;
};

struct GenCorpusArgs {
  int k = 0;
  int scenes = 0;
  int vocab = 0;
  int scene_len = 100;
  double poisson_lambda = 0.0;
  double alpha = 0.9;
  double beta = 0.01;
  std::uint64_t seed = 0;
  std::string out;
};

struct FitArgs {
  std::string corpus;
  int k0 = 1;
  int iterations = 200;
  double alpha = 0.9;
  double beta = 0.01;
  std::uint64_t seed = 0;
  std::string out;
};

struct PairArgs {
  dataset::PairConfig cfg;
  int scene_len = 20;
  std::string mode = "p_c";
  std::string out;
};

struct TrainArgs {
  std::string pairs;
  std::string cell = "lstm";
  rnn::RnnConfig cfg;
  std::string early_stop_on = "validation";
  std::string out;
  std::string metrics;
};

struct EvalArgs {
  std::string model;
  std::string pairs;
  std::string split = "test";
  std::string out;
};

struct SweepArgs {
  std::string corpus;
  std::string model;
  int k0_min = 1;
  int k0_max = 1;
  incremental::SweepConfig cfg;
  std::string out;
};

struct StreamArgs {
  std::string corpus;
  std::string policy = "cinet";
  std::string model;
  int truth_k = 0;
  int initial_k0 = 1;
  incremental::Schedule schedule;
  double threshold = 0.5;
  incremental::EntropyRulePolicy rule;
  double alpha = 0.9;
  double beta = 0.01;
  std::uint64_t seed = 0;
  std::string out;
  std::string model_out;
};

struct CoocArgs {
  std::string corpus;
  std::string model;
  int k0 = 0;
  int iterations = 200;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string out;
};

struct ReplicateArgs {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string modes = "p_c,p_o,concat";
  int max_epochs = 200;
  int downstream_corpora_per_k = 4;
};

void write_text(const std::string& path, const std::string& text) {
  io::write_atomic(path, text);
}

int cmd_gen_corpus(const GenCorpusArgs& a, std::ostream& out) {
  lda::SampleConfig sc;
  sc.k = a.k;
  sc.num_scenes = a.scenes;
  sc.vocab_size = a.vocab;
  sc.scene_len = a.poisson_lambda > 0.0 ? lda::SceneLength::poisson(a.poisson_lambda)
                                        : lda::SceneLength::fixed(a.scene_len);
  sc.priors = {a.alpha, a.beta};
  sc.seed = a.seed;
  if (a.scene_len < 1) throw ConfigError("--scene-len must be >= 1");
  const auto [corpus, truth] = lda::sample_corpus(sc);
  io::save_corpus(corpus, a.out);
  out << "wrote " << corpus.scenes.size() << " scenes (" << corpus.num_tokens()
      << " objects) to " << a.out << "\n";
  return 0;
}

int cmd_fit(const FitArgs& a, const Globals& g, std::ostream& out) {
  const lda::Corpus corpus = io::load_corpus(a.corpus);
  const lda::LdaModel model =
      lda::gibbs_fit(corpus, a.k0, a.iterations, a.seed, {a.alpha, a.beta});
  io::save_model(model, a.out);
  (void)g;
  out << "k0 " << model.k0() << " entropy " << lda::system_entropy(model)
      << "\n";
  return 0;
}

int cmd_build_pairs(PairArgs a, std::ostream& out) {
  a.cfg.scene_len = lda::SceneLength::fixed(a.scene_len);
  a.cfg.mode = dataset::parse_input_mode(a.mode);
  const dataset::PairSet set = dataset::build_pairs(a.cfg);
  dataset::save_pairs(set, a.out);
  int pos = 0;
  for (const auto& p : set.pairs) pos += p.y;
  out << "pairs " << set.pairs.size() << " positive " << pos << " negative "
      << set.pairs.size() - pos << " train "
      << set.select(dataset::Split::kTrain).size() << " validation "
      << set.select(dataset::Split::kValidation).size() << " test "
      << set.select(dataset::Split::kTest).size() << "\n";
  return 0;
}

int cmd_train(TrainArgs a, const Globals& g, std::ostream& out) {
  const dataset::PairSet set = dataset::load_pairs(a.pairs, g.format_version);
  a.cfg.cell = rnn::parse_cell(a.cell);
  a.cfg.input_dim = dataset::input_dim(set.mode, set.vocab_size);
  if (a.early_stop_on != "validation" && a.early_stop_on != "test") {
    throw ConfigError("--early-stop-on must be validation or test");
  }
  a.cfg.early_stop_on_test = a.early_stop_on == "test";
  const rnn::TrainResult res = rnn::train(set, a.cfg);
  rnn::save_model(res.model, a.out);
  if (!a.metrics.empty()) write_text(a.metrics, res.history.to_csv());
  const auto& best = res.history.records[res.history.best_epoch - 1];
  out << "best epoch " << best.epoch << " train_acc " << best.train_acc
      << " val_acc " << best.val_acc << " (stopped at epoch "
      << res.history.stopping_epoch << ")\n";
  return 0;
}

int cmd_eval(const EvalArgs& a, const Globals& g, std::ostream& out) {
  const rnn::RnnModel model = rnn::load_model(a.model, g.format_version);
  const dataset::PairSet set = dataset::load_pairs(a.pairs, g.format_version);
  std::vector<const dataset::TrainingPair*> chosen;
  if (a.split == "all") {
    for (const auto& p : set.pairs) chosen.push_back(&p);
  } else {
    chosen = set.select(dataset::parse_split(a.split));
  }
  const int dim = dataset::input_dim(set.mode, set.vocab_size);
  if (dim != model.config().input_dim) {
    throw ShapeError("pair file has input dimension " + std::to_string(dim) +
                     " but the model expects " +
                     std::to_string(model.config().input_dim));
  }
  const rnn::EvalResult res = rnn::evaluate(model, chosen);
  if (!a.out.empty()) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "truth_k,k0,y,prob\n";
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      csv << chosen[i]->meta.truth_k << ',' << chosen[i]->meta.k0 << ','
          << chosen[i]->y << ',' << res.probabilities[i] << '\n';
    }
    write_text(a.out, csv.str());
  }
  out << "accuracy " << res.accuracy << " over " << chosen.size() << " pairs\n";
  return 0;
}

int cmd_sweep(SweepArgs a, const Globals& g, std::ostream& out) {
  const lda::Corpus corpus = io::load_corpus(a.corpus);
  const rnn::RnnModel model = rnn::load_model(a.model, g.format_version);
  if (a.k0_max < a.k0_min) throw ConfigError("--k0-max must be >= --k0-min");
  for (int k0 = a.k0_min; k0 <= a.k0_max; ++k0) a.cfg.k0_values.push_back(k0);
  const auto curve = incremental::sweep_increment(corpus, model, a.cfg);
  const std::string csv = incremental::sweep_to_csv(curve);
  write_text(a.out, csv);
  out << csv;
  return 0;
}

int cmd_stream(const StreamArgs& a, const Globals& g, std::ostream& out) {
  const lda::Corpus corpus = io::load_corpus(a.corpus);
  std::optional<rnn::RnnModel> cinet;
  incremental::IncrementPolicy policy;
  if (a.policy == "cinet") {
    if (a.model.empty()) throw ConfigError("--policy cinet needs --model");
    cinet = rnn::load_model(a.model, g.format_version);
    policy = incremental::CinetPolicy{&*cinet, a.threshold};
  } else if (a.policy == "rule") {
    policy = a.rule;
  } else if (a.policy == "oracle") {
    int k = a.truth_k;
    if (k == 0 && corpus.truth_k) k = *corpus.truth_k;
    if (k < 1) throw ConfigError("--policy oracle needs --truth-k or a corpus with truth_k");
    policy = incremental::OraclePolicy{k};
  } else {
    throw ConfigError("--policy must be cinet, rule or oracle");
  }
  const auto res = incremental::run_stream(corpus.scenes, corpus.vocab_size,
                                           a.initial_k0, policy, a.schedule,
                                           a.seed, {a.alpha, a.beta});
  write_text(a.out, res.trace.to_csv());
  if (!a.model_out.empty()) io::save_model(res.model, a.model_out);
  out << "final k0 " << res.model.k0() << " entropy "
      << lda::system_entropy(res.model, a.schedule.rho)
      << (res.trace.hit_cap ? " (hit max-k0 cap)" : "") << "\n";
  return 0;
}

int cmd_cooc(const CoocArgs& a, const Globals& g, std::ostream& out) {
  const lda::Corpus corpus = io::load_corpus(a.corpus);
  std::string csv;
  if (corpus.num_tokens() == 0) {
    csv = export_cooc(corpus, lda::LdaModel::empty(corpus.vocab_size, 1, {}, 0));
  } else if (!a.model.empty()) {
    csv = export_cooc(corpus, io::load_model(a.model, g.format_version));
  } else {
    if (a.k0 < 1 || !a.has_seed) {
      throw ConfigError("export-cooc needs --model, or --k0 and --seed to fit one");
    }
    csv = export_cooc(corpus, lda::gibbs_fit(corpus, a.k0, a.iterations, a.seed));
  }
  write_text(a.out, csv);
  out << "wrote " << a.out << "\n";
  return 0;
}

// Desk-scale pipeline: pairs -> CINet -> sweeps -> streams.
int cmd_replicate(const ReplicateArgs& a, std::ostream& out) {
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::stringstream modes(a.modes);
  std::string mode_name;
  std::optional<rnn::RnnModel> cinet;
  std::ostringstream summary;
  summary << "mode,test_accuracy\n";
  while (std::getline(modes, mode_name, ',')) {
    dataset::PairConfig pc;
    pc.mode = dataset::parse_input_mode(mode_name);
    pc.seed = a.seed;
    const dataset::PairSet set = dataset::build_pairs(pc);
    const std::string tag(dataset::to_string(pc.mode));
    dataset::save_pairs(set, dir / ("pairs_" + tag + ".jsonl"));
    rnn::RnnConfig rc;
    rc.layers = 2;
    rc.input_dim = dataset::input_dim(pc.mode, pc.vocab_size);
    rc.seed = derive_seed(a.seed, {0xC1ULL});
    rc.max_epochs = a.max_epochs;
    rc.early_stop_patience = 20;
    const rnn::TrainResult res = rnn::train(set, rc);
    rnn::save_model(res.model, dir / ("cinet_" + tag + ".json"));
    write_text(dir / ("metrics_" + tag + ".csv"), res.history.to_csv());
    const double acc =
        rnn::evaluate(res.model, set.select(dataset::Split::kTest)).accuracy;
    summary << tag << ',' << acc << '\n';
    out << tag << " test accuracy " << acc << "\n";
    if (pc.mode == dataset::InputMode::kContextGivenObject) cinet = res.model;
  }
  write_text(dir / "accuracy.csv", summary.str());
  if (!cinet) return 0;

  for (int k : {5, 9}) {
    lda::SampleConfig sc;
    sc.k = k;
    sc.num_scenes = 30;
    sc.vocab_size = 100;
    sc.scene_len = lda::SceneLength::fixed(20);
    sc.seed = derive_seed(a.seed, {0x4E1DULL, std::uint64_t(k)});
    const lda::Corpus corpus = lda::sample_corpus(sc).first;
    io::save_corpus(corpus, dir / ("corpus_k" + std::to_string(k) + ".jsonl"));
    incremental::SweepConfig sw;
    for (int k0 = 1; k0 <= k + 2; ++k0) sw.k0_values.push_back(k0);
    sw.seed = derive_seed(a.seed, {0x5EEFULL, std::uint64_t(k)});
    write_text(dir / ("sweep_k" + std::to_string(k) + ".csv"),
               incremental::sweep_to_csv(
                   incremental::sweep_increment(corpus, *cinet, sw)));
    if (k != 5) continue;
    const incremental::Schedule schedule;
    const std::pair<const char*, incremental::IncrementPolicy> policies[] = {
        {"cinet", incremental::CinetPolicy{&*cinet, 0.5}},
        {"rule", incremental::EntropyRulePolicy{}},
        {"oracle", incremental::OraclePolicy{k}},
    };
    for (const auto& [name, policy] : policies) {
      const auto res = incremental::run_stream(corpus.scenes, corpus.vocab_size,
                                               1, policy, schedule,
                                               derive_seed(a.seed, {0x57EAULL}));
      write_text(dir / (std::string("trace_") + name + ".csv"), res.trace.to_csv());
      io::save_model(res.model, dir / (std::string("lda_") + name + ".json"));
      out << name << " stream: final k0 " << res.model.k0() << "\n";
    }
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Learning when to add a context to an incremental LDA scene model"};
  app.name("cinet");
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Cap on worker threads (0 = default)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--format-version", g.format_version,
                 "Format version every loaded file must carry");

  GenCorpusArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Sample a synthetic corpus");
  gen_cmd->add_option("--k", gen.k, "Ground-truth context count")->required();
  gen_cmd->add_option("--scenes", gen.scenes, "Number of scenes")->required();
  gen_cmd->add_option("--vocab", gen.vocab, "Vocabulary size")->required();
  gen_cmd->add_option("--scene-len", gen.scene_len, "Objects per scene");
  gen_cmd->add_option("--poisson-lambda", gen.poisson_lambda,
                      "Draw scene lengths from Poisson(lambda) instead");
  gen_cmd->add_option("--alpha", gen.alpha);
  gen_cmd->add_option("--beta", gen.beta);
  gen_cmd->add_option("--seed", gen.seed)->required();
  gen_cmd->add_option("--out", gen.out)->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit-lda", "Fit an LDA model by collapsed Gibbs sampling");
  fit_cmd->add_option("--corpus", fit.corpus)->required();
  fit_cmd->add_option("--k0", fit.k0)->required();
  fit_cmd->add_option("--iterations", fit.iterations);
  fit_cmd->add_option("--alpha", fit.alpha);
  fit_cmd->add_option("--beta", fit.beta);
  fit_cmd->add_option("--seed", fit.seed)->required();
  fit_cmd->add_option("--out", fit.out)->required();

  PairArgs pairs;
  auto* pairs_cmd = app.add_subcommand("build-pairs", "Build the labeled (x, y) pair set");
  pairs_cmd->add_option("--k-min", pairs.cfg.k_min);
  pairs_cmd->add_option("--k-max", pairs.cfg.k_max);
  pairs_cmd->add_option("--corpora-per-k", pairs.cfg.corpora_per_k);
  pairs_cmd->add_option("--seeds-per-positive", pairs.cfg.seeds_per_positive);
  pairs_cmd->add_option("--vocab", pairs.cfg.vocab_size);
  pairs_cmd->add_option("--scenes", pairs.cfg.num_scenes);
  pairs_cmd->add_option("--scene-len", pairs.scene_len);
  pairs_cmd->add_option("--alpha", pairs.cfg.priors.alpha);
  pairs_cmd->add_option("--beta", pairs.cfg.priors.beta);
  pairs_cmd->add_option("--iterations", pairs.cfg.gibbs_iterations);
  pairs_cmd->add_option("--mode", pairs.mode, "p_c, p_o or concat");
  pairs_cmd->add_option("--test-corpora-per-k", pairs.cfg.test_corpora_per_k);
  pairs_cmd->add_option("--val-fraction", pairs.cfg.validation_fraction);
  pairs_cmd->add_option("--seed", pairs.cfg.seed)->required();
  pairs_cmd->add_option("--out", pairs.out)->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train-cinet", "Train the increment classifier");
  train_cmd->add_option("--pairs", tr.pairs)->required();
  train_cmd->add_option("--cell", tr.cell, "vanilla, gru or lstm");
  train_cmd->add_option("--layers", tr.cfg.layers);
  train_cmd->add_option("--hidden", tr.cfg.hidden);
  train_cmd->add_option("--lr", tr.cfg.learning_rate);
  train_cmd->add_option("--l2", tr.cfg.l2_lambda);
  train_cmd->add_option("--batch", tr.cfg.batch_size);
  train_cmd->add_option("--patience", tr.cfg.early_stop_patience);
  train_cmd->add_option("--max-epochs", tr.cfg.max_epochs);
  train_cmd->add_option("--early-stop-on", tr.early_stop_on, "validation or test");
  train_cmd->add_option("--seed", tr.cfg.seed)->required();
  train_cmd->add_option("--out", tr.out)->required();
  train_cmd->add_option("--metrics", tr.metrics, "Per-epoch metrics CSV");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval-cinet", "Accuracy of a trained classifier");
  eval_cmd->add_option("--model", ev.model)->required();
  eval_cmd->add_option("--pairs", ev.pairs)->required();
  eval_cmd->add_option("--split", ev.split, "train, validation, test or all");
  eval_cmd->add_option("--out", ev.out, "Per-pair probabilities CSV");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Increment probability versus k0");
  sweep_cmd->add_option("--corpus", sw.corpus)->required();
  sweep_cmd->add_option("--model", sw.model)->required();
  sweep_cmd->add_option("--k0-min", sw.k0_min);
  sweep_cmd->add_option("--k0-max", sw.k0_max)->required();
  sweep_cmd->add_option("--fits", sw.cfg.fits_per_k0);
  sweep_cmd->add_option("--iterations", sw.cfg.gibbs_iterations);
  sweep_cmd->add_option("--alpha", sw.cfg.priors.alpha);
  sweep_cmd->add_option("--beta", sw.cfg.priors.beta);
  sweep_cmd->add_option("--seed", sw.cfg.seed)->required();
  sweep_cmd->add_option("--out", sw.out)->required();

  StreamArgs st;
  auto* stream_cmd = app.add_subcommand("run-stream", "Incremental context modeling over a scene stream");
  stream_cmd->add_option("--corpus", st.corpus)->required();
  stream_cmd->add_option("--policy", st.policy, "cinet, rule or oracle");
  stream_cmd->add_option("--model", st.model, "CINet checkpoint (cinet policy)");
  stream_cmd->add_option("--truth-k", st.truth_k, "Oracle target (default: corpus header)");
  stream_cmd->add_option("--initial-k0", st.initial_k0);
  stream_cmd->add_option("--sweeps-per-scene", st.schedule.sweeps_per_scene);
  stream_cmd->add_option("--cadence", st.schedule.cadence);
  stream_cmd->add_option("--settle-sweeps", st.schedule.settle_sweeps);
  stream_cmd->add_option("--max-k0", st.schedule.max_k0);
  stream_cmd->add_option("--rho", st.schedule.rho);
  stream_cmd->add_option("--threshold", st.threshold, "CINet decision threshold");
  stream_cmd->add_option("--rule-threshold", st.rule.threshold);
  stream_cmd->add_option("--window", st.rule.window);
  stream_cmd->add_option("--trial-sweeps", st.rule.trial_sweeps);
  stream_cmd->add_option("--alpha", st.alpha);
  stream_cmd->add_option("--beta", st.beta);
  stream_cmd->add_option("--seed", st.seed)->required();
  stream_cmd->add_option("--out", st.out)->required();
  stream_cmd->add_option("--model-out", st.model_out, "Final LDA checkpoint");

  CoocArgs co;
  auto* cooc_cmd = app.add_subcommand("export-cooc", "Context-object co-occurrence counts");
  cooc_cmd->add_option("--corpus", co.corpus)->required();
  cooc_cmd->add_option("--model", co.model, "LDA checkpoint fitted on the corpus");
  cooc_cmd->add_option("--k0", co.k0, "Fit a model with this many contexts instead");
  cooc_cmd->add_option("--iterations", co.iterations);
  auto* cooc_seed = cooc_cmd->add_option("--seed", co.seed);
  cooc_cmd->add_option("--out", co.out)->required();

  ReplicateArgs rep;
  auto* rep_cmd = app.add_subcommand("replicate-paper", "Run the desk-scale pipeline end to end");
  rep_cmd->add_option("--out-dir", rep.out_dir)->required();
  rep_cmd->add_option("--modes", rep.modes, "Comma-separated input modes to train");
  rep_cmd->add_option("--max-epochs", rep.max_epochs);
  rep_cmd->add_option("--seed", rep.seed)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  set_threads(g.threads);
  try {
    if (gen_cmd->parsed()) return cmd_gen_corpus(gen, out);
    if (fit_cmd->parsed()) return cmd_fit(fit, g, out);
    if (pairs_cmd->parsed()) return cmd_build_pairs(pairs, out);
    if (train_cmd->parsed()) return cmd_train(tr, g, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, g, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sw, g, out);
    if (stream_cmd->parsed()) return cmd_stream(st, g, out);
    if (cooc_cmd->parsed()) {
      co.has_seed = cooc_seed->count() > 0;
      return cmd_cooc(co, g, out);
    }
    if (rep_cmd->parsed()) return cmd_replicate(rep, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace cinet::cli
