#include "cinet/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cinet/error.hpp"

namespace cinet::io {

using nlohmann::json;

void write_atomic(const std::filesystem::path& path,
                  const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << contents;
    if (!out.flush()) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename " + tmp.string() + " to " + path.string() +
                ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string corpus_to_jsonl(const lda::Corpus& corpus) {
  std::string out;
  json header = {{"vocab_size", corpus.vocab_size}, {"truth_k", nullptr}};
  if (corpus.truth_k) header["truth_k"] = *corpus.truth_k;
  out += header.dump() + "\n";
  for (const auto& s : corpus.scenes) {
    out += json{{"id", s.id}, {"objects", s.objects}}.dump() + "\n";
  }
  return out;
}

lda::Corpus corpus_from_jsonl(const std::string& text) {
  lda::Corpus corpus;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_header = false;
  int max_id = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      if (!j.is_object()) throw FormatError("not a JSON object");
      if (j.contains("vocab_size")) {
        if (line_no != 1 || have_header) {
          throw FormatError("header must be the first line");
        }
        have_header = true;
        corpus.vocab_size = j.at("vocab_size").get<int>();
        if (corpus.vocab_size < 1) throw FormatError("vocab_size must be >= 1");
        if (j.contains("truth_k") && !j["truth_k"].is_null()) {
          corpus.truth_k = j["truth_k"].get<int>();
        }
        continue;
      }
      lda::Scene scene;
      scene.id = j.at("id").get<int>();
      scene.objects = j.at("objects").get<std::vector<int>>();
      for (int o : scene.objects) {
        if (o < 0) throw FormatError("negative object ID");
        if (have_header && o >= corpus.vocab_size) {
          throw FormatError("object " + std::to_string(o) +
                            " outside vocabulary of size " +
                            std::to_string(corpus.vocab_size));
        }
        max_id = std::max(max_id, o);
      }
      corpus.scenes.push_back(std::move(scene));
    } catch (const json::exception& e) {
      throw FormatError("corpus line " + std::to_string(line_no) + ": " +
                        e.what());
    } catch (const FormatError& e) {
      throw FormatError("corpus line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  if (!have_header) corpus.vocab_size = std::max(1, max_id + 1);
  return corpus;
}

void save_corpus(const lda::Corpus& corpus, const std::filesystem::path& path) {
  write_atomic(path, corpus_to_jsonl(corpus));
}

lda::Corpus load_corpus(const std::filesystem::path& path) {
  return corpus_from_jsonl(read_file(path));
}

std::string model_to_json(const lda::LdaModel& model) {
  json j;
  j["format_version"] = kFormatVersion;
  j["k0"] = model.k0();
  j["alpha"] = model.alpha();
  j["beta"] = model.beta();
  j["vocab_size"] = model.vocab_size();
  j["n_co"] = model.n_co();
  j["n_sc"] = model.n_sc();
  j["assignments"] = model.assignments();
  j["objects"] = model.objects();
  j["seed"] = model.seed();
  j["ops"] = model.ops();
  return j.dump() + "\n";
}

lda::LdaModel model_from_json(const std::string& text, int expected_version) {
  try {
    const json j = json::parse(text);
    const int version = j.at("format_version").get<int>();
    if (version != expected_version) {
      throw FormatError("model checkpoint has format_version " +
                        std::to_string(version) + ", expected " +
                        std::to_string(expected_version));
    }
    lda::LdaModel model = lda::LdaModel::from_assignments(
        j.at("vocab_size").get<int>(), j.at("k0").get<int>(),
        {j.at("alpha").get<double>(), j.at("beta").get<double>()},
        j.at("objects").get<std::vector<std::vector<int>>>(),
        j.at("assignments").get<std::vector<std::vector<int>>>(),
        j.value("seed", std::uint64_t{0}), j.value("ops", std::uint64_t{0}));
    if (j.at("n_co").get<std::vector<std::vector<int>>>() != model.n_co() ||
        j.at("n_sc").get<std::vector<std::vector<int>>>() != model.n_sc()) {
      throw FormatError("count tables disagree with assignments");
    }
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model checkpoint: ") + e.what());
  } catch (const InputError& e) {
    throw FormatError(std::string("model checkpoint: ") + e.what());
  }
}

void save_model(const lda::LdaModel& model, const std::filesystem::path& path) {
  write_atomic(path, model_to_json(model));
}

lda::LdaModel load_model(const std::filesystem::path& path,
                         int expected_version) {
  return model_from_json(read_file(path), expected_version);
}

}  // namespace cinet::io
