#pragma once

#include <filesystem>
#include <string>

#include "cinet/lda.hpp"

namespace cinet::io {

inline constexpr int kFormatVersion = 1;

// Writes `contents` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

// Corpus JSON-lines: optional {"vocab_size", "truth_k"} header, then one
// {"id", "objects"} scene per line. Without a header the vocabulary size is
// max object ID + 1.
std::string corpus_to_jsonl(const lda::Corpus& corpus);
lda::Corpus corpus_from_jsonl(const std::string& text);
void save_corpus(const lda::Corpus& corpus, const std::filesystem::path& path);
lda::Corpus load_corpus(const std::filesystem::path& path);

// LDA checkpoint. Besides the count tables it stores the token stream so a
// loaded model can keep sampling.
std::string model_to_json(const lda::LdaModel& model);
lda::LdaModel model_from_json(const std::string& text,
                              int expected_version = kFormatVersion);
void save_model(const lda::LdaModel& model, const std::filesystem::path& path);
lda::LdaModel load_model(const std::filesystem::path& path,
                         int expected_version = kFormatVersion);

}  // namespace cinet::io
