#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cinet/lda.hpp"

namespace cinet::cli {

// Entry point used by the `cinet` binary. Exit status: 0 on success, 1 for
// errors raised by the library, 2 for usage errors.
int dispatch(int argc, char** argv);

// Same as dispatch() with explicit arguments (argv[0] excluded) and streams.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Context-object co-occurrence counts of a fitted model as CSV: a
// `context,o0,...` header and one row per context. An empty corpus yields
// the header only.
std::string export_cooc(const lda::Corpus& corpus, const lda::LdaModel& model);

}  // namespace cinet::cli
