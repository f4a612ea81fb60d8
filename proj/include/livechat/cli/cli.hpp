#pragma once

#include <ostream>

namespace livechat::cli {

// Subcommands: synth, preprocess, build-vocab, pretrain, train, evaluate,
// stats, generate. Exit status 0 on success or help, 2 on an unknown
// subcommand or bad flag, 1 on any runtime or configuration failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace livechat::cli
