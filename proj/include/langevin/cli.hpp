#pragma once

#include <ostream>

namespace langevin {

// Exit codes of the command-line tool.
enum ExitCode : int { kExitPass = 0, kExitThreshold = 1, kExitConfig = 2 };

// Entry point of the `langevin` tool, separated from main() for testing.
//   langevin <subcommand> <config> [--seed N] [--out DIR]
// Writes <subcommand>_report.json (plus timeseries.tsv / histogram.tsv where
// relevant) under DIR.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace langevin
