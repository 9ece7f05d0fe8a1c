#pragma once

// Command-line entry point.
//
// Subcommands: ingest, gen-labels, evaluate, evolve, fit-cost, optimal-m,
// simulate, serve. Each writes a JSON report (with the resolved configuration)
// and, where there is a series, CSV files into the output directory
// (--out-dir, else $KGACC_OUTPUT_DIR, else ./kgacc_out), and prints a short
// summary to stdout.

#include <exception>
#include <iosfwd>

namespace kgacc::cli {

enum ExitCode : int {
  ok = 0,
  failure = 1,      // anything unclassified
  config = 2,       // invalid options or configuration
  parse = 3,        // malformed input files
  integrity = 4,    // checksum or archive version mismatch
  backend = 5,      // annotation backend failure or timeout
};

int exit_code_for(const std::exception& e) noexcept;

int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace kgacc::cli
