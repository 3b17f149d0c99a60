#pragma once

#include "corot/config.hpp"
#include "corot/output.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace corot {

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitSolver = 3 };

struct RunOptions {
  bool check = false;    // parse, validate, report sizes, do not solve
  bool verbose = false;  // echo the iteration log
  int threads = 0;       // element-level threads, 0 = runtime default
};

struct RunResult {
  int exit_code = kExitOk;
  std::string message;  // error text with step context, empty on success
  int num_tets = 0;
  int num_dofs = 0;
  int num_free = 0;
  std::vector<PathRow> path;
  std::vector<std::vector<double>> residuals;  // per step, every Newton iteration
  bool converged = false;                      // every requested step converged
};

/// Loads, validates and solves a configuration, writing path.csv, field
/// files, run.log and summary.json into the output directory. Never throws
/// library errors; they map onto the exit code.
RunResult run(const std::filesystem::path& config, const RunOptions& options, std::ostream& console);
RunResult run(const SolverConfig& config, const RunOptions& options, std::ostream& console);

}  // namespace corot
