#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

/// Command-line front end: argument parsing plus the four report-producing
/// commands (pf, relax, bounds, chordal).  Split from main() so tests can
/// drive the exact production code paths in-process.
namespace opfr::cli {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;          ///< command completed
inline constexpr int kExitUsage = 1;       ///< bad flags, unreadable input
inline constexpr int kExitNoConverge = 2;  ///< numerical non-convergence
inline constexpr int kExitHypothesis = 3;  ///< network class not supported

/// Parsed command-line configuration.  `tol == 0` means "per-command
/// default" (the OPFRELAX_TOL environment variable overrides the default;
/// an explicit --tol overrides both).
struct RunConfig {
  std::string command;        ///< pf | relax | bounds | chordal
  std::string case_path;      ///< --case FILE
  std::string out_path;       ///< --out FILE (empty: report to stdout)
  std::string model = "bfm";  ///< --model bfm|bim
  std::string cost = "loss";  ///< --cost loss|gen
  std::string order;          ///< --order LIST|FILE (chordal only)
  double tol = 0.0;           ///< --tol X, resolved per command
  std::uint64_t seed = 7;     ///< --seed N (bounds Monte-Carlo)
  int instances = 100;        ///< --instances K (bounds Monte-Carlo)
  bool pretty = false;        ///< --pretty
};

/// Parse `args` (without the program name), run the selected command, and
/// write the JSON report to `out` (or the --out file) and diagnostics to
/// `err`.  Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace opfr::cli
