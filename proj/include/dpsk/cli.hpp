#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpsk/errors.hpp"
#include "dpsk/matrix_io.hpp"
#include "json.hpp"

namespace dpsk {

enum class Command : std::uint8_t { lra, multiply, regress, verify, bench };

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitMechanism = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitVerification = 3;

struct RunConfig {
  Command command = Command::lra;
  double eps = 1.0;
  double delta = 0.01;
  double alpha = 0.5;
  double beta = 0.2;
  std::size_t rank = 5;
  std::size_t oversample = 0;  ///< 0 means rank + 1
  std::uint64_t seed = 0;
  std::string input;
  std::string input_b;
  MatrixFormat format = MatrixFormat::csv;
  bool oracle = false;
  std::string report;  ///< JSON report path; the report also goes to stdout
  std::string output;  ///< factor, product or solution file
  bool halve_budget = true;
  bool symmetric = false;
  double constant_c = 16.0;
  double matmult_constant = 8.0;
  double linreg_constant = 16.0;
  bool quick = false;
  std::size_t repeat = 3;
};

/// --help output; not an error, exits 0.
class HelpRequested : public Error {
 public:
  using Error::Error;
};

/// args excludes the program name. Throws UsageError for unknown flags,
/// missing required flags and parameter domain violations, HelpRequested for
/// --help.
RunConfig parse_args(const std::vector<std::string>& args);

/// Executes the command, writes the JSON report to out (and config.report),
/// diagnostics to err, and returns the exit code.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// parse_args + run with every error mapped to its exit code.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Report bodies, exposed for tests. Each returns the full JSON report.
nlohmann::json run_lra(const RunConfig& config);
nlohmann::json run_multiply(const RunConfig& config);
nlohmann::json run_regress(const RunConfig& config);
nlohmann::json run_verify(const RunConfig& config);
nlohmann::json run_bench(const RunConfig& config);

}  // namespace dpsk
