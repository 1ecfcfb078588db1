#pragma once

#include "proxsplit/problems.hpp"
#include "proxsplit/solvers.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace proxsplit::cli {

enum ExitCode : int { kOk = 0, kInvalid = 2, kNonFinite = 3 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ErrorConfig {
  double c = 0.0;
  double p = 2.0;
  std::uint64_t seed = 0;
};

struct DeblurConfig {
  DeblurParams params;
  std::size_t size = 64;
  std::optional<std::string> image;
};

struct OutputConfig {
  std::string csv = "run.csv";
  std::optional<std::string> pgm;
  std::optional<std::string> metadata;
};

/// Everything `run` needs. Unset step fields fall back to the reference
/// initialisations for the chosen experiment.
struct RunConfig {
  std::string experiment = "heron1";
  Scheme algorithm = Scheme::dr1;
  std::optional<double> tau;
  std::optional<std::vector<double>> sigmas;
  std::optional<double> lambda;
  /// Index of the last logged iterate; iters + 1 steps are executed.
  std::optional<std::size_t> iters;
  std::size_t log_stride = 1;
  double residual_tol = 0.0;
  std::optional<std::vector<double>> x0;
  ErrorConfig errors;
  DeblurConfig deblur;
  nlohmann::json custom;  // problem description for experiment "custom"
  OutputConfig output;
  unsigned threads = 1;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

/// Parses a ProxFn description such as {"kind": "ball", "center": [0, 0], "radius": 1}.
ProxFn parse_proxfn(const nlohmann::json& j);

/// A ready-to-run problem assembled from a RunConfig.
struct Experiment {
  ProblemSpec problem;
  StepConfig steps;
  Vector x0;
  ErrorSchedule errors;
  std::function<double(const Vector&)> objective;
  std::optional<HeronSpec> heron;
  std::optional<DeblurSpec> deblur;
  std::size_t pad_rows = 0, pad_cols = 0;
  std::size_t orig_rows = 0, orig_cols = 0;
  std::string note;
};

/// Throws ConfigError on inconsistent settings; step budgets are not checked here.
Experiment build_experiment(const RunConfig& cfg);

/// Shortest decimal that reads back to the same double; '.' separator, no locale.
std::string format_number(double v);

/// CSV text for a run; deblur runs carry an isnr column instead of primal columns.
std::string format_csv(const Experiment& ex, const IterateLog& log);

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_norms(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Entry point shared by the executable and the tests.
int main_with_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace proxsplit::cli
