#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "misspec/solvers.hpp"

namespace misspec {

/// Bad configuration; the message names the file, line and field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `section.key -> value` view of an INI file, remembering where each
/// key came from and which keys were read.
class ConfigTable {
 public:
  static ConfigTable parse_file(const std::filesystem::path& path);
  static ConfigTable parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  void erase(const std::string& key);

  std::string text(const std::string& key, const std::string& fallback) const;
  std::string require_text(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  double require_number(const std::string& key) const;
  long integer(const std::string& key, long fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key) const;

  /// Throws on the first key that was never read.
  void reject_unused() const;

  /// "file:line: key" for diagnostics.
  std::string where(const std::string& key) const;
  const std::string& origin() const { return origin_; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  std::string origin_;
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  mutable std::map<std::string, bool> used_;
};

enum class ProblemKind { quadratic, edisp_cost, edisp_cost_nonsmooth, edisp_demand_vi, skew_vi };
enum class SchemeKind { joint_gradient, joint_subgradient, extragradient, tikhonov, sequential };

struct ExperimentConfig {
  std::string id;
  ProblemKind problem = ProblemKind::quadratic;
  SchemeKind scheme = SchemeKind::joint_gradient;
  long K = 1000;
  std::uint64_t seed = 1;
  std::filesystem::path output;
  bool emit_bounds = true;
  bool override_checks = false;
  /// Remaining keys; read while the instance and scheme are built.
  ConfigTable table;
};

/// Parse one experiment. The `[sweep]` section, if present, is left for
/// expand_sweep.
ExperimentConfig load_config(const ConfigTable& table);
ExperimentConfig load_config_file(const std::filesystem::path& path);

/// One config per point of the Cartesian product of the comma-separated
/// lists in `[sweep]`; without a sweep section, just the config itself.
std::vector<ExperimentConfig> expand_sweep(const ConfigTable& table);

struct RunSummary {
  std::string id;
  std::string problem;
  std::string scheme;
  long K = 0;
  long iterations = 0;
  bool ok = false;
  std::string error;
  std::optional<double> theta_err;
  std::optional<double> x_err;
  std::optional<double> f_gap;
  std::optional<double> avg_gap;
  std::optional<double> vi_gap;
  std::optional<double> bound;
  double wall_seconds = 0.0;
  std::filesystem::path trace_path;
};

struct RunResult {
  RunSummary summary;
  SolveTrace trace;
};

/// Build the instance, run the scheme, attach bounds and (if `output` is
/// set) write the trace CSV. Solver failures are reported in the summary;
/// a partial trace is still written on divergence.
RunResult run_experiment(const ExperimentConfig& config);

/// Runs are independent; up to `parallelism` execute at once. Summaries
/// come back in input order.
std::vector<RunSummary> run_sweep(const std::vector<ExperimentConfig>& configs, int parallelism);

/// Trace CSV: k, theta_err, x_err, f_gap, vi_gap, bound, gamma_f, gamma_g,
/// epsilon, avg_gap. Absent values are empty fields.
void write_trace_csv(const SolveTrace& trace, std::ostream& out);
void write_trace_csv(const SolveTrace& trace, const std::filesystem::path& path);

/// The scalar columns of a trace CSV, one row per record.
struct CsvRow {
  long k = 0;
  double theta_err = 0.0;
  std::optional<double> x_err;
  std::optional<double> f_gap;
  std::optional<double> vi_gap;
  std::optional<double> bound;
  double gamma_f = 0.0;
  double gamma_g = 0.0;
  std::optional<double> epsilon;
  std::optional<double> avg_gap;
};
std::vector<CsvRow> read_trace_csv(std::istream& in);
std::vector<CsvRow> read_trace_csv(const std::filesystem::path& path);

/// Deterministic table (no wall times) keyed by config id.
void write_summary_csv(const std::vector<RunSummary>& rows, std::ostream& out);

/// Single human-readable line for stdout.
std::string summary_line(const RunSummary& s);

std::string to_string(ProblemKind p);
std::string to_string(SchemeKind s);

}  // namespace misspec
