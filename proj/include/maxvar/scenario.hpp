#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace maxvar {

enum class ScenarioKind {
  FewN,
  Relax,
  EvolveCompare,
  ContinuumSweep,
  KeSweep,
  EnergyShiftSweep,
  Equilibration,
};

std::string to_string(ScenarioKind kind);

/// Declarative experiment description. Flat key=value text format; see
/// parse_config for the grammar and README for the documented key set.
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::FewN;

  // physical constants / cutoffs
  double hbar = 1.0, mass = 1.0;
  int dim = 1;
  double A = 1.0;
  double horizon = std::numeric_limits<double>::infinity();
  double epsilon_min = 0.0;

  // ensemble / sweep shape
  int n = 3;
  std::vector<int> n_list;
  std::vector<std::uint64_t> seeds;
  std::string density = "gaussian:0:1";
  std::string potential = "harmonic:1";
  std::string sampler = "iid";  // iid | stratified | systematic

  // dynamics
  double dt = 1e-3;
  long steps = 1000;
  double gamma = 1.0;
  double tol = 1e-8;

  // continuum / oracle
  double r_prime = 40.0;
  double p0 = 0.3;
  double interior_mass = 0.98;
  int grid_n = 1201;
  double box_halfwidth = 8.0;

  // reporting
  std::string out_dir;  // per-run directory; filled by run_scenario

  std::string canonical_text;  // normalized config text the hash covers
};

struct ConfigError {
  int line = 0;
  std::string key;
  std::string message;
};

struct ParseResult {
  bool ok = false;
  ScenarioConfig config;
  std::vector<ConfigError> errors;
};

/// Parse and validate a config. Grammar: one `key = value` per line, '#'
/// comments, blank lines ignored. Unknown keys, duplicate keys, type
/// mismatches and constraint violations are reported with line numbers.
ParseResult parse_config(const std::string& text);

struct MetricTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct AcceptanceFlag {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string note;  // "no-data" for vacuous flags
};

struct RunReport {
  std::string config_hash;
  std::string scenario;
  std::map<std::string, MetricTable> tables;
  std::vector<AcceptanceFlag> flags;
  double wall_ms = 0.0;
  long step_count = 0;

  bool all_pass() const;
};

std::uint64_t fnv1a64(const std::string& text);
std::string config_hash_hex(const ScenarioConfig& config);

/// Run a scenario; writes CSV/JSON artifacts plus the report under
/// <out_root>/run-<hash>/ and returns the report. `parallel` bounds the
/// worker count for sweep cells (<= 1 disables).
RunReport run_scenario(const ScenarioConfig& config, const std::string& out_root,
                       int parallel = 1);

enum class ReportFormat { Json, Csv, MarkdownSummary };

/// Deterministic serialization of a report into `dir`.
void emit_report(const RunReport& report, ReportFormat format, const std::string& dir);

/// Render the markdown summary (also written by emit_report).
std::string markdown_summary(const RunReport& report);

RunReport load_report_json(const std::string& path);

}  // namespace maxvar
