// maxvar: scenario runner for ensemble-variety simulations.
//
// Subcommands:
//   run <config>       parse, execute, write artifacts, exit 1 on failed flags
//   validate <config>  parse only; print key-level errors
//   report <run-dir>   re-emit a stored report (--format=json|csv|markdown-summary)
//   sweep <config>     like run, with --parallel=<k> workers over sweep cells
//
// Output root: --out-root, else $MAXVAR_OUT_ROOT, else ./runs.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "maxvar/scenario.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve_out_root(const std::string& cli_value) {
  if (!cli_value.empty()) return cli_value;
  if (const char* env = std::getenv("MAXVAR_OUT_ROOT")) return env;
  return "runs";
}

int print_errors(const maxvar::ParseResult& parsed) {
  for (const auto& e : parsed.errors) {
    std::cerr << "config error";
    if (e.line > 0) std::cerr << " (line " << e.line << ")";
    if (!e.key.empty()) std::cerr << " [" << e.key << "]";
    std::cerr << ": " << e.message << "\n";
  }
  return 2;
}

int run_config(const std::string& path, const std::string& out_root, int parallel) {
  const auto parsed = maxvar::parse_config(read_file(path));
  if (!parsed.ok) return print_errors(parsed);
  const auto report = maxvar::run_scenario(parsed.config, resolve_out_root(out_root), parallel);
  std::cout << maxvar::markdown_summary(report);
  std::cout << "artifacts: " << resolve_out_root(out_root) << "/run-" << report.config_hash
            << "\n";
  return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble-variety simulator"};
  app.require_subcommand(1);

  std::string config_path, out_root, run_dir, format = "markdown-summary";
  int parallel = 1;

  auto* run = app.add_subcommand("run", "run a scenario config");
  run->add_option("config", config_path)->required();
  run->add_option("--out-root", out_root);

  auto* validate = app.add_subcommand("validate", "validate a scenario config");
  validate->add_option("config", config_path)->required();

  auto* report_cmd = app.add_subcommand("report", "re-emit a stored run report");
  report_cmd->add_option("run-dir", run_dir)->required();
  report_cmd->add_option("--format", format)
      ->check(CLI::IsMember({"json", "csv", "markdown-summary"}));

  auto* sweep = app.add_subcommand("sweep", "run a sweep config with a worker pool");
  sweep->add_option("config", config_path)->required();
  sweep->add_option("--out-root", out_root);
  sweep->add_option("--parallel", parallel)->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_config(config_path, out_root, 1);
    if (sweep->parsed()) return run_config(config_path, out_root, parallel);
    if (validate->parsed()) {
      const auto parsed = maxvar::parse_config(read_file(config_path));
      if (!parsed.ok) return print_errors(parsed);
      std::cout << "ok: " << maxvar::to_string(parsed.config.kind) << " scenario, hash "
                << maxvar::config_hash_hex(parsed.config) << "\n";
      return 0;
    }
    if (report_cmd->parsed()) {
      const auto report = maxvar::load_report_json(run_dir + "/report.json");
      if (format == "json")
        maxvar::emit_report(report, maxvar::ReportFormat::Json, run_dir);
      else if (format == "csv")
        maxvar::emit_report(report, maxvar::ReportFormat::Csv, run_dir);
      else
        std::cout << maxvar::markdown_summary(report);
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
