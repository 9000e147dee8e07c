#include "maxvar/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "maxvar/continuum.hpp"
#include "maxvar/density.hpp"
#include "maxvar/dynamics.hpp"
#include "maxvar/ensemble.hpp"
#include "maxvar/grid_solver.hpp"
#include "maxvar/rng.hpp"
#include "maxvar/variety.hpp"

namespace maxvar {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::FewN: return "few_n";
    case ScenarioKind::Relax: return "relax";
    case ScenarioKind::EvolveCompare: return "evolve_compare";
    case ScenarioKind::ContinuumSweep: return "continuum_sweep";
    case ScenarioKind::KeSweep: return "ke_sweep";
    case ScenarioKind::EnergyShiftSweep: return "energy_shift_sweep";
    case ScenarioKind::Equilibration: return "equilibration";
  }
  return "?";
}

bool RunReport::all_pass() const {
  for (const auto& f : flags)
    if (!f.pass) return false;
  return true;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash_hex(const ScenarioConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.canonical_text)));
  return buf;
}

// ---------------------------------------------------------------------------
// config parsing

namespace {

const std::vector<std::string> kKnownKeys = {
    "scenario", "hbar", "mass", "dim", "A", "horizon", "epsilon_min",
    "N", "N_list", "seeds", "density", "potential", "sampler",
    "dt", "steps", "gamma", "tol",
    "r_prime", "p0", "interior_mass", "grid_n", "box_halfwidth",
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& v, double& out) {
  if (v == "inf" || v == "+inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  try {
    std::size_t pos = 0;
    out = std::stod(v, &pos);
    return pos == v.size();
  } catch (...) {
    return false;
  }
}

bool parse_long(const std::string& v, long& out) {
  try {
    std::size_t pos = 0;
    out = std::stol(v, &pos);
    return pos == v.size();
  } catch (...) {
    return false;
  }
}

// "1..20" or "3,5,9"
bool parse_seed_list(const std::string& v, std::vector<std::uint64_t>& out) {
  out.clear();
  const auto dots = v.find("..");
  if (dots != std::string::npos) {
    long lo = 0, hi = 0;
    if (!parse_long(trim(v.substr(0, dots)), lo) || !parse_long(trim(v.substr(dots + 2)), hi) ||
        hi < lo)
      return false;
    for (long s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
    return true;
  }
  for (const auto& part : split(v, ',')) {
    long s = 0;
    if (!parse_long(part, s) || s < 0) return false;
    out.push_back(static_cast<std::uint64_t>(s));
  }
  return !out.empty();
}

std::optional<DensitySpec> parse_density(const std::string& text) {
  const auto parts = split(text, ':');
  try {
    if (parts[0] == "uniform" && parts.size() == 3) {
      double lo, hi;
      if (parse_double(parts[1], lo) && parse_double(parts[2], hi))
        return DensitySpec::uniform(lo, hi);
    } else if (parts[0] == "gaussian" && parts.size() == 3) {
      double mean, sigma;
      if (parse_double(parts[1], mean) && parse_double(parts[2], sigma))
        return DensitySpec::gaussian(mean, sigma);
    }
  } catch (...) {
  }
  return std::nullopt;
}

std::optional<ExternalPotential> parse_potential(const std::string& text, double mass) {
  const auto parts = split(text, ':');
  if (parts[0] == "none") return ExternalPotential::zero();
  if (parts[0] == "harmonic" && parts.size() == 2) {
    double omega;
    if (parse_double(parts[1], omega)) return ExternalPotential::harmonic(omega, mass);
  }
  return std::nullopt;
}

std::optional<SampleMode> parse_sampler(const std::string& text) {
  if (text == "iid") return SampleMode::Iid;
  if (text == "stratified") return SampleMode::Stratified;
  if (text == "systematic") return SampleMode::Systematic;
  return std::nullopt;
}

}  // namespace

ParseResult parse_config(const std::string& text) {
  ParseResult result;
  std::map<std::string, std::pair<std::string, int>> kv;  // key -> (value, line)
  std::vector<std::string> canonical;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      result.errors.push_back({lineno, "", "expected `key = value`"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end()) {
      result.errors.push_back({lineno, key, "unknown key"});
      continue;
    }
    if (kv.count(key)) {
      result.errors.push_back({lineno, key, "duplicate key (first on line " +
                                                std::to_string(kv[key].second) + ")"});
      continue;
    }
    kv[key] = {value, lineno};
    canonical.push_back(key + "=" + value);
  }

  ScenarioConfig& c = result.config;
  std::sort(canonical.begin(), canonical.end());
  for (const auto& l : canonical) c.canonical_text += l + "\n";

  auto get = [&](const char* key) -> std::optional<std::pair<std::string, int>> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  auto fail = [&](int line, const std::string& key, const std::string& msg) {
    result.errors.push_back({line, key, msg});
  };

  if (auto v = get("scenario")) {
    const std::string& s = v->first;
    if (s == "few_n") c.kind = ScenarioKind::FewN;
    else if (s == "relax") c.kind = ScenarioKind::Relax;
    else if (s == "evolve_compare") c.kind = ScenarioKind::EvolveCompare;
    else if (s == "continuum_sweep") c.kind = ScenarioKind::ContinuumSweep;
    else if (s == "ke_sweep") c.kind = ScenarioKind::KeSweep;
    else if (s == "energy_shift_sweep") c.kind = ScenarioKind::EnergyShiftSweep;
    else if (s == "equilibration") c.kind = ScenarioKind::Equilibration;
    else fail(v->second, "scenario", "unknown scenario kind `" + s + "`");
  } else {
    fail(0, "scenario", "missing required key");
  }

  auto read_double = [&](const char* key, double& dst, double lo, double hi) {
    if (auto v = get(key)) {
      double x;
      if (!parse_double(v->first, x) || !(x >= lo && x <= hi))
        fail(v->second, key, "expected number in [" + std::to_string(lo) + ", " +
                                 std::to_string(hi) + "]");
      else
        dst = x;
    }
  };
  auto read_long = [&](const char* key, long& dst, long lo) {
    if (auto v = get(key)) {
      long x;
      if (!parse_long(v->first, x) || x < lo)
        fail(v->second, key, "expected integer >= " + std::to_string(lo));
      else
        dst = x;
    }
  };

  read_double("hbar", c.hbar, 1e-300, 1e300);
  read_double("mass", c.mass, 1e-300, 1e300);
  long dim = c.dim;
  read_long("dim", dim, 1);
  c.dim = static_cast<int>(dim);
  read_double("A", c.A, 1e-300, 1e300);
  read_double("horizon", c.horizon, 1e-300, std::numeric_limits<double>::infinity());
  read_double("epsilon_min", c.epsilon_min, 0.0, 1e300);
  long n = c.n;
  read_long("N", n, 1);
  c.n = static_cast<int>(n);
  read_double("dt", c.dt, 1e-300, 1e300);
  read_long("steps", c.steps, 1);
  read_double("gamma", c.gamma, 1e-300, 1e300);
  read_double("tol", c.tol, 1e-300, 1e300);
  read_double("r_prime", c.r_prime, 1e-300, 1e300);
  read_double("p0", c.p0, -1e300, 1e300);
  read_double("interior_mass", c.interior_mass, 0.1, 1.0);
  long grid_n = c.grid_n;
  read_long("grid_n", grid_n, 16);
  c.grid_n = static_cast<int>(grid_n);
  read_double("box_halfwidth", c.box_halfwidth, 1e-300, 1e300);

  if (auto v = get("N_list")) {
    c.n_list.clear();
    bool ok = true;
    for (const auto& part : split(v->first, ',')) {
      long x = 0;
      if (!parse_long(part, x) || x < 1) ok = false;
      else c.n_list.push_back(static_cast<int>(x));
    }
    if (!ok)
      fail(v->second, "N_list", "expected comma-separated positive integers");
    else
      for (std::size_t i = 1; i < c.n_list.size(); ++i)
        if (c.n_list[i] <= c.n_list[i - 1]) {
          fail(v->second, "N_list", "N_list not increasing");
          break;
        }
  }
  if (auto v = get("seeds")) {
    if (!parse_seed_list(v->first, c.seeds))
      fail(v->second, "seeds", "expected `lo..hi` or comma-separated nonnegative integers");
  }
  if (auto v = get("density")) {
    if (!parse_density(v->first))
      fail(v->second, "density", "expected uniform:lo:hi or gaussian:mean:sigma");
    else
      c.density = v->first;
  }
  if (auto v = get("potential")) {
    if (!parse_potential(v->first, c.mass))
      fail(v->second, "potential", "expected none or harmonic:omega");
    else
      c.potential = v->first;
  }
  if (auto v = get("sampler")) {
    if (!parse_sampler(v->first))
      fail(v->second, "sampler", "expected iid, stratified or systematic");
    else
      c.sampler = v->first;
  }

  // scenario-level requirements
  const bool sweep = c.kind == ScenarioKind::ContinuumSweep || c.kind == ScenarioKind::KeSweep ||
                     c.kind == ScenarioKind::EnergyShiftSweep;
  if (sweep && c.n_list.empty()) fail(0, "N_list", "required for sweep scenarios");
  const bool stochastic = c.kind != ScenarioKind::EvolveCompare &&
                          c.kind != ScenarioKind::EnergyShiftSweep;
  if (stochastic && c.seeds.empty()) fail(0, "seeds", "seeds are mandatory for stochastic scenarios");

  result.ok = result.errors.empty();
  return result;
}

// ---------------------------------------------------------------------------
// report emission

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_table_csv(const std::string& path, const MetricTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "# schema=1\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i)
    out << table.columns[i] << (i + 1 < table.columns.size() ? "," : "\n");
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << fmt_double(row[i]) << (i + 1 < row.size() ? "," : "\n");
  }
}

json report_to_json(const RunReport& report) {
  // wall-clock lives in the timing sidecar, not here: report.json must be
  // byte-identical for a fixed config and seeds.
  json j;
  j["config_hash"] = report.config_hash;
  j["scenario"] = report.scenario;
  j["step_count"] = report.step_count;
  json flags = json::array();
  for (const auto& f : report.flags) {
    flags.push_back({{"name", f.name},
                     {"pass", f.pass},
                     {"measured", f.measured},
                     {"threshold", f.threshold},
                     {"note", f.note}});
  }
  j["flags"] = flags;
  json tables;
  for (const auto& [name, table] : report.tables) {
    json t;
    t["columns"] = table.columns;
    t["rows"] = table.rows;
    tables[name] = t;
  }
  j["tables"] = tables;
  return j;
}

}  // namespace

std::string markdown_summary(const RunReport& report) {
  std::ostringstream out;
  out << "# Run " << report.config_hash << " (" << report.scenario << ")\n\n";
  out << "steps: " << report.step_count << "\n\n";
  out << "| criterion | measured | threshold | status |\n";
  out << "|---|---|---|---|\n";
  for (const auto& f : report.flags) {
    out << "| " << f.name << " | " << fmt_double(f.measured) << " | " << fmt_double(f.threshold)
        << " | " << (f.pass ? "pass" : "FAIL") << (f.note.empty() ? "" : " (" + f.note + ")")
        << " |\n";
  }
  out << "\n";
  for (const auto& [name, table] : report.tables)
    out << "- table `" << name << "`: " << table.rows.size() << " rows\n";
  return out.str();
}

void emit_report(const RunReport& report, ReportFormat format, const std::string& dir) {
  fs::create_directories(dir);
  switch (format) {
    case ReportFormat::Json: {
      std::ofstream out(dir + "/report.json");
      if (!out) throw std::runtime_error("cannot open " + dir + "/report.json");
      out << report_to_json(report).dump(2) << "\n";
      return;
    }
    case ReportFormat::Csv: {
      for (const auto& [name, table] : report.tables)
        write_table_csv(dir + "/" + name + ".csv", table);
      return;
    }
    case ReportFormat::MarkdownSummary: {
      std::ofstream out(dir + "/summary.md");
      if (!out) throw std::runtime_error("cannot open " + dir + "/summary.md");
      out << markdown_summary(report);
      return;
    }
  }
}

RunReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  RunReport report;
  report.config_hash = j.at("config_hash").get<std::string>();
  report.scenario = j.at("scenario").get<std::string>();
  report.step_count = j.at("step_count").get<long>();
  for (const auto& f : j.at("flags")) {
    report.flags.push_back({f.at("name").get<std::string>(), f.at("pass").get<bool>(),
                            f.at("measured").get<double>(), f.at("threshold").get<double>(),
                            f.at("note").get<std::string>()});
  }
  for (const auto& [name, t] : j.at("tables").items()) {
    MetricTable table;
    table.columns = t.at("columns").get<std::vector<std::string>>();
    table.rows = t.at("rows").get<std::vector<std::vector<double>>>();
    report.tables[name] = table;
  }
  return report;
}

// ---------------------------------------------------------------------------
// scenario bodies

namespace {

struct Context {
  ScenarioConfig cfg;
  DensitySpec density;
  ExternalPotential potential;
  SampleMode sampler = SampleMode::Iid;
  PhysicalConstants constants;
  CutoffParams cutoffs;
};

Context make_context(const ScenarioConfig& cfg) {
  Context ctx;
  ctx.cfg = cfg;
  ctx.density = *parse_density(cfg.density);
  ctx.potential = *parse_potential(cfg.potential, cfg.mass);
  ctx.sampler = *parse_sampler(cfg.sampler);
  ctx.constants = {cfg.hbar, cfg.mass, cfg.dim};
  ctx.cutoffs.horizon = cfg.horizon;
  ctx.cutoffs.epsilon_min = cfg.epsilon_min;
  ctx.cutoffs.A = cfg.A;
  return ctx;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void run_few_n(const Context& ctx, RunReport& report) {
  const auto& cfg = ctx.cfg;
  MetricTable table;
  table.columns = {"seed", "n", "max_abs_potential", "max_abs_force"};

  double worst1 = 0.0, worst2 = 0.0, worst_force = 0.0;
  const int configs = 1000;
  for (int rep = 0; rep < configs; ++rep) {
    Rng rng(cfg.seeds[rep % cfg.seeds.size()] * 100003ull + rep);
    for (int n = 1; n <= 2; ++n) {
      EnsembleState st;
      st.n = n;
      st.dim = 1;
      st.constants = ctx.constants;
      st.cutoffs = ctx.cutoffs;
      st.cutoffs.epsilon_min = 1e-12;
      st.positions.resize(n);
      st.phases.assign(n, {1.0, 0.0});
      for (int k = 0; k < n; ++k) st.positions[k] = rng.uniform();
      if (n == 2 && std::abs(st.positions[0] - st.positions[1]) < 1e-9) st.positions[1] += 0.1;
      const double up = variety_potential(st);
      const auto gr = variety_gradient(st);
      double fmax = 0.0;
      for (double g : gr.grad) fmax = std::max(fmax, std::abs(g));
      if (n == 1) worst1 = std::max(worst1, std::abs(up));
      else worst2 = std::max(worst2, std::abs(up));
      worst_force = std::max(worst_force, fmax);
    }
  }
  report.flags.push_back({"few_n.n1_potential_zero", worst1 == 0.0, worst1, 0.0, "exact"});
  report.flags.push_back({"few_n.n2_potential_zero", worst2 == 0.0, worst2, 0.0, "exact"});
  report.flags.push_back({"few_n.n12_force_zero", worst_force == 0.0, worst_force, 0.0, "exact"});

  // N=3: strictly negative potential, proportional to the closed form
  const int triples = 100;
  std::vector<double> u_abs, tb;
  double worst3 = -1e300;
  Rng rng(cfg.seeds[0]);
  while (static_cast<int>(u_abs.size()) < triples) {
    double x[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    const double dmin = std::min({std::abs(x[0] - x[1]), std::abs(x[1] - x[2]), std::abs(x[0] - x[2])});
    if (dmin < 1e-6) continue;
    EnsembleState st;
    st.n = 3;
    st.dim = 1;
    st.constants = ctx.constants;
    st.cutoffs = ctx.cutoffs;
    st.cutoffs.epsilon_min = 1e-12;
    st.positions = {x[0], x[1], x[2]};
    st.phases.assign(3, {1.0, 0.0});
    const double up = variety_potential(st);
    worst3 = std::max(worst3, up);
    u_abs.push_back(std::abs(up));
    tb.push_back(three_body_potential(x[0], x[1], x[2], ctx.constants));
    table.rows.push_back({static_cast<double>(cfg.seeds[0]), 3.0, std::abs(up), tb.back()});
  }
  double num = 0.0, den = 0.0;
  for (int i = 0; i < triples; ++i) {
    num += u_abs[i] * tb[i];
    den += u_abs[i] * u_abs[i];
  }
  const double c = num / den;
  double ss_res = 0.0, ss_tot = 0.0, mean = 0.0;
  for (double v : tb) mean += v;
  mean /= triples;
  for (int i = 0; i < triples; ++i) {
    ss_res += (tb[i] - c * u_abs[i]) * (tb[i] - c * u_abs[i]);
    ss_tot += (tb[i] - mean) * (tb[i] - mean);
  }
  const double r2 = 1.0 - ss_res / ss_tot;
  report.flags.push_back({"few_n.n3_strictly_negative", worst3 < 0.0, worst3, 0.0, ""});
  report.flags.push_back({"few_n.n3_proportionality_r2", r2 >= 0.999, r2, 0.999,
                          "fit c=" + fmt_double(c)});
  report.tables["few_n_triples"] = table;
}

void run_relax(const Context& ctx, RunReport& report) {
  const auto& cfg = ctx.cfg;
  // oracle ground state for the same trap
  const int gn = cfg.grid_n;
  const double lo = -cfg.box_halfwidth, hi = cfg.box_halfwidth;
  std::vector<double> u(gn);
  {
    const double h = (hi - lo) / (gn - 1);
    for (int i = 0; i < gn; ++i) {
      const double x = lo + i * h;
      u[i] = ctx.potential.value(&x, 1);
    }
  }
  const GroundStateResult gs = ground_state(u, lo, hi, gn, ctx.constants);

  // oracle CDF by prefix trapezoid of |psi0|^2
  const auto rho = gs.psi.density();
  std::vector<double> cdf(gn, 0.0);
  for (int i = 1; i < gn; ++i) cdf[i] = cdf[i - 1] + 0.5 * (rho[i] + rho[i - 1]) * gs.psi.h;
  for (int i = 0; i < gn; ++i) cdf[i] /= cdf[gn - 1];
  auto oracle_cdf = [&](double x) {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    const double f = (x - lo) / gs.psi.h;
    const int i = std::min(gn - 2, static_cast<int>(f));
    const double t = f - i;
    return cdf[i] * (1.0 - t) + cdf[i + 1] * t;
  };

  MetricTable table;
  table.columns = {"seed", "ks", "iterations", "max_force", "converged"};
  double worst_ks = 0.0;
  long total_steps = 0;
  for (std::uint64_t seed : cfg.seeds) {
    EnsembleState st = sample_ensemble(ctx.density, cfg.n, seed, ctx.constants, ctx.cutoffs,
                                       ctx.sampler);
    const RelaxResult rr = relax_to_stationary(st, ctx.potential, cfg.gamma, cfg.tol,
                                               static_cast<int>(cfg.steps));
    total_steps += rr.iterations;
    std::vector<double> x(rr.state.positions);
    std::sort(x.begin(), x.end());
    double ks = 0.0;
    for (int k = 0; k < cfg.n; ++k) {
      const double F = oracle_cdf(x[k]);
      ks = std::max(ks, std::max(std::abs((k + 1.0) / cfg.n - F), std::abs(k / static_cast<double>(cfg.n) - F)));
    }
    worst_ks = std::max(worst_ks, ks);
    table.rows.push_back({static_cast<double>(seed), ks, static_cast<double>(rr.iterations),
                          rr.max_force, rr.converged ? 1.0 : 0.0});
  }
  report.tables["relax"] = table;
  report.step_count += total_steps;
  report.flags.push_back({"relax.ground_state_energy", std::abs(gs.energy - 0.5) <= 1e-3,
                          gs.energy, 0.5, "harmonic oracle"});
  report.flags.push_back({"relax.ks_vs_ground_state", worst_ks <= 0.05, worst_ks, 0.05, ""});
}

void run_evolve_compare(const Context& ctx, RunReport& report) {
  const auto& cfg = ctx.cfg;
  const int gn = cfg.grid_n;
  const double lo = -cfg.box_halfwidth, hi = cfg.box_halfwidth;
  const double h = (hi - lo) / (gn - 1);
  std::vector<double> u(gn);
  for (int i = 0; i < gn; ++i) {
    const double x = lo + i * h;
    u[i] = ctx.potential.value(&x, 1);
  }

  // stationarity of the ground state over one period
  const GroundStateResult gs = ground_state(u, lo, hi, gn, ctx.constants);
  const double period = 2.0 * M_PI;  // omega = 1
  const int steps = static_cast<int>(cfg.steps);
  const GridWavefunction evolved = evolve(gs.psi, u, period / steps, steps, ctx.constants);
  double drift = 0.0;
  const auto rho0 = gs.psi.density(), rho1 = evolved.density();
  for (int i = 0; i < gn; ++i) drift = std::max(drift, std::abs(rho1[i] - rho0[i]));
  report.flags.push_back({"evolve.stationary_density_drift", drift <= 1e-6, drift, 1e-6, ""});

  // free Gaussian packet spreading
  std::vector<double> zero(gn, 0.0);
  const double sigma0 = 0.5;
  GridWavefunction packet = GridWavefunction::from_function(lo, hi, gn, [&](double x) {
    return std::exp(-x * x / (4.0 * sigma0 * sigma0));
  });
  const double t_max = 2.0 * ctx.constants.mass * sigma0 * sigma0 / ctx.constants.hbar;
  const int psteps = static_cast<int>(cfg.steps);
  const GridWavefunction spread = evolve(packet, zero, t_max / psteps, psteps, ctx.constants);
  const auto rho = spread.density();
  double m2 = 0.0;
  for (int i = 0; i < gn; ++i) {
    const double x = lo + i * h;
    m2 += x * x * rho[i];
  }
  m2 *= h;
  const double expected =
      sigma0 * sigma0 + std::pow(ctx.constants.hbar * t_max / (2.0 * ctx.constants.mass * sigma0), 2);
  const double rel = std::abs(m2 - expected) / expected;
  report.flags.push_back({"evolve.free_packet_width", rel <= 0.01, rel, 0.01, ""});
  report.flags.push_back({"evolve.norm_conservation", std::abs(spread.norm() - 1.0) <= 1e-8,
                          std::abs(spread.norm() - 1.0), 1e-8, ""});
  report.step_count += steps + psteps;
}

void append_rows(MetricTable& table, const ConvergenceTable& ct) {
  for (const auto& r : ct.rows)
    table.rows.push_back({static_cast<double>(r.n), static_cast<double>(r.seed), r.R, r.r_prime,
                          r.discrete_value, r.continuum_value, r.rel_discrepancy});
}

// Sweep cells in a deterministic (N, seed) grid, optionally in parallel.
template <typename CellFn>
std::vector<ConvergenceTable> run_cells(const std::vector<int>& n_list,
                                        const std::vector<std::uint64_t>& seeds, int parallel,
                                        CellFn&& cell) {
  const std::size_t total = n_list.size() * seeds.size();
  std::vector<ConvergenceTable> results(total);
  if (parallel <= 1) {
    for (std::size_t idx = 0; idx < total; ++idx)
      results[idx] = cell(n_list[idx / seeds.size()], seeds[idx % seeds.size()]);
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= total) return;
      results[idx] = cell(n_list[idx / seeds.size()], seeds[idx % seeds.size()]);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < parallel; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return results;
}

std::vector<double> cell_medians(const std::vector<ConvergenceTable>& cells, std::size_t n_count,
                                 std::size_t seed_count) {
  std::vector<double> medians;
  for (std::size_t i = 0; i < n_count; ++i) {
    std::vector<double> discs;
    for (std::size_t s = 0; s < seed_count; ++s)
      for (const auto& row : cells[i * seed_count + s].rows) discs.push_back(row.rel_discrepancy);
    std::sort(discs.begin(), discs.end());
    const std::size_t m = discs.size() / 2;
    medians.push_back(discs.size() % 2 ? discs[m] : 0.5 * (discs[m - 1] + discs[m]));
  }
  return medians;
}

void run_continuum_sweep(const Context& ctx, RunReport& report, int parallel) {
  const auto& cfg = ctx.cfg;
  auto cells = run_cells(cfg.n_list, cfg.seeds, parallel, [&](int n, std::uint64_t seed) {
    return discrete_vs_continuum(ctx.density, {n}, cfg.r_prime, {seed}, ctx.sampler,
                                 cfg.interior_mass);
  });
  MetricTable table;
  table.columns = {"N", "seed", "R", "r_prime", "discrete_value", "continuum_value",
                   "rel_discrepancy"};
  for (const auto& c : cells) append_rows(table, c);
  report.tables["continuum_sweep"] = table;

  const auto medians = cell_medians(cells, cfg.n_list.size(), cfg.seeds.size());
  MetricTable med;
  med.columns = {"N", "median_rel_discrepancy"};
  bool monotone = true;
  for (std::size_t i = 0; i < medians.size(); ++i) {
    med.rows.push_back({static_cast<double>(cfg.n_list[i]), medians[i]});
    if (i > 0 && medians[i] >= medians[i - 1]) monotone = false;
  }
  report.tables["continuum_sweep_medians"] = med;
  report.flags.push_back({"continuum.monotone_decreasing", monotone,
                          medians.empty() ? 0.0 : medians.back(), 0.0,
                          medians.size() < 2 ? "no-data" : ""});
  report.flags.push_back({"continuum.final_median", !medians.empty() && medians.back() <= 0.15,
                          medians.empty() ? 0.0 : medians.back(), 0.15, ""});
}

void run_ke_sweep(const Context& ctx, RunReport& report, int parallel) {
  const auto& cfg = ctx.cfg;
  const double p0 = cfg.p0;
  auto s_field = [p0](double x) { return p0 * x; };
  auto cells = run_cells(cfg.n_list, cfg.seeds, parallel, [&](int n, std::uint64_t seed) {
    return ke_continuum_check(ctx.density, s_field, {n}, cfg.r_prime, {seed}, ctx.sampler);
  });
  MetricTable table;
  table.columns = {"N", "seed", "R", "r_prime", "ke_normalized", "target", "rel_discrepancy"};
  for (const auto& c : cells) append_rows(table, c);
  report.tables["ke_sweep"] = table;

  const auto medians = cell_medians(cells, cfg.n_list.size(), cfg.seeds.size());
  MetricTable med;
  med.columns = {"N", "median_rel_discrepancy"};
  for (std::size_t i = 0; i < medians.size(); ++i)
    med.rows.push_back({static_cast<double>(cfg.n_list[i]), medians[i]});
  report.tables["ke_sweep_medians"] = med;
  report.flags.push_back({"ke.final_median_within_10pct",
                          !medians.empty() && medians.back() <= 0.10,
                          medians.empty() ? 0.0 : medians.back(), 0.10, ""});
}

void run_energy_shift_sweep(const Context& ctx, RunReport& report) {
  const auto& cfg = ctx.cfg;
  // harmonic ground state as the reference density
  const int gn = cfg.grid_n;
  const double lo = -cfg.box_halfwidth, hi = cfg.box_halfwidth;
  const double h = (hi - lo) / (gn - 1);
  std::vector<double> u(gn);
  for (int i = 0; i < gn; ++i) {
    const double x = lo + i * h;
    u[i] = ctx.potential.value(&x, 1);
  }
  const GroundStateResult gs = ground_state(u, lo, hi, gn, ctx.constants);
  ContinuumField field;
  field.h = h;
  field.z.resize(gn);
  for (int i = 0; i < gn; ++i) field.z[i] = lo + i * h;
  field.rho = gs.psi.density();
  double integral = 0.5 * (field.rho.front() + field.rho.back());
  for (int i = 1; i + 1 < gn; ++i) integral += field.rho[i];
  integral *= h;
  for (auto& v : field.rho) v /= integral;

  MetricTable table;
  table.columns = {"N", "r_prime", "delta_e", "ratio_vs_estimate"};
  std::vector<double> lx, ly;
  double ratio_at_100 = 0.0;
  for (int n : cfg.n_list) {
    const CorrectionField duq = correction_potential(field, n, cfg.r_prime, 1, ctx.constants);
    const double de = energy_shift(field.rho, duq, h);
    const double estimate = 1.0 / (static_cast<double>(n) * n);  // Eq.-style order estimate
    const double ratio = std::abs(de / gs.energy) / estimate;
    if (n == 100) ratio_at_100 = ratio;
    table.rows.push_back({static_cast<double>(n), cfg.r_prime, de, ratio});
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(std::abs(de)));
  }
  report.tables["energy_shift"] = table;
  const double slope = fit_slope(lx, ly);
  report.flags.push_back({"energy_shift.loglog_slope", std::abs(slope + 2.0) <= 0.1, slope, -2.0,
                          "+-0.1"});
  const bool ratio_ok = ratio_at_100 >= 1.0 / 3.0 && ratio_at_100 <= 3.0;
  report.flags.push_back({"energy_shift.factor3_at_n100", ratio_ok, ratio_at_100, 3.0,
                          "|dE/E0| vs 1e-4"});
}

void run_equilibration(const Context& ctx, RunReport& report) {
  const auto& cfg = ctx.cfg;
  EnsembleState st = sample_ensemble(ctx.density, cfg.n, cfg.seeds[0], ctx.constants, ctx.cutoffs,
                                     ctx.sampler);
  std::vector<double> vel(static_cast<std::size_t>(cfg.n) * cfg.dim, 0.0);
  DynamicsSettings settings;
  settings.dt = cfg.dt;
  settings.mode = DynamicsMode::Conservative;

  const double lo = -cfg.box_halfwidth, hi = cfg.box_halfwidth;
  const int bins = 40;
  std::vector<double> member;
  member.reserve(cfg.steps);
  std::vector<double> all_hist(bins, 0.0);
  const double bw = (hi - lo) / bins;
  for (long s = 0; s < cfg.steps; ++s) {
    step_dynamics(st, vel, ctx.potential, settings);
    member.push_back(st.pos(0, 0));
    for (int k = 0; k < cfg.n; ++k) {
      const double x = st.pos(k, 0);
      if (x >= lo && x < hi) all_hist[static_cast<int>((x - lo) / bw)] += 1.0;
    }
  }
  report.step_count += cfg.steps;

  double total = 0.0;
  for (double c : all_hist) total += c;
  auto ensemble_rho = [&](double x) {
    if (x < lo || x >= hi) return 0.0;
    return all_hist[static_cast<int>((x - lo) / bw)] / (total * bw);
  };
  const auto series = equilibration_metric(member, ensemble_rho, lo, hi, bins, 10);
  MetricTable table;
  table.columns = {"window", "tv_distance"};
  std::vector<double> wx, wy;
  for (std::size_t w = 0; w < series.size(); ++w) {
    table.rows.push_back({static_cast<double>(w + 1), series[w]});
    wx.push_back(static_cast<double>(w + 1));
    wy.push_back(series[w]);
  }
  report.tables["equilibration"] = table;
  const double slope = fit_slope(wx, wy);
  report.flags.push_back({"equilibration.tv_trend_slope", slope <= 0.0, slope, 0.0,
                          "trend check only"});
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& config, const std::string& out_root, int parallel) {
  const auto t0 = std::chrono::steady_clock::now();
  Context ctx = make_context(config);
  RunReport report;
  report.config_hash = config_hash_hex(config);
  report.scenario = to_string(config.kind);

  switch (config.kind) {
    case ScenarioKind::FewN: run_few_n(ctx, report); break;
    case ScenarioKind::Relax: run_relax(ctx, report); break;
    case ScenarioKind::EvolveCompare: run_evolve_compare(ctx, report); break;
    case ScenarioKind::ContinuumSweep: run_continuum_sweep(ctx, report, parallel); break;
    case ScenarioKind::KeSweep: run_ke_sweep(ctx, report, parallel); break;
    case ScenarioKind::EnergyShiftSweep: run_energy_shift_sweep(ctx, report); break;
    case ScenarioKind::Equilibration: run_equilibration(ctx, report); break;
  }

  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();

  const std::string dir = out_root + "/run-" + report.config_hash;
  emit_report(report, ReportFormat::Json, dir);
  emit_report(report, ReportFormat::Csv, dir);
  emit_report(report, ReportFormat::MarkdownSummary, dir);
  std::ofstream timing(dir + "/timing.txt");
  timing << fmt_double(report.wall_ms) << " ms\n";
  return report;
}

}  // namespace maxvar
