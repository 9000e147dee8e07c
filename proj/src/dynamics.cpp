#include "maxvar/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "maxvar/variety.hpp"

namespace maxvar {

ExternalPotential ExternalPotential::zero() {
  ExternalPotential u;
  u.value = [](const double*, int) { return 0.0; };
  u.gradient = [](const double*, int d, double* g) {
    for (int a = 0; a < d; ++a) g[a] = 0.0;
  };
  return u;
}

ExternalPotential ExternalPotential::harmonic(double omega, double mass) {
  ExternalPotential u;
  const double k = mass * omega * omega;
  u.value = [k](const double* x, int d) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += x[a] * x[a];
    return 0.5 * k * s;
  };
  u.gradient = [k](const double* x, int d, double* g) {
    for (int a = 0; a < d; ++a) g[a] = k * x[a];
  };
  return u;
}

MomentumSet momenta_from_phases(const EnsembleState& state, const ViewSet& views) {
  const int n = state.n, d = state.dim;
  MomentumSet ms;
  ms.p.assign(static_cast<std::size_t>(n) * d, 0.0);
  for (int k = 0; k < n; ++k) {
    for (std::size_t e = views.offsets[k]; e < views.offsets[k + 1]; ++e) {
      const int j = views.targets[e];
      const std::complex<double> ratio = state.phases[j] / state.phases[k];
      const double theta = std::arg(ratio);  // (S_j - S_k)/hbar, principal branch
      if (std::abs(ratio.real() + 1.0) < 1e-12 && std::abs(ratio.imag()) < 1e-12)
        ms.branch_ambiguities.emplace_back(k, j);
      for (int a = 0; a < d; ++a)
        ms.p[static_cast<std::size_t>(k) * d + a] += views.comps[e * d + a] * theta;
    }
    for (int a = 0; a < d; ++a) ms.p[static_cast<std::size_t>(k) * d + a] /= n;
  }
  return ms;
}

double kinetic_energy(const EnsembleState& state, const ViewSet& views) {
  const int n = state.n;
  const auto& c = state.constants;
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    for (std::size_t e = views.offsets[k]; e < views.offsets[k + 1]; ++e) {
      const int j = views.targets[e];
      const double theta = std::arg(state.phases[j] / state.phases[k]);
      const double dist = state.pair_distance(k, j);
      acc += theta * theta / (dist * dist);
    }
  }
  return state.cutoffs.Z * c.hbar * c.hbar / (2.0 * c.mass * static_cast<double>(n) * n) * acc;
}

EnergyReport hamiltonian(const EnsembleState& state, const ExternalPotential& u) {
  EnergyReport rep;
  const ViewSet views = compute_views(state);
  rep.kinetic = kinetic_energy(state, views);
  rep.variety_potential = variety_potential(state);
  double ext = 0.0;
  for (int k = 0; k < state.n; ++k)
    ext += u.value(&state.positions[static_cast<std::size_t>(k) * state.dim], state.dim);
  rep.external_potential = ext;
  rep.total = rep.kinetic + rep.variety_potential + rep.external_potential;
  return rep;
}

namespace {

// Total force: -grad U_ext per member plus the inter-ensemble force.
// variety_gradient returns d(-(hbar^2/8m)V)/dx; for the repulsive orientation
// (interaction energy +(hbar^2/8m)V) the force is exactly that array.
void compute_forces(const EnsembleState& state, const ExternalPotential& u, InteractionSign sign,
                    std::vector<double>& force) {
  const int n = state.n, d = state.dim;
  force.assign(static_cast<std::size_t>(n) * d, 0.0);
  const GradientResult gr = variety_gradient(state);
  const double s = (sign == InteractionSign::Repulsive) ? 1.0 : -1.0;
  double g[3];
  for (int k = 0; k < n; ++k) {
    u.gradient(&state.positions[static_cast<std::size_t>(k) * d], d, g);
    for (int a = 0; a < d; ++a)
      force[static_cast<std::size_t>(k) * d + a] = -g[a] + s * gr.grad[static_cast<std::size_t>(k) * d + a];
  }
}

double interaction_energy(const EnsembleState& state, InteractionSign sign) {
  const double up = variety_potential(state);  // -(hbar^2/8m) V
  return (sign == InteractionSign::Repulsive) ? -up : up;
}

// Proposed positions are acceptable when every pair stays above epsilon_min;
// in 1D members must also keep their order (a swap means the pair crossed
// through the hard core within the step).
bool step_ok(const EnsembleState& before, const EnsembleState& trial) {
  const double eps = trial.cutoffs.epsilon_min;
  if (before.dim == 1) {
    const int n = before.n;
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return before.pos(a, 0) < before.pos(b, 0); });
    for (int i = 1; i < n; ++i)
      if (trial.pos(order[i], 0) - trial.pos(order[i - 1], 0) < eps) return false;
    return true;
  }
  return trial.min_pair_separation() >= eps;
}

}  // namespace

EnergyReport dynamics_energy(const EnsembleState& state, const std::vector<double>& velocities,
                             const ExternalPotential& u, const DynamicsSettings& settings) {
  EnergyReport rep;
  double ke = 0.0;
  for (double v : velocities) ke += v * v;
  rep.kinetic = 0.5 * state.constants.mass * ke;
  rep.variety_potential = interaction_energy(state, settings.sign);
  double ext = 0.0;
  for (int k = 0; k < state.n; ++k)
    ext += u.value(&state.positions[static_cast<std::size_t>(k) * state.dim], state.dim);
  rep.external_potential = ext;
  rep.total = rep.kinetic + rep.variety_potential + rep.external_potential;
  return rep;
}

double step_dynamics(EnsembleState& state, std::vector<double>& velocities,
                     const ExternalPotential& u, const DynamicsSettings& settings) {
  if (!(settings.dt > 0.0)) throw std::invalid_argument("step_dynamics: dt must be > 0");
  const int n = state.n, d = state.dim;
  const double m = state.constants.mass;
  if (velocities.size() != static_cast<std::size_t>(n) * d)
    throw std::invalid_argument("step_dynamics: velocity array size mismatch");

  std::vector<double> f0, f1;
  compute_forces(state, u, settings.sign, f0);
  if (settings.mode == DynamicsMode::Damped)
    for (std::size_t i = 0; i < f0.size(); ++i) f0[i] -= settings.gamma * m * velocities[i];

  double dt = settings.dt;
  for (int attempt = 0;; ++attempt) {
    EnsembleState trial = state;
    std::vector<double> vtrial = velocities;
    for (std::size_t i = 0; i < vtrial.size(); ++i) {
      trial.positions[i] += dt * vtrial[i] + 0.5 * dt * dt * f0[i] / m;
    }
    if (!step_ok(state, trial)) {
      if (attempt >= settings.max_halvings)
        throw std::runtime_error("step_dynamics: pair separation collapsed below epsilon_min " +
                                 std::to_string(state.cutoffs.epsilon_min) + " after " +
                                 std::to_string(settings.max_halvings) + " dt halvings");
      dt *= 0.5;
      continue;
    }
    compute_forces(trial, u, settings.sign, f1);
    if (settings.mode == DynamicsMode::Damped) {
      // semi-implicit friction: v' = (v + dt*(f0+f1)/2m) / (1 + gamma dt)
      for (std::size_t i = 0; i < vtrial.size(); ++i)
        vtrial[i] = (vtrial[i] + 0.5 * dt * (f0[i] + f1[i]) / m) / (1.0 + settings.gamma * dt);
    } else {
      for (std::size_t i = 0; i < vtrial.size(); ++i)
        vtrial[i] += 0.5 * dt * (f0[i] + f1[i]) / m;
    }
    if (settings.phase_tracking) {
      // dS_k/dt = L_k with the member's local Lagrangian share.
      const VarietyBreakdown vb = variety(trial);
      const auto& c = trial.constants;
      const double vpref = c.hbar * c.hbar / (8.0 * c.mass) * trial.cutoffs.A / trial.n;
      for (int k = 0; k < n; ++k) {
        double v2 = 0.0;
        for (int a = 0; a < d; ++a) {
          const double vk = vtrial[static_cast<std::size_t>(k) * d + a];
          v2 += vk * vk;
        }
        const double uk = u.value(&trial.positions[static_cast<std::size_t>(k) * d], d);
        const double lk = 0.5 * m * v2 - uk - vpref * vb.local[k];
        trial.phases[k] *= std::polar(1.0, dt * lk / c.hbar);
      }
    }
    state = std::move(trial);
    velocities = std::move(vtrial);
    return dt;
  }
}

TrajectoryRecord run_trajectory(EnsembleState& state, std::vector<double>& velocities,
                                const ExternalPotential& u, const DynamicsSettings& settings,
                                const TrajectoryOptions& opts,
                                std::vector<double>* tracked_positions) {
  TrajectoryRecord rec;
  rec.settings = settings;
  double t = 0.0;
  for (int s = 0; s < opts.steps; ++s) {
    t += step_dynamics(state, velocities, u, settings);
    if (tracked_positions && opts.track_member >= 0)
      tracked_positions->push_back(state.pos(opts.track_member, 0));
    if (opts.sample_every > 0 && (s + 1) % opts.sample_every == 0) {
      rec.times.push_back(t);
      rec.positions.push_back(state.positions);
      rec.energies.push_back(dynamics_energy(state, velocities, u, settings));
    }
  }
  return rec;
}

RelaxResult relax_to_stationary(const EnsembleState& state, const ExternalPotential& u,
                                double gamma, double tol, int max_steps, InteractionSign sign) {
  if (!(gamma > 0.0)) throw std::invalid_argument("relax_to_stationary: gamma must be > 0");
  RelaxResult res;
  res.state = state;
  std::vector<double> vel(static_cast<std::size_t>(state.n) * state.dim, 0.0);
  DynamicsSettings settings;
  settings.mode = DynamicsMode::Damped;
  settings.gamma = gamma;
  settings.sign = sign;

  std::vector<double> force;
  for (int it = 0; it < max_steps; ++it) {
    compute_forces(res.state, u, sign, force);
    double fmax = 0.0;
    for (double f : force) fmax = std::max(fmax, std::abs(f));
    res.max_force = fmax;
    if (fmax < tol) {
      res.converged = true;
      res.iterations = it;
      return res;
    }
    // dt capped so no member moves more than a fraction of the closest gap
    const double gap = res.state.min_pair_separation();
    double vmax = 1e-30;
    for (double v : vel) vmax = std::max(vmax, std::abs(v));
    const double mass = res.state.constants.mass;
    const double dt_move = 0.25 * gap / (vmax + std::sqrt(fmax * gap / mass) + 1e-30);
    settings.dt = std::min(0.05 / gamma, dt_move);
    try {
      step_dynamics(res.state, vel, u, settings);
    } catch (const std::runtime_error&) {
      // stalled on the epsilon_min hard core (e.g. a pure trap with no
      // repulsive term left); report the floor configuration
      res.iterations = it + 1;
      return res;
    }
    res.iterations = it + 1;
  }
  return res;  // converged == false: divergence report
}

std::vector<double> equilibration_metric(const std::vector<double>& member_positions,
                                         const std::function<double(double)>& rho,
                                         double lo, double hi, int bins, int n_windows) {
  if (member_positions.empty())
    throw std::invalid_argument("equilibration_metric: empty trajectory");
  if (static_cast<int>(member_positions.size()) < n_windows)
    throw std::invalid_argument("equilibration_metric: trajectory shorter than window count");

  // reference probability per bin (midpoint rule on a fine subgrid)
  std::vector<double> q(bins, 0.0);
  const double h = (hi - lo) / bins;
  double qsum = 0.0;
  for (int b = 0; b < bins; ++b) {
    double acc = 0.0;
    const int sub = 16;
    for (int s = 0; s < sub; ++s) acc += rho(lo + (b + (s + 0.5) / sub) * h);
    q[b] = acc * h / sub;
    qsum += q[b];
  }
  for (double& v : q) v /= qsum;

  std::vector<double> series;
  std::vector<double> counts(bins, 0.0);
  std::size_t used = 0;
  const std::size_t per = member_positions.size() / n_windows;
  for (int w = 0; w < n_windows; ++w) {
    const std::size_t end = (w + 1 == n_windows) ? member_positions.size() : (w + 1) * per;
    for (; used < end; ++used) {
      const double x = member_positions[used];
      if (x >= lo && x < hi) counts[static_cast<int>((x - lo) / h)] += 1.0;
    }
    double total = 0.0;
    for (double c : counts) total += c;
    double tv = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double p = (total > 0) ? counts[b] / total : 0.0;
      tv += std::abs(p - q[b]);
    }
    series.push_back(0.5 * tv);
  }
  return series;
}

void write_trajectory_csv(const TrajectoryRecord& record, int dim, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "# schema=1\n";
  out << "step,t,k";
  for (int a = 0; a < dim; ++a) out << ",x" << a;
  out << ",kinetic,variety,external,total\n";
  char buf[64];
  for (std::size_t s = 0; s < record.times.size(); ++s) {
    const auto& pos = record.positions[s];
    const auto& e = record.energies[s];
    const int n = static_cast<int>(pos.size()) / dim;
    for (int k = 0; k < n; ++k) {
      out << s << ',';
      std::snprintf(buf, sizeof buf, "%.12g", record.times[s]);
      out << buf << ',' << k;
      for (int a = 0; a < dim; ++a) {
        std::snprintf(buf, sizeof buf, "%.12g", pos[static_cast<std::size_t>(k) * dim + a]);
        out << ',' << buf;
      }
      std::snprintf(buf, sizeof buf, "%.12g", e.kinetic);
      out << ',' << buf;
      std::snprintf(buf, sizeof buf, "%.12g", e.variety_potential);
      out << ',' << buf;
      std::snprintf(buf, sizeof buf, "%.12g", e.external_potential);
      out << ',' << buf;
      std::snprintf(buf, sizeof buf, "%.12g", e.total);
      out << ',' << buf << '\n';
    }
  }
}

}  // namespace maxvar
