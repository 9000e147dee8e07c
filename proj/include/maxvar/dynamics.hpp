#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "maxvar/ensemble.hpp"
#include "maxvar/views.hpp"

namespace maxvar {

/// Composite momenta per member (mass*length/time units at hbar = m = 1).
struct MomentumSet {
  std::vector<double> p;  // n*dim
  /// Pairs whose phase ratio sits on the ln branch cut (ratio == -1 within
  /// tolerance); the phase difference there is ambiguous by 2*pi*hbar.
  std::vector<std::pair<int, int>> branch_ambiguities;
};

struct EnergyReport {
  double kinetic = 0.0;
  double variety_potential = 0.0;
  double external_potential = 0.0;
  double total = 0.0;
};

/// External one-body potential U(x) with gradient, evaluated per member.
struct ExternalPotential {
  std::function<double(const double*, int)> value;
  std::function<void(const double*, int, double*)> gradient;

  static ExternalPotential zero();
  static ExternalPotential harmonic(double omega, double mass = 1.0);
};

enum class DynamicsMode { Conservative, Damped };

/// Orientation of the inter-ensemble force. Repulsive drives members apart
/// (interaction energy +(hbar^2/8m) A*V, the orientation under which trap
/// equilibria exist and the large-N density checks are well-posed).
/// Attractive is the literal sign of the reported potential energy
/// -(hbar^2/8m) V; it admits no stationary trap configurations and is kept
/// for comparison runs only.
enum class InteractionSign { Repulsive, Attractive };

struct DynamicsSettings {
  double dt = 1e-3;
  DynamicsMode mode = DynamicsMode::Conservative;
  double gamma = 0.0;              // damping rate for Damped mode
  bool phase_tracking = false;     // integrate dS_k/dt = L_k when true
  InteractionSign sign = InteractionSign::Repulsive;
  int max_halvings = 20;           // adaptive dt on epsilon_min crossings
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<std::vector<double>> positions;  // thinned samples, n*dim each
  std::vector<EnergyReport> energies;          // dynamics energy decomposition
  std::uint64_t seed = 0;
  DynamicsSettings settings;
};

/// Momenta from phase-ratio views (principal ln branch):
///   p[k][a] = (1/N) sum_{j != k} V_k^{ja} * arg(w_j / w_k).
MomentumSet momenta_from_phases(const EnsembleState& state, const ViewSet& views);

/// Phase-difference kinetic energy,
///   (Z hbar^2 / 2 m N^2) sum_{k != j} theta_jk^2 / |x_k - x_j|^2,
/// theta_jk the principal phase difference; pairs outside the horizon excluded.
double kinetic_energy(const EnsembleState& state, const ViewSet& views);

/// Beable energy report: phase kinetic energy + Eq.-form variety potential +
/// sum of the external potential over members.
EnergyReport hamiltonian(const EnsembleState& state, const ExternalPotential& u);

/// One velocity-Verlet step (or a few sub-steps if dt had to be halved to
/// keep every pair above epsilon_min). Velocities are auxiliary integrator
/// state, not beables. Returns the dt actually used for the step.
double step_dynamics(EnsembleState& state, std::vector<double>& velocities,
                     const ExternalPotential& u, const DynamicsSettings& settings);

/// Energy decomposition the integrator conserves in conservative mode:
/// kinetic = (m/2) sum v^2, variety term signed per settings.sign.
EnergyReport dynamics_energy(const EnsembleState& state, const std::vector<double>& velocities,
                             const ExternalPotential& u, const DynamicsSettings& settings);

struct TrajectoryOptions {
  int steps = 1000;
  int sample_every = 10;
  int track_member = -1;  // record every step for this member when >= 0
};

TrajectoryRecord run_trajectory(EnsembleState& state, std::vector<double>& velocities,
                                const ExternalPotential& u, const DynamicsSettings& settings,
                                const TrajectoryOptions& opts,
                                std::vector<double>* tracked_positions = nullptr);

struct RelaxResult {
  EnsembleState state;
  bool converged = false;
  int iterations = 0;
  double max_force = 0.0;
};

/// Damped dynamics until the largest force component drops below tol.
RelaxResult relax_to_stationary(const EnsembleState& state, const ExternalPotential& u,
                                double gamma, double tol, int max_steps = 200000,
                                InteractionSign sign = InteractionSign::Repulsive);

/// Total-variation distance between the cumulative time-average histogram of
/// one member's trajectory and a reference density, evaluated at n_windows
/// checkpoints. The trajectory must cover at least n_windows samples.
std::vector<double> equilibration_metric(const std::vector<double>& member_positions,
                                         const std::function<double(double)>& rho,
                                         double lo, double hi, int bins = 40,
                                         int n_windows = 10);

/// Stream a trajectory as CSV. Columns:
///   step,t,k,x[0..d-1],kinetic,variety,external,total
void write_trajectory_csv(const TrajectoryRecord& record, int dim, const std::string& path);

}  // namespace maxvar
