#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "maxvar/constants.hpp"
#include "maxvar/density.hpp"

namespace maxvar {

/// The fundamental beable set: N configuration points in d dimensions plus a
/// unit-modulus phase per member. Treated as an immutable value after
/// construction; mutation produces a new state.
struct EnsembleState {
  int n = 0;
  int dim = 1;
  std::vector<double> positions;               // n*dim, member-major
  std::vector<std::complex<double>> phases;    // |w_k| = 1
  PhysicalConstants constants;
  CutoffParams cutoffs;

  double pos(int k, int a) const { return positions[static_cast<std::size_t>(k) * dim + a]; }
  double& pos(int k, int a) { return positions[static_cast<std::size_t>(k) * dim + a]; }

  double pair_distance(int i, int k) const;
  double min_pair_separation() const;   // O(n log n) for d=1, O(n^2) otherwise
  double diameter() const;
};

struct ValidationIssue {
  enum Kind { CoincidentPair, NonUnitPhase } kind;
  int i = -1, j = -1;  // pair for CoincidentPair, (i,-1) for NonUnitPhase
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<ValidationIssue> issues;
};

/// How positions are drawn from the density.
///   Iid:        independent draws (the default contract).
///   Stratified: one draw per probability stratum, jittered by `jitter`.
///   Systematic: quantile grid with a single shared random shift; preserves
///               the equilibrium-like local order used by continuum sweeps.
enum class SampleMode { Iid, Stratified, Systematic };

/// Draw an N-member ensemble from `spec` (applied per coordinate for d > 1).
/// Deterministic given (spec, n, seed, mode). Phases start at w_k = 1.
/// Collisions closer than epsilon_min are resolved by re-drawing the later
/// sample; epsilon_min == 0 is resolved to 1e-9 * diameter afterwards.
EnsembleState sample_ensemble(const DensitySpec& spec, int n, std::uint64_t seed,
                              const PhysicalConstants& constants = {},
                              const CutoffParams& cutoffs = {},
                              SampleMode mode = SampleMode::Iid,
                              double jitter = 0.5);

ValidationReport validate_state(const EnsembleState& state);

/// Prepare phases from a Madelung phase field: w_k = exp(i S(x_k) / hbar).
/// S takes the member's position (d doubles) and returns the action value.
EnsembleState set_phases_from_field(const EnsembleState& state,
                                    const std::function<double(const double*, int)>& s_field);

/// 1D convenience overload.
EnsembleState set_phases_from_field(const EnsembleState& state,
                                    const std::function<double(double)>& s_field);

}  // namespace maxvar
