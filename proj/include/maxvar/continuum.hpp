#pragma once

#include <functional>
#include <string>
#include <vector>

#include "maxvar/density.hpp"
#include "maxvar/ensemble.hpp"

namespace maxvar {

/// Gridded density (and optional phase) on a uniform 1D grid.
struct ContinuumField {
  std::vector<double> z;
  std::vector<double> rho;
  std::vector<double> S;  // optional; empty when absent
  double h = 0.0;

  void validate() const;  // rho >= 0, trapezoid integral 1 within 1e-9
  static ContinuumField from_spec(const DensitySpec& spec, double lo, double hi, int n);
};

/// Smoothed density field from an ensemble (Gaussian kernel, Silverman
/// bandwidth). Used where raw nearest-neighbour estimates are too rough.
ContinuumField kde_from_ensemble(const EnsembleState& state, double lo, double hi, int n);

/// Nearest-neighbour density estimate at each member (1D): interior members
/// use the mean of left/right gaps, edge members the single adjacent gap.
std::vector<double> nn_density(const EnsembleState& state);

struct CutoffScaling {
  std::vector<double> a;  // UV cutoff field a(z) = 1/(N rho)^{1/d}
  std::vector<double> r;  // r(z) = R / a(z)
  double R = 0.0;
  double r_prime = 0.0;   // N^{1/d} R
  double omega = 2.0;     // solid angle of the unit (d-1)-sphere
  std::vector<char> defined;  // 0 where rho == 0 (a undefined there)
};

double solid_angle(int d);

CutoffScaling cutoff_scaling(int n, const ContinuumField& rho_field, double R, int d = 1);

/// Fisher functional  int rho (rho'/rho)^2 dz  by trapezoid quadrature with
/// centered differences. Sets *restricted if rho touches zero strictly inside
/// the support (those points are excluded).
double fisher_functional(const ContinuumField& rho_field, bool* restricted = nullptr);

/// Same integral over a sub-window [lo, hi].
double fisher_functional_window(const ContinuumField& rho_field, double lo, double hi);

struct ContinuumVariety {
  double horizon_term = 0.0;     // 1/R^2
  double fisher_term = 0.0;      // -Fisher
  double correction_term = 0.0;  // (1/N^{2/d}) (1/(d+2)) r'^2 int rho (lap rho/rho)^2
};

ContinuumVariety continuum_variety(const ContinuumField& rho_field, const CutoffScaling& scaling,
                                   int n, int d = 1);

struct CorrectionField {
  std::vector<double> z;
  std::vector<double> value;
  double stencil_noise = 0.0;  // relative estimate used for the resolution check
};

/// Finite-N correction potential
///   dUQ = (r'^2/N^{2/d}) (d/(d+2)) (hbar^2/2m)
///         [ lap2 rho / rho - 2 (lap rho)^2 / rho^2 - 2 grad rho . grad lap rho / rho^2 ]
/// with centered stencils through the 4th derivative. Throws if the grid is
/// too coarse for the 4th-derivative stencil (h-vs-2h noise above 1%).
CorrectionField correction_potential(const ContinuumField& rho_field, double n, double r_prime,
                                     int d = 1, const PhysicalConstants& constants = {});

/// First-order energy shift  int |psi|^2 dUQ dz  (psi given as rho = |psi|^2).
double energy_shift(const std::vector<double>& rho_psi, const CorrectionField& duq, double h);

struct NormalizationConstants {
  double Z_V = 0.0;
  double Z_KE = 0.0;
  double Z_0 = 0.0;
};

/// Exact normalization constants; requires r > 1.
///   Z_V = d^2 N^2 / (Omega^2 (r^d-1)^2) / N^3,  Z_KE = N/((r^d-1) Omega),
///   Z_0 = d N / (Omega (r^d-1)).
NormalizationConstants normalization_constants(double n, double r, int d);

/// Stated large-r approximate form of Z_V: d^2/(2 N Omega^2 r^{2d}).
double zv_approximate(double n, double r, int d);

struct ConvergenceRow {
  int n = 0;
  std::uint64_t seed = 0;
  double R = 0.0;
  double r_prime = 0.0;
  double discrete_value = 0.0;
  double continuum_value = 0.0;
  double rel_discrepancy = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::vector<double> median_discrepancy;  // one per N in N_list order
  std::vector<int> n_list;
};

/// Discrete-variety vs continuum-limit convergence study (d=1).
///
/// For each (N, seed): sample an ensemble, evaluate the Z_V-normalized
/// variety cross term with rank-matched in-horizon neighbour sums
/// (the per-member weight Z_V(z) (r/M)^2 telescopes to 1/(N M_k^2), i.e.
/// discrete_value = (1/N) sum_k (P_k / M_k)^2 over interior members), and
/// compare against the Fisher functional over the same interior window.
/// The horizon follows R = r'/N. Interior = central `interior_mass` quantile.
ConvergenceTable discrete_vs_continuum(const DensitySpec& spec, const std::vector<int>& n_list,
                                       double r_prime, const std::vector<std::uint64_t>& seeds,
                                       SampleMode mode = SampleMode::Systematic,
                                       double interior_mass = 0.98);

/// Kinetic-energy continuum check: Z_KE-normalized discrete kinetic energy of
/// an ensemble with phases from S(x), against quadrature of rho (S')^2 / 2m.
/// The representative horizon ratio is rbar = 1 + N R int rho^2 (d=1).
ConvergenceTable ke_continuum_check(const DensitySpec& spec,
                                    const std::function<double(double)>& s_field,
                                    const std::vector<int>& n_list, double r_prime,
                                    const std::vector<std::uint64_t>& seeds,
                                    SampleMode mode = SampleMode::Iid);

}  // namespace maxvar
