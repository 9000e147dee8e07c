#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "maxvar/constants.hpp"
#include "maxvar/continuum.hpp"

namespace maxvar {

/// Complex wavefunction on a uniform hard-wall grid (psi = 0 at both ends).
struct GridWavefunction {
  double x0 = 0.0;   // left boundary
  double h = 0.0;    // grid spacing
  std::vector<std::complex<double>> psi;
  double t = 0.0;

  int size() const { return static_cast<int>(psi.size()); }
  double x(int i) const { return x0 + i * h; }
  double norm() const;        // sum |psi|^2 h
  void normalize();           // norm -> 1; throws on zero norm
  std::vector<double> density() const;

  static GridWavefunction from_function(
      double lo, double hi, int n, const std::function<std::complex<double>(double)>& f);
};

struct MadelungPair {
  std::vector<double> rho;
  std::vector<double> S;       // unwrapped, hbar * arg(psi); valid off mask
  std::vector<char> node_mask; // 1 where |psi|^2 < node threshold
};

inline constexpr double kNodeThreshold = 1e-12;  // on |psi|^2

/// Unitary Cayley (trapezoidal) time stepping of
///   i hbar dpsi/dt = (-hbar^2/2m d^2/dx^2 + U) psi.
/// Requires the grid to resolve the local de Broglie wavelength with >= 8
/// points (max phase advance per cell <= 2 pi / 8); rejected otherwise.
GridWavefunction evolve(const GridWavefunction& psi, const std::vector<double>& u, double dt,
                        int steps, const PhysicalConstants& constants = {});

struct GroundStateResult {
  GridWavefunction psi;
  double energy = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Lowest eigenpair by imaginary-time propagation with renormalization,
/// converged when the energy changes by < 1e-10 per step.
GroundStateResult ground_state(const std::vector<double>& u, double lo, double hi, int n,
                               const PhysicalConstants& constants = {}, int max_iters = 200000);

MadelungPair madelung_decompose(const GridWavefunction& psi,
                                const PhysicalConstants& constants = {});

GridWavefunction madelung_recompose(const MadelungPair& pair, double x0, double h,
                                    const PhysicalConstants& constants = {});

/// Bohm quantum potential -(hbar^2/2m) (sqrt rho)'' / sqrt rho, node-masked.
struct QuantumPotentialField {
  std::vector<double> value;
  std::vector<char> mask;  // 1 where undefined (node or boundary stencil)
};
QuantumPotentialField quantum_potential(const std::vector<double>& rho, double h,
                                        const PhysicalConstants& constants = {});

struct ResidualFields {
  std::vector<double> continuity;  // d rho/dt + d(rho dS/m)/dx
  std::vector<double> hamilton_jacobi;  // dS/dt + (S')^2/2m + U + UQ
  std::vector<char> mask;
};

/// Pointwise Madelung residuals from >= 3 stored time slices (centered time
/// differences around the middle slice).
ResidualFields residuals(const std::vector<GridWavefunction>& slices, const std::vector<double>& u,
                         const PhysicalConstants& constants = {});

/// Nonlinear-corrected evolution: Strang splitting with a density-dependent
/// real potential kick dUQ(|psi|^2) between Cayley half-steps. The correction
/// is recomputed from |psi|^2 each step by default; frozen mode keeps the
/// t=0 field. N may be +inf (zero correction).
GridWavefunction evolve_nonlinear(const GridWavefunction& psi, const std::vector<double>& u,
                                  double n_members, double r_prime, double dt, int steps,
                                  const PhysicalConstants& constants = {},
                                  bool self_consistent = true);

}  // namespace maxvar
