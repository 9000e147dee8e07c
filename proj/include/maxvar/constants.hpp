#pragma once

#include <limits>
#include <stdexcept>

namespace maxvar {

/// Physical constants of the ensemble. Default units hbar = m = 1; all
/// reported quantities are dimensionless in these units.
struct PhysicalConstants {
  double hbar = 1.0;
  double mass = 1.0;
  int dim = 1;

  void validate() const {
    if (!(hbar > 0.0)) throw std::invalid_argument("hbar must be > 0");
    if (!(mass > 0.0)) throw std::invalid_argument("mass must be > 0");
    if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
  }
};

/// Cutoffs and normalization constants attached to an ensemble.
///
/// horizon: IR view radius R; +inf disables the horizon.
/// epsilon_min: minimum allowed pair separation. 0 means "auto": resolved to
/// 1e-9 * ensemble diameter when the ensemble is sampled.
struct CutoffParams {
  double horizon = std::numeric_limits<double>::infinity();
  double epsilon_min = 0.0;
  double A = 1.0;
  double Z = 1.0;
  double Z0 = 1.0;
  double ZKE = 1.0;

  void validate() const {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0 (or +inf)");
    if (epsilon_min < 0.0) throw std::invalid_argument("epsilon_min must be >= 0");
    if (!(A > 0.0) || !(Z > 0.0) || !(Z0 > 0.0) || !(ZKE > 0.0))
      throw std::invalid_argument("normalization constants must be finite and > 0");
  }

  bool horizon_enabled() const { return std::isfinite(horizon); }
};

}  // namespace maxvar
