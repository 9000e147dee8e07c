#pragma once

#include <string>
#include <vector>

namespace maxvar {

enum class DensityKind { Uniform, Gaussian, Custom };

/// One-dimensional probability density used to prepare ensembles and as the
/// analytic rho(z) of continuum-limit formulas. Custom densities are
/// tabulated on a uniform grid and interpolated linearly; they must be
/// nonnegative and integrate (trapezoid) to 1 within 1e-9.
struct DensitySpec {
  DensityKind kind = DensityKind::Uniform;
  double lo = 0.0, hi = 1.0;      // uniform support
  double mean = 0.0, sigma = 1.0; // gaussian parameters
  std::vector<double> grid;       // custom: uniform grid
  std::vector<double> values;     // custom: density values on grid

  static DensitySpec uniform(double lo, double hi);
  static DensitySpec gaussian(double mean, double sigma);
  static DensitySpec custom(std::vector<double> grid, std::vector<double> values);

  void validate() const;  // throws std::invalid_argument on a bad spec

  double pdf(double x) const;
  double cdf(double x) const;
  double quantile(double u) const;  // u in (0,1)

  /// Support bounds used for grids and windows. Gaussian support is reported
  /// as mean +- 10 sigma.
  double support_lo() const;
  double support_hi() const;

  std::string describe() const;
};

/// Inverse standard-normal CDF (rational approximation + Newton polish).
double normal_quantile(double u);

}  // namespace maxvar
