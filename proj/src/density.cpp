#include "maxvar/density.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace maxvar {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}  // namespace

DensitySpec DensitySpec::uniform(double lo, double hi) {
  DensitySpec s;
  s.kind = DensityKind::Uniform;
  s.lo = lo;
  s.hi = hi;
  s.validate();
  return s;
}

DensitySpec DensitySpec::gaussian(double mean, double sigma) {
  DensitySpec s;
  s.kind = DensityKind::Gaussian;
  s.mean = mean;
  s.sigma = sigma;
  s.validate();
  return s;
}

DensitySpec DensitySpec::custom(std::vector<double> grid, std::vector<double> values) {
  DensitySpec s;
  s.kind = DensityKind::Custom;
  s.grid = std::move(grid);
  s.values = std::move(values);
  s.validate();
  return s;
}

void DensitySpec::validate() const {
  switch (kind) {
    case DensityKind::Uniform:
      if (!(hi > lo)) throw std::invalid_argument("uniform density: hi must be > lo");
      return;
    case DensityKind::Gaussian:
      if (!(sigma > 0.0)) throw std::invalid_argument("gaussian density: sigma must be > 0");
      if (!std::isfinite(mean)) throw std::invalid_argument("gaussian density: mean not finite");
      return;
    case DensityKind::Custom: {
      if (grid.size() < 2 || grid.size() != values.size())
        throw std::invalid_argument("custom density: need matching grid/values, size >= 2");
      const double h = grid[1] - grid[0];
      if (!(h > 0.0)) throw std::invalid_argument("custom density: grid must be increasing");
      for (std::size_t i = 1; i < grid.size(); ++i) {
        if (std::abs((grid[i] - grid[i - 1]) - h) > 1e-9 * h)
          throw std::invalid_argument("custom density: grid must be uniform");
      }
      double integral = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0.0) throw std::invalid_argument("custom density: negative value");
        const double w = (i == 0 || i + 1 == values.size()) ? 0.5 : 1.0;
        integral += w * values[i];
      }
      integral *= h;
      if (std::abs(integral - 1.0) > 1e-9)
        throw std::invalid_argument("custom density: trapezoid integral must be 1 within 1e-9");
      return;
    }
  }
  throw std::invalid_argument("unknown density kind");
}

double DensitySpec::pdf(double x) const {
  switch (kind) {
    case DensityKind::Uniform:
      return (x >= lo && x <= hi) ? 1.0 / (hi - lo) : 0.0;
    case DensityKind::Gaussian: {
      const double t = (x - mean) / sigma;
      return kInvSqrt2Pi / sigma * std::exp(-0.5 * t * t);
    }
    case DensityKind::Custom: {
      if (x <= grid.front() || x >= grid.back()) {
        if (x == grid.front()) return values.front();
        if (x == grid.back()) return values.back();
        return 0.0;
      }
      const double h = grid[1] - grid[0];
      const auto i = static_cast<std::size_t>((x - grid.front()) / h);
      const std::size_t j = std::min(i, grid.size() - 2);
      const double t = (x - grid[j]) / h;
      return values[j] * (1.0 - t) + values[j + 1] * t;
    }
  }
  return 0.0;
}

double DensitySpec::cdf(double x) const {
  switch (kind) {
    case DensityKind::Uniform:
      if (x <= lo) return 0.0;
      if (x >= hi) return 1.0;
      return (x - lo) / (hi - lo);
    case DensityKind::Gaussian:
      return 0.5 * (1.0 + std::erf((x - mean) / (sigma * kSqrt2)));
    case DensityKind::Custom: {
      if (x <= grid.front()) return 0.0;
      if (x >= grid.back()) return 1.0;
      const double h = grid[1] - grid[0];
      // prefix trapezoid + partial cell
      double acc = 0.0;
      std::size_t j = 0;
      while (j + 1 < grid.size() && grid[j + 1] <= x) {
        acc += 0.5 * (values[j] + values[j + 1]) * h;
        ++j;
      }
      if (j + 1 < grid.size()) {
        const double t = x - grid[j];
        const double vx = pdf(x);
        acc += 0.5 * (values[j] + vx) * t;
      }
      return std::min(1.0, acc);
    }
  }
  return 0.0;
}

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("normal_quantile: u must be in (0,1)");
  // Acklam's rational approximation, then two Newton steps on the erf CDF.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (u < plow) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u > phigh) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = u - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = 0.5 * (1.0 + std::erf(x / kSqrt2)) - u;
    const double p = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    if (p > 0.0) x -= e / p;
  }
  return x;
}

double DensitySpec::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("quantile: u must be in (0,1)");
  switch (kind) {
    case DensityKind::Uniform:
      return lo + u * (hi - lo);
    case DensityKind::Gaussian:
      return mean + sigma * normal_quantile(u);
    case DensityKind::Custom: {
      // bisection on the piecewise cdf, then one linear refinement
      double a = grid.front(), b = grid.back();
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (a + b);
        if (cdf(m) < u)
          a = m;
        else
          b = m;
      }
      return 0.5 * (a + b);
    }
  }
  throw std::logic_error("unreachable");
}

double DensitySpec::support_lo() const {
  switch (kind) {
    case DensityKind::Uniform: return lo;
    case DensityKind::Gaussian: return mean - 10.0 * sigma;
    case DensityKind::Custom: return grid.front();
  }
  return 0.0;
}

double DensitySpec::support_hi() const {
  switch (kind) {
    case DensityKind::Uniform: return hi;
    case DensityKind::Gaussian: return mean + 10.0 * sigma;
    case DensityKind::Custom: return grid.back();
  }
  return 0.0;
}

std::string DensitySpec::describe() const {
  switch (kind) {
    case DensityKind::Uniform:
      return "uniform(" + std::to_string(lo) + "," + std::to_string(hi) + ")";
    case DensityKind::Gaussian:
      return "gaussian(" + std::to_string(mean) + "," + std::to_string(sigma) + ")";
    case DensityKind::Custom:
      return "custom[" + std::to_string(grid.size()) + "]";
  }
  return "?";
}

}  // namespace maxvar
