#include "maxvar/continuum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "maxvar/views.hpp"
#include "maxvar/dynamics.hpp"

namespace maxvar {

namespace {

double trapz(const std::vector<double>& f, double h) {
  if (f.size() < 2) return 0.0;
  double acc = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) acc += f[i];
  return acc * h;
}

}  // namespace

void ContinuumField::validate() const {
  if (z.size() < 4 || z.size() != rho.size())
    throw std::invalid_argument("ContinuumField: need matching z/rho, size >= 4");
  if (!S.empty() && S.size() != z.size())
    throw std::invalid_argument("ContinuumField: S size mismatch");
  if (!(h > 0.0)) throw std::invalid_argument("ContinuumField: h must be > 0");
  for (double v : rho)
    if (v < 0.0) throw std::invalid_argument("ContinuumField: negative density");
  const double integral = trapz(rho, h);
  if (std::abs(integral - 1.0) > 1e-9)
    throw std::invalid_argument("ContinuumField: trapezoid integral of rho is " +
                                std::to_string(integral) + ", must be 1 within 1e-9");
}

ContinuumField ContinuumField::from_spec(const DensitySpec& spec, double lo, double hi, int n) {
  if (n < 4) throw std::invalid_argument("ContinuumField::from_spec: n >= 4 required");
  ContinuumField f;
  f.h = (hi - lo) / (n - 1);
  f.z.resize(n);
  f.rho.resize(n);
  for (int i = 0; i < n; ++i) {
    f.z[i] = lo + i * f.h;
    f.rho[i] = spec.pdf(f.z[i]);
  }
  // renormalize the truncation so the trapezoid integral is exactly 1
  const double integral = trapz(f.rho, f.h);
  if (!(integral > 0.0)) throw std::invalid_argument("from_spec: density vanishes on [lo,hi]");
  for (double& v : f.rho) v /= integral;
  return f;
}

ContinuumField kde_from_ensemble(const EnsembleState& state, double lo, double hi, int n) {
  if (state.dim != 1) throw std::invalid_argument("kde_from_ensemble: d=1 only");
  if (state.n < 2) throw std::invalid_argument("kde_from_ensemble: need N >= 2");
  // Silverman bandwidth
  double mean = 0.0;
  for (int k = 0; k < state.n; ++k) mean += state.pos(k, 0);
  mean /= state.n;
  double var = 0.0;
  for (int k = 0; k < state.n; ++k) {
    const double d = state.pos(k, 0) - mean;
    var += d * d;
  }
  var /= (state.n - 1);
  const double bw = 1.06 * std::sqrt(var) * std::pow(state.n, -0.2);

  ContinuumField f;
  f.h = (hi - lo) / (n - 1);
  f.z.resize(n);
  f.rho.assign(n, 0.0);
  const double norm = 1.0 / (state.n * bw * std::sqrt(2.0 * M_PI));
  for (int i = 0; i < n; ++i) {
    f.z[i] = lo + i * f.h;
    double acc = 0.0;
    for (int k = 0; k < state.n; ++k) {
      const double t = (f.z[i] - state.pos(k, 0)) / bw;
      acc += std::exp(-0.5 * t * t);
    }
    f.rho[i] = norm * acc;
  }
  const double integral = trapz(f.rho, f.h);
  for (double& v : f.rho) v /= integral;
  return f;
}

std::vector<double> nn_density(const EnsembleState& state) {
  if (state.dim != 1) throw std::invalid_argument("nn_density: d=1 only");
  if (state.n < 2) throw std::invalid_argument("nn_density: need N >= 2");
  const int n = state.n;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return state.pos(a, 0) < state.pos(b, 0); });
  std::vector<double> est(n, 0.0);
  for (int r = 0; r < n; ++r) {
    const int k = order[r];
    double gap;
    if (r == 0)
      gap = state.pos(order[1], 0) - state.pos(order[0], 0);
    else if (r == n - 1)
      gap = state.pos(order[n - 1], 0) - state.pos(order[n - 2], 0);
    else
      gap = 0.5 * (state.pos(order[r + 1], 0) - state.pos(order[r - 1], 0));
    est[k] = 1.0 / (n * gap);
  }
  return est;
}

double solid_angle(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 2.0 * M_PI;
    case 3: return 4.0 * M_PI;
    default: {
      // Omega_d = 2 pi^{d/2} / Gamma(d/2)
      return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
    }
  }
}

CutoffScaling cutoff_scaling(int n, const ContinuumField& rho_field, double R, int d) {
  if (!(R > 0.0)) throw std::invalid_argument("cutoff_scaling: R must be > 0");
  rho_field.validate();
  CutoffScaling cs;
  cs.R = R;
  cs.r_prime = std::pow(static_cast<double>(n), 1.0 / d) * R;
  cs.omega = solid_angle(d);
  cs.a.resize(rho_field.rho.size());
  cs.r.resize(rho_field.rho.size());
  cs.defined.resize(rho_field.rho.size());
  for (std::size_t i = 0; i < rho_field.rho.size(); ++i) {
    const double rho = rho_field.rho[i];
    if (rho > 0.0) {
      cs.a[i] = std::pow(n * rho, -1.0 / d);
      cs.r[i] = R / cs.a[i];
      cs.defined[i] = 1;
    } else {
      cs.a[i] = 0.0;
      cs.r[i] = 0.0;
      cs.defined[i] = 0;  // flagged; excluded from integrals
    }
  }
  return cs;
}

double fisher_functional(const ContinuumField& rho_field, bool* restricted) {
  rho_field.validate();
  const auto& rho = rho_field.rho;
  const double h = rho_field.h;
  bool touched = false;
  std::vector<double> integrand(rho.size(), 0.0);
  for (std::size_t i = 1; i + 1 < rho.size(); ++i) {
    if (rho[i] <= 0.0) {
      touched = true;
      continue;
    }
    const double drho = (rho[i + 1] - rho[i - 1]) / (2.0 * h);
    integrand[i] = drho * drho / rho[i];
  }
  if (restricted) *restricted = touched;
  return trapz(integrand, h);
}

double fisher_functional_window(const ContinuumField& rho_field, double lo, double hi) {
  const auto& rho = rho_field.rho;
  const double h = rho_field.h;
  std::vector<double> integrand;
  integrand.reserve(rho.size());
  for (std::size_t i = 1; i + 1 < rho.size(); ++i) {
    if (rho_field.z[i] < lo || rho_field.z[i] > hi || rho[i] <= 0.0) continue;
    const double drho = (rho[i + 1] - rho[i - 1]) / (2.0 * h);
    integrand.push_back(drho * drho / rho[i]);
  }
  return trapz(integrand, h);
}

ContinuumVariety continuum_variety(const ContinuumField& rho_field, const CutoffScaling& scaling,
                                   int n, int d) {
  ContinuumVariety cv;
  cv.horizon_term = 1.0 / (scaling.R * scaling.R);
  cv.fisher_term = -fisher_functional(rho_field);
  // third entry of the expansion: (1/N^{2/d}) (1/(d+2)) r'^2 int rho (rho''/rho)^2
  const auto& rho = rho_field.rho;
  const double h = rho_field.h;
  std::vector<double> integrand(rho.size(), 0.0);
  for (std::size_t i = 1; i + 1 < rho.size(); ++i) {
    if (rho[i] <= 0.0) continue;
    const double lap = (rho[i + 1] - 2.0 * rho[i] + rho[i - 1]) / (h * h);
    integrand[i] = lap * lap / rho[i];
  }
  cv.correction_term = std::pow(static_cast<double>(n), -2.0 / d) / (d + 2.0) *
                       scaling.r_prime * scaling.r_prime * trapz(integrand, h);
  return cv;
}

namespace {

struct Stencils {
  std::vector<double> d1, d2, d3, d4;
};

// centered stencils with stride `s` grid points
Stencils derivatives(const std::vector<double>& f, double h, int s) {
  const std::size_t n = f.size();
  Stencils out;
  out.d1.assign(n, 0.0);
  out.d2.assign(n, 0.0);
  out.d3.assign(n, 0.0);
  out.d4.assign(n, 0.0);
  const double hs = h * s;
  for (std::size_t i = 2 * s; i + 2 * s < n; ++i) {
    const double fm2 = f[i - 2 * s], fm1 = f[i - s], f0 = f[i], fp1 = f[i + s], fp2 = f[i + 2 * s];
    out.d1[i] = (fp1 - fm1) / (2.0 * hs);
    out.d2[i] = (fp1 - 2.0 * f0 + fm1) / (hs * hs);
    out.d3[i] = (-fm2 + 2.0 * fm1 - 2.0 * fp1 + fp2) / (2.0 * hs * hs * hs);
    out.d4[i] = (fm2 - 4.0 * fm1 + 6.0 * f0 - 4.0 * fp1 + fp2) / (hs * hs * hs * hs);
  }
  return out;
}

}  // namespace

CorrectionField correction_potential(const ContinuumField& rho_field, double n, double r_prime,
                                     int d, const PhysicalConstants& constants) {
  rho_field.validate();
  const auto& rho = rho_field.rho;
  const double h = rho_field.h;
  const double pref = std::isinf(n) ? 0.0
                                    : r_prime * r_prime * std::pow(n, -2.0 / d) * d / (d + 2.0) *
                                          constants.hbar * constants.hbar / (2.0 * constants.mass);

  const Stencils s1 = derivatives(rho, h, 1);
  const Stencils s2 = derivatives(rho, h, 2);

  CorrectionField out;
  out.z = rho_field.z;
  out.value.assign(rho.size(), 0.0);
  // Ratios like lap2 rho / rho turn into stencil garbage in negligible-density
  // tails, and a hard cutoff would put a kink into any phase built from the
  // field. Window the bracket smoothly in rho; points below the hard floor
  // stay zero. The noise estimate covers the region that carries weight.
  double rho_max = 0.0;
  for (double v : rho) rho_max = std::max(rho_max, v);
  const double rho_floor = 1e-8 * rho_max;
  const double rho_soft = 1e-6 * rho_max;
  // the resolution metric covers the density bulk: in far tails the metric
  // cannot distinguish under-resolution from dynamically irrelevant ripples
  const double rho_noise = 1e-2 * rho_max;
  double diff2 = 0.0, norm2 = 0.0;
  auto bracket = [&](const Stencils& st, std::size_t i) {
    const double r0 = rho[i];
    return st.d4[i] / r0 - 2.0 * st.d2[i] * st.d2[i] / (r0 * r0) -
           2.0 * st.d1[i] * st.d3[i] / (r0 * r0);
  };
  for (std::size_t i = 4; i + 4 < rho.size(); ++i) {
    if (rho[i] <= rho_floor) continue;
    const double b1 = bracket(s1, i);
    const double window = rho[i] * rho[i] / (rho[i] * rho[i] + rho_soft * rho_soft);
    out.value[i] = pref * b1 * window;
    if (rho[i] < rho_noise) continue;
    const double b2 = bracket(s2, i);
    const double w = rho[i];  // density-weighted noise estimate
    diff2 += w * (b2 - b1) * (b2 - b1);
    norm2 += w * b1 * b1;
  }
  // h-vs-2h comparison: for a 2nd-order stencil the h^2 error grows 4x at 2h,
  // so (b2-b1) ~ 3x the h-stencil error.
  out.stencil_noise = (norm2 > 0.0) ? std::sqrt(diff2 / norm2) / 3.0 : 0.0;
  if (out.stencil_noise > 0.01)
    throw std::invalid_argument("correction_potential: grid too coarse, stencil noise " +
                                std::to_string(out.stencil_noise) + " > 1% of field norm");
  return out;
}

double energy_shift(const std::vector<double>& rho_psi, const CorrectionField& duq, double h) {
  if (rho_psi.size() != duq.value.size())
    throw std::invalid_argument("energy_shift: field size mismatch");
  std::vector<double> integrand(rho_psi.size());
  for (std::size_t i = 0; i < rho_psi.size(); ++i) integrand[i] = rho_psi[i] * duq.value[i];
  return trapz(integrand, h);
}

NormalizationConstants normalization_constants(double n, double r, int d) {
  if (!(r > 1.0)) throw std::invalid_argument("normalization_constants: need r > 1 (r^d - 1 > 0)");
  if (!(n >= 1.0) || d < 1) throw std::invalid_argument("normalization_constants: need N >= 1, d >= 1");
  const double omega = solid_angle(d);
  const double shell = std::pow(r, d) - 1.0;
  NormalizationConstants nc;
  nc.Z_V = d * d * n * n / (omega * omega * shell * shell) / (n * n * n);
  nc.Z_KE = n / (shell * omega);
  nc.Z_0 = d * n / (omega * shell);
  return nc;
}

double zv_approximate(double n, double r, int d) {
  const double omega = solid_angle(d);
  return d * d / (2.0 * n * omega * omega * std::pow(r, 2 * d));
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return (v.size() % 2) ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

ConvergenceTable discrete_vs_continuum(const DensitySpec& spec, const std::vector<int>& n_list,
                                       double r_prime, const std::vector<std::uint64_t>& seeds,
                                       SampleMode mode, double interior_mass) {
  if (n_list.empty() || seeds.empty())
    throw std::invalid_argument("discrete_vs_continuum: need N_list and seeds");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1])
      throw std::invalid_argument("discrete_vs_continuum: N_list must be increasing");

  // shared interior window (central `interior_mass` of the distribution)
  const double qlo = 0.5 * (1.0 - interior_mass), qhi = 1.0 - qlo;
  const double wlo = spec.quantile(qlo), whi = spec.quantile(qhi);

  // continuum target: Fisher functional over the window
  const ContinuumField field =
      ContinuumField::from_spec(spec, spec.support_lo(), spec.support_hi(), 20001);
  const double fisher_target = fisher_functional_window(field, wlo, whi);

  ConvergenceTable table;
  table.n_list = n_list;
  PhysicalConstants constants;  // hbar = m = 1, d = 1

  for (int n : n_list) {
    const double R = r_prime / n;
    std::vector<double> discs;
    for (std::uint64_t seed : seeds) {
      CutoffParams cut;
      cut.horizon = R;
      EnsembleState st = sample_ensemble(spec, n, seed, constants, cut, mode);

      std::vector<double> x(st.positions);
      std::sort(x.begin(), x.end());

      // Z_V-normalized variety cross term, rank-matched within the horizon:
      // per-member weight Z_V(z) N^3 (r/M)^2 = d^2 N^2/(2 Om^2 r^{2d}) (r/M)^2
      // telescopes (d=1, Om=2, r = r' rho) to N^2/(8 M^2) * 8/N^3-summed,
      // i.e. discrete = (1/N) sum_k (P_k/M_k)^2.
      double acc = 0.0;
      for (int k = 0; k < n; ++k) {
        if (x[k] < wlo || x[k] > whi) continue;
        int ml = 0, mr = 0;
        while (k - 1 - ml >= 0 && x[k] - x[k - 1 - ml] < R) ++ml;
        while (k + 1 + mr < n && x[k + 1 + mr] - x[k] < R) ++mr;
        const int m = std::min(ml, mr);
        if (m < 1) continue;
        double p = 0.0;
        for (int j = 1; j <= m; ++j)
          p += 1.0 / (x[k + j] - x[k]) - 1.0 / (x[k] - x[k - j]);
        acc += (p / m) * (p / m);
      }
      const double discrete = acc / n;
      const double disc = std::abs(discrete - fisher_target) / fisher_target;
      table.rows.push_back({n, seed, R, r_prime, discrete, fisher_target, disc});
      discs.push_back(disc);
    }
    table.median_discrepancy.push_back(median_of(discs));
  }
  return table;
}

ConvergenceTable ke_continuum_check(const DensitySpec& spec,
                                    const std::function<double(double)>& s_field,
                                    const std::vector<int>& n_list, double r_prime,
                                    const std::vector<std::uint64_t>& seeds, SampleMode mode) {
  if (n_list.empty() || seeds.empty())
    throw std::invalid_argument("ke_continuum_check: need N_list and seeds");

  // quadrature targets on the analytic density
  const int ng = 20001;
  const ContinuumField field =
      ContinuumField::from_spec(spec, spec.support_lo(), spec.support_hi(), ng);
  double rho2 = 0.0;      // int rho^2
  double target = 0.0;    // int rho (S')^2 / 2m
  {
    std::vector<double> f1(ng), f2(ng);
    for (int i = 0; i < ng; ++i) f1[i] = field.rho[i] * field.rho[i];
    for (int i = 0; i < ng; ++i) {
      const double zp = field.z[i] + field.h, zm = field.z[i] - field.h;
      const double ds = (s_field(zp) - s_field(zm)) / (2.0 * field.h);
      f2[i] = field.rho[i] * ds * ds * 0.5;  // m = 1
    }
    double acc1 = 0.5 * (f1.front() + f1.back());
    double acc2 = 0.5 * (f2.front() + f2.back());
    for (int i = 1; i + 1 < ng; ++i) {
      acc1 += f1[i];
      acc2 += f2[i];
    }
    rho2 = acc1 * field.h;
    target = acc2 * field.h;
  }

  ConvergenceTable table;
  table.n_list = n_list;
  PhysicalConstants constants;

  for (int n : n_list) {
    const double R = r_prime / n;
    const double rbar = 1.0 + n * R * rho2;  // representative r: rho-averaged pair count
    const double zke = normalization_constants(n, rbar, 1).Z_KE;
    std::vector<double> discs;
    for (std::uint64_t seed : seeds) {
      CutoffParams cut;
      cut.horizon = R;
      EnsembleState st = sample_ensemble(spec, n, seed, constants, cut, mode);
      st = set_phases_from_field(st, s_field);
      const ViewSet views = compute_views(st);
      const double ke = zke * kinetic_energy(st, views);  // cutoffs.Z = 1 discrete
      const double disc = std::abs(ke - target) / target;
      table.rows.push_back({n, seed, R, r_prime, ke, target, disc});
      discs.push_back(disc);
    }
    table.median_discrepancy.push_back(median_of(discs));
  }
  return table;
}

}  // namespace maxvar
