#include "maxvar/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "maxvar/rng.hpp"

namespace maxvar {

double EnsembleState::pair_distance(int i, int k) const {
  double s2 = 0.0;
  for (int a = 0; a < dim; ++a) {
    const double d = pos(i, a) - pos(k, a);
    s2 += d * d;
  }
  return std::sqrt(s2);
}

double EnsembleState::min_pair_separation() const {
  if (n < 2) return std::numeric_limits<double>::infinity();
  if (dim == 1) {
    std::vector<double> x(positions);
    std::sort(x.begin(), x.end());
    double m = std::numeric_limits<double>::infinity();
    for (int k = 1; k < n; ++k) m = std::min(m, x[k] - x[k - 1]);
    return m;
  }
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) m = std::min(m, pair_distance(i, k));
  return m;
}

double EnsembleState::diameter() const {
  if (n < 2) return 0.0;
  double d2max = 0.0;
  if (dim == 1) {
    const auto [mn, mx] = std::minmax_element(positions.begin(), positions.end());
    return *mx - *mn;
  }
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) d2max = std::max(d2max, pair_distance(i, k));
  return d2max;
}

namespace {

double draw_coordinate(const DensitySpec& spec, Rng& rng, SampleMode mode, double jitter,
                       int k, int n) {
  switch (mode) {
    case SampleMode::Iid:
      switch (spec.kind) {
        case DensityKind::Uniform:
          return rng.uniform(spec.lo, spec.hi);
        case DensityKind::Gaussian:
          return spec.mean + spec.sigma * rng.normal();
        case DensityKind::Custom:
          return spec.quantile(std::min(1.0 - 1e-15, std::max(1e-15, rng.uniform())));
      }
      break;
    case SampleMode::Stratified: {
      const double u = (k + 0.5 + jitter * (rng.uniform() - 0.5)) / n;
      return spec.quantile(std::min(1.0 - 1e-15, std::max(1e-15, u)));
    }
    case SampleMode::Systematic:
      // shared shift is handled by the caller; not reached
      break;
  }
  throw std::logic_error("draw_coordinate: unreachable");
}

}  // namespace

EnsembleState sample_ensemble(const DensitySpec& spec, int n, std::uint64_t seed,
                              const PhysicalConstants& constants, const CutoffParams& cutoffs,
                              SampleMode mode, double jitter) {
  spec.validate();
  constants.validate();
  cutoffs.validate();
  if (n < 1) throw std::invalid_argument("sample_ensemble: N must be >= 1");
  if (mode == SampleMode::Stratified && !(jitter >= 0.0 && jitter <= 1.0))
    throw std::invalid_argument("sample_ensemble: stratified jitter must be in [0,1]");

  const int d = constants.dim;
  EnsembleState state;
  state.n = n;
  state.dim = d;
  state.constants = constants;
  state.cutoffs = cutoffs;
  state.positions.resize(static_cast<std::size_t>(n) * d);
  state.phases.assign(n, std::complex<double>(1.0, 0.0));

  Rng rng(seed);

  if (mode == SampleMode::Systematic) {
    // One shared shift per coordinate axis; members stay in quantile order.
    for (int a = 0; a < d; ++a) {
      const double shift = rng.uniform();
      for (int k = 0; k < n; ++k) {
        const double u = (k + shift) / n;
        state.pos(k, a) = spec.quantile(std::min(1.0 - 1e-15, std::max(1e-15, u)));
      }
    }
  } else {
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < d; ++a)
        state.pos(k, a) = draw_coordinate(spec, rng, mode, jitter, k, n);
  }

  // Resolve collisions: re-draw the later member (iid/stratified), or jitter
  // it by epsilon_min (systematic, where re-drawing has no meaning).
  const double eps_check = (cutoffs.epsilon_min > 0.0) ? cutoffs.epsilon_min : 0.0;
  for (int k = 1; k < n; ++k) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      bool collides = false;
      for (int i = 0; i < k; ++i) {
        if (state.pair_distance(i, k) <= eps_check) {
          collides = true;
          break;
        }
      }
      if (!collides) break;
      if (mode == SampleMode::Systematic) {
        for (int a = 0; a < d; ++a)
          state.pos(k, a) += (eps_check > 0 ? eps_check : 1e-12) * (rng.uniform() - 0.5) * 2.0;
      } else {
        for (int a = 0; a < d; ++a)
          state.pos(k, a) = draw_coordinate(spec, rng, mode, jitter, k, n);
      }
      if (attempt == 999)
        throw std::runtime_error("sample_ensemble: could not resolve collisions");
    }
  }

  if (state.cutoffs.epsilon_min <= 0.0) {
    const double diam = state.diameter();
    state.cutoffs.epsilon_min = (diam > 0.0) ? 1e-9 * diam : 1e-12;
  }
  return state;
}

ValidationReport validate_state(const EnsembleState& state) {
  ValidationReport report;
  const double eps = state.cutoffs.epsilon_min;
  for (int i = 0; i < state.n; ++i) {
    const double m = std::abs(state.phases[i]);
    if (std::abs(m - 1.0) > 1e-12) {
      report.ok = false;
      report.issues.push_back({ValidationIssue::NonUnitPhase, i, -1,
                               "phase " + std::to_string(i) + " has modulus " + std::to_string(m)});
    }
  }
  if (state.n >= 2 && eps > 0.0) {
    if (state.dim == 1) {
      std::vector<int> order(state.n);
      for (int i = 0; i < state.n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](int a, int b) { return state.pos(a, 0) < state.pos(b, 0); });
      for (int k = 1; k < state.n; ++k) {
        const int i = order[k - 1], j = order[k];
        if (state.pos(j, 0) - state.pos(i, 0) < eps) {
          report.ok = false;
          report.issues.push_back({ValidationIssue::CoincidentPair, std::min(i, j), std::max(i, j),
                                   "members closer than epsilon_min"});
        }
      }
    } else {
      for (int i = 0; i < state.n; ++i)
        for (int j = i + 1; j < state.n; ++j)
          if (state.pair_distance(i, j) < eps) {
            report.ok = false;
            report.issues.push_back({ValidationIssue::CoincidentPair, i, j,
                                     "members closer than epsilon_min"});
          }
    }
  }
  return report;
}

EnsembleState set_phases_from_field(const EnsembleState& state,
                                    const std::function<double(const double*, int)>& s_field) {
  EnsembleState out = state;
  const double hbar = state.constants.hbar;
  for (int k = 0; k < state.n; ++k) {
    const double s = s_field(&state.positions[static_cast<std::size_t>(k) * state.dim], state.dim);
    if (!std::isfinite(s))
      throw std::invalid_argument("set_phases_from_field: S not finite at member " +
                                  std::to_string(k));
    out.phases[k] = std::polar(1.0, s / hbar);
  }
  return out;
}

EnsembleState set_phases_from_field(const EnsembleState& state,
                                    const std::function<double(double)>& s_field) {
  return set_phases_from_field(
      state, std::function<double(const double*, int)>(
                 [&](const double* x, int) { return s_field(x[0]); }));
}

}  // namespace maxvar
