#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "maxvar/dynamics.hpp"
#include "maxvar/ensemble.hpp"
#include "maxvar/rng.hpp"
#include "maxvar/variety.hpp"
#include "maxvar/views.hpp"

using namespace maxvar;

namespace {

EnsembleState make_state(std::vector<double> positions, std::vector<double> s_values = {}) {
  EnsembleState st;
  st.dim = 1;
  st.n = static_cast<int>(positions.size());
  st.positions = std::move(positions);
  st.phases.assign(st.n, {1.0, 0.0});
  st.cutoffs.epsilon_min = 1e-12;
  if (!s_values.empty())
    for (int k = 0; k < st.n; ++k) st.phases[k] = std::polar(1.0, s_values[k] / st.constants.hbar);
  return st;
}

}  // namespace

TEST_CASE("momenta from phases") {
  SUBCASE("equal phases give zero momenta") {
    auto st = make_state({0.0, 1.0, 2.5}, {0.7, 0.7, 0.7});
    const auto ms = momenta_from_phases(st, compute_views(st));
    for (double p : ms.p) CHECK(std::abs(p) < 1e-15);
  }
  SUBCASE("hand value: N=2, x={0,1}, S={0, 0.1}") {
    auto st = make_state({0.0, 1.0}, {0.0, 0.1});
    const auto ms = momenta_from_phases(st, compute_views(st));
    CHECK(ms.p[0] == doctest::Approx(-0.05).epsilon(1e-12));
    CHECK(ms.p[1] == doctest::Approx(-0.05).epsilon(1e-12));  // V and theta both flip sign
  }
  SUBCASE("global phase shift leaves the momentum sum invariant") {
    auto st = make_state({0.1, 0.8, 1.7, 2.2}, {0.0, 0.3, -0.2, 0.9});
    const auto before = momenta_from_phases(st, compute_views(st));
    EnsembleState shifted = st;
    for (auto& w : shifted.phases) w *= std::polar(1.0, 0.77);
    const auto after = momenta_from_phases(shifted, compute_views(shifted));
    double sum_b = 0.0, sum_a = 0.0;
    for (double p : before.p) sum_b += p;
    for (double p : after.p) sum_a += p;
    CHECK(sum_b == doctest::Approx(sum_a).epsilon(1e-12));
  }
  SUBCASE("opposite phases flag the branch ambiguity") {
    auto st = make_state({0.0, 1.0});
    st.phases[1] = {-1.0, 0.0};
    const auto ms = momenta_from_phases(st, compute_views(st));
    CHECK(!ms.branch_ambiguities.empty());
  }
  SUBCASE("large-N continuum check: linear phase, interior momentum near p0") {
    // Z0-normalized momentum; the view-weighted sum is antiparallel to dS/dx
    const double p0 = 0.3;
    const int n = 10000;
    PhysicalConstants c;
    CutoffParams cut;
    const double r_prime = 20.0;
    cut.horizon = r_prime / n;
    auto st = sample_ensemble(DensitySpec::gaussian(0.0, 1.0), n, 4, c, cut);
    st = set_phases_from_field(st, std::function<double(double)>([&](double x) { return p0 * x; }));
    const auto ms = momenta_from_phases(st, compute_views(st));
    // representative r from the rho-averaged pair count (d=1, gaussian sigma=1)
    const double rho2 = 1.0 / (2.0 * std::sqrt(M_PI));
    const double rbar = 1.0 + r_prime * rho2;
    const double z0 = n / (2.0 * (rbar - 1.0));
    double mean = 0.0;
    int used = 0;
    for (int k = 0; k < n; ++k) {
      if (std::abs(st.pos(k, 0)) > 1.5) continue;
      mean += -st.constants.hbar * z0 * ms.p[k];
      ++used;
    }
    mean /= used;
    CHECK(mean == doctest::Approx(p0).epsilon(0.10));
  }
}

TEST_CASE("kinetic energy") {
  SUBCASE("uniform phases give zero") {
    auto st = make_state({0.0, 0.4, 1.1}, {0.2, 0.2, 0.2});
    CHECK(kinetic_energy(st, compute_views(st)) == 0.0);
  }
  SUBCASE("hand value 0.0025") {
    auto st = make_state({0.0, 1.0}, {0.0, 0.1});
    CHECK(kinetic_energy(st, compute_views(st)) == doctest::Approx(0.0025).epsilon(1e-12));
  }
  SUBCASE("nonnegative for generic phases") {
    auto st = sample_ensemble(DensitySpec::uniform(0.0, 1.0), 16, 6);
    st = set_phases_from_field(st, std::function<double(double)>([](double x) {
                                 return std::sin(17.0 * x);
                               }));
    CHECK(kinetic_energy(st, compute_views(st)) >= 0.0);
  }
}

TEST_CASE("hamiltonian assembly") {
  SUBCASE("N=1 free: total zero") {
    auto st = make_state({0.3});
    CHECK(hamiltonian(st, ExternalPotential::zero()).total == 0.0);
  }
  SUBCASE("N=3 symmetric uniform phases: total is the variety potential") {
    auto st = make_state({-1.0, 0.0, 1.0});
    const auto rep = hamiltonian(st, ExternalPotential::zero());
    CHECK(rep.kinetic == 0.0);
    CHECK(rep.total == doctest::Approx(-1.0 / 24.0).epsilon(1e-12));
  }
  SUBCASE("N=2 with harmonic potential: 0.5025") {
    auto st = make_state({0.0, 1.0}, {0.0, 0.1});
    const auto rep = hamiltonian(st, ExternalPotential::harmonic(1.0));
    CHECK(rep.kinetic == doctest::Approx(0.0025).epsilon(1e-12));
    CHECK(rep.variety_potential == 0.0);
    CHECK(rep.external_potential == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.total == doctest::Approx(0.5025).epsilon(1e-12));
  }
  SUBCASE("total = kinetic + variety + external exactly") {
    auto st = sample_ensemble(DensitySpec::gaussian(0.0, 1.0), 12, 3);
    st = set_phases_from_field(st, std::function<double(double)>([](double x) { return 0.4 * x; }));
    const auto rep = hamiltonian(st, ExternalPotential::harmonic(2.0));
    CHECK(rep.total == rep.kinetic + rep.variety_potential + rep.external_potential);
  }
}

TEST_CASE("step_dynamics basics") {
  SUBCASE("N=1 free at rest stays put") {
    auto st = make_state({0.4});
    std::vector<double> vel{0.0};
    DynamicsSettings settings;
    for (int i = 0; i < 100; ++i) step_dynamics(st, vel, ExternalPotential::zero(), settings);
    CHECK(st.pos(0, 0) == 0.4);
    CHECK(vel[0] == 0.0);
  }
  SUBCASE("N=2 free members move uniformly (no three-body force)") {
    auto st = make_state({0.0, 1.0});
    std::vector<double> vel{0.25, -0.125};
    DynamicsSettings settings;
    settings.dt = 0.01;
    for (int i = 0; i < 100; ++i) step_dynamics(st, vel, ExternalPotential::zero(), settings);
    CHECK(st.pos(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(st.pos(1, 0) == doctest::Approx(1.0 - 0.125).epsilon(1e-12));
    CHECK(vel[0] == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("invalid dt rejected") {
    auto st = make_state({0.0, 1.0});
    std::vector<double> vel{0.0, 0.0};
    DynamicsSettings settings;
    settings.dt = 0.0;
    CHECK_THROWS_AS(step_dynamics(st, vel, ExternalPotential::zero(), settings),
                    std::invalid_argument);
  }
  SUBCASE("head-on collision rejects the step after max halvings") {
    auto st = make_state({0.0, 1.0});
    st.cutoffs.epsilon_min = 0.5;
    std::vector<double> vel{10.0, -10.0};
    DynamicsSettings settings;
    settings.dt = 1.0;
    settings.max_halvings = 3;
    CHECK_THROWS_AS(step_dynamics(st, vel, ExternalPotential::zero(), settings),
                    std::runtime_error);
  }
}

TEST_CASE("energy conservation and reversibility") {
  SUBCASE("N=3 conservative drift over 1e4 steps below 1e-6 relative") {
    auto st = make_state({-1.0, 0.0, 1.0});
    std::vector<double> vel(3, 0.0);
    DynamicsSettings settings;
    settings.dt = 1e-3;
    const auto e0 = dynamics_energy(st, vel, ExternalPotential::zero(), settings);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      step_dynamics(st, vel, ExternalPotential::zero(), settings);
      const auto e = dynamics_energy(st, vel, ExternalPotential::zero(), settings);
      worst = std::max(worst, std::abs(e.total - e0.total));
    }
    CHECK(worst / std::abs(e0.total) < 1e-6);
  }
  SUBCASE("time reversal returns positions to 1e-10 relative") {
    auto st = make_state({-1.1, 0.2, 0.9, 2.3});
    const auto start = st.positions;
    std::vector<double> vel{0.1, -0.2, 0.15, 0.0};
    DynamicsSettings settings;
    settings.dt = 1e-3;
    const auto u = ExternalPotential::harmonic(1.0);
    for (int i = 0; i < 500; ++i) step_dynamics(st, vel, u, settings);
    for (auto& v : vel) v = -v;
    for (int i = 0; i < 500; ++i) step_dynamics(st, vel, u, settings);
    for (int k = 0; k < st.n; ++k)
      CHECK(st.pos(k, 0) == doctest::Approx(start[k]).epsilon(1e-10));
  }
}

TEST_CASE("relaxation to stationary configurations") {
  SUBCASE("N=2 harmonic: members converge toward the origin") {
    auto st = make_state({-0.8, 0.9});
    st.cutoffs.epsilon_min = 0.05;
    const auto rr = relax_to_stationary(st, ExternalPotential::harmonic(1.0), 2.0, 1e-7, 100000);
    // no three-body term: the trap pulls both members inward until the
    // epsilon_min guard stalls the approach near the origin
    CHECK(std::abs(rr.state.pos(0, 0)) < 0.1);
    CHECK(std::abs(rr.state.pos(1, 0)) < 0.1);
    CHECK(rr.state.min_pair_separation() >= 0.05);
  }
  SUBCASE("N=3 harmonic: symmetric equilibrium matches the 1-parameter oracle") {
    auto st = make_state({-0.3, 0.02, 0.35});
    const auto rr = relax_to_stationary(st, ExternalPotential::harmonic(1.0), 2.0, 1e-9, 200000);
    REQUIRE(rr.converged);
    std::vector<double> x(rr.state.positions);
    std::sort(x.begin(), x.end());
    CHECK(std::abs(x[1]) < 1e-6);
    CHECK(x[2] == doctest::Approx(-x[0]).epsilon(1e-6));

    // oracle: scan E(s) = s^2 + 1/(24 s^2) over symmetric configurations
    double best_s = 0.0, best_e = 1e300;
    for (double s = 0.05; s < 2.0; s += 1e-5) {
      const double e = s * s + 1.0 / (24.0 * s * s);
      if (e < best_e) {
        best_e = e;
        best_s = s;
      }
    }
    CHECK(x[2] == doctest::Approx(best_s).epsilon(1e-3));
    CHECK(best_s == doctest::Approx(std::pow(1.0 / 24.0, 0.25)).epsilon(1e-3));
  }
  SUBCASE("relaxation is permutation-covariant") {
    auto a = make_state({-0.4, 0.1, 0.5});
    auto b = make_state({0.5, 0.1, -0.4});  // relabeled
    const auto ra = relax_to_stationary(a, ExternalPotential::harmonic(1.0), 2.0, 1e-9);
    const auto rb = relax_to_stationary(b, ExternalPotential::harmonic(1.0), 2.0, 1e-9);
    CHECK(ra.state.pos(0, 0) == doctest::Approx(rb.state.pos(2, 0)).epsilon(1e-9));
    CHECK(ra.state.pos(2, 0) == doctest::Approx(rb.state.pos(0, 0)).epsilon(1e-9));
  }
  SUBCASE("gamma <= 0 rejected") {
    auto st = make_state({0.0, 1.0});
    CHECK_THROWS_AS(relax_to_stationary(st, ExternalPotential::zero(), 0.0, 1e-6),
                    std::invalid_argument);
  }
}

TEST_CASE("equilibration metric") {
  SUBCASE("pinned member vs uniform reference: TV near 1 - bin share") {
    std::vector<double> traj(1000, 0.5);  // stuck at one point
    const auto series = equilibration_metric(
        traj, [](double) { return 1.0; }, 0.0, 1.0, 40, 10);
    for (double tv : series) CHECK(tv == doctest::Approx(1.0 - 1.0 / 40.0).epsilon(1e-9));
  }
  SUBCASE("iid samples from the reference shrink like sqrt(bins/samples)") {
    Rng rng(9);
    std::vector<double> traj(20000);
    for (auto& x : traj) x = rng.uniform();
    const auto series = equilibration_metric(
        traj, [](double) { return 1.0; }, 0.0, 1.0, 40, 10);
    const double scale = std::sqrt(40.0 / (2.0 * M_PI * 20000.0));
    CHECK(series.back() < 3.0 * scale);
    CHECK(series.back() < series.front());
  }
  SUBCASE("empty trajectory rejected") {
    CHECK_THROWS_AS(equilibration_metric({}, [](double) { return 1.0; }, 0.0, 1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("phase tracking holds |w| = 1 and is off by default") {
  auto st = make_state({-0.9, 0.1, 1.2});
  std::vector<double> vel{0.2, 0.0, -0.1};
  DynamicsSettings settings;
  settings.dt = 5e-3;
  settings.phase_tracking = true;
  for (int i = 0; i < 200; ++i) step_dynamics(st, vel, ExternalPotential::harmonic(1.0), settings);
  for (const auto& w : st.phases) CHECK(std::abs(std::abs(w) - 1.0) < 1e-12);

  auto st2 = make_state({-0.9, 0.1, 1.2});
  std::vector<double> vel2{0.2, 0.0, -0.1};
  DynamicsSettings plain;
  plain.dt = 5e-3;
  step_dynamics(st2, vel2, ExternalPotential::harmonic(1.0), plain);
  CHECK(st2.phases[0] == std::complex<double>(1.0, 0.0));
}

TEST_CASE("trajectory CSV stream has the documented columns") {
  auto st = make_state({-0.5, 0.6, 1.4});
  std::vector<double> vel(3, 0.0);
  DynamicsSettings settings;
  settings.dt = 1e-3;
  TrajectoryOptions opts;
  opts.steps = 20;
  opts.sample_every = 5;
  const auto rec = run_trajectory(st, vel, ExternalPotential::harmonic(1.0), settings, opts);
  REQUIRE(rec.times.size() == 4);
  write_trajectory_csv(rec, 1, "traj_test.csv");
  std::ifstream in("traj_test.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "# schema=1");
  std::getline(in, line);
  CHECK(line == "step,t,k,x0,kinetic,variety,external,total");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4 * 3);
}
