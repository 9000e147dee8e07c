#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "maxvar/continuum.hpp"
#include "maxvar/ensemble.hpp"

using namespace maxvar;

namespace {

ContinuumField gaussian_field(double sigma, double halfwidth = 0.0, int n = 4001) {
  const double w = (halfwidth > 0.0) ? halfwidth : 10.0 * sigma;
  return ContinuumField::from_spec(DensitySpec::gaussian(0.0, sigma), -w, w, n);
}

// closed-form bracket of the correction potential for a centered gaussian:
// [-3 u^4 + 4 u^2 + 1] / sigma^4 with u = x/sigma
double gaussian_bracket(double x, double sigma) {
  const double u = x / sigma;
  return (-3.0 * u * u * u * u + 4.0 * u * u + 1.0) / (sigma * sigma * sigma * sigma);
}

}  // namespace

TEST_CASE("nearest-neighbour density estimates") {
  SUBCASE("equally spaced points reproduce the uniform density") {
    EnsembleState st;
    st.n = 100;
    st.dim = 1;
    st.phases.assign(100, {1.0, 0.0});
    st.positions.resize(100);
    for (int k = 0; k < 100; ++k) st.positions[k] = 0.005 + k * 0.01;
    const auto est = nn_density(st);
    for (int k = 1; k + 1 < 100; ++k) CHECK(est[k] == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("two points at gap g: edge estimate 1/(2g)") {
    EnsembleState st;
    st.n = 2;
    st.dim = 1;
    st.phases.assign(2, {1.0, 0.0});
    st.positions = {0.0, 0.25};
    const auto est = nn_density(st);
    CHECK(est[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(est[1] == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("gaussian sample: interior estimates within 15% for 90% of members") {
    // Holds for ordered ensembles. For i.i.d. samples the symmetrized-gap
    // estimator's relative error is Gamma(2)-distributed and only ~16% of
    // members can land within 15% no matter how large N is.
    const auto spec = DensitySpec::gaussian(0.0, 1.0);
    const auto st = sample_ensemble(spec, 10000, 2, {}, {}, SampleMode::Systematic);
    const auto est = nn_density(st);
    int good = 0, interior = 0;
    for (int k = 0; k < st.n; ++k) {
      const double x = st.pos(k, 0);
      if (std::abs(x) > 2.0) continue;
      ++interior;
      if (std::abs(est[k] - spec.pdf(x)) <= 0.15 * spec.pdf(x)) ++good;
    }
    CHECK(static_cast<double>(good) / interior >= 0.90);
  }
  SUBCASE("N < 2 rejected") {
    EnsembleState st;
    st.n = 1;
    st.dim = 1;
    st.positions = {0.0};
    st.phases.assign(1, {1.0, 0.0});
    CHECK_THROWS_AS(nn_density(st), std::invalid_argument);
  }
}

TEST_CASE("cutoff scaling") {
  SUBCASE("uniform density: a = 1/(N rho)") {
    const auto field = ContinuumField::from_spec(DensitySpec::uniform(0.0, 1.0), 0.0, 1.0, 101);
    const auto cs = cutoff_scaling(10000, field, 0.01);
    for (std::size_t i = 0; i < cs.a.size(); ++i) {
      CHECK(cs.defined[i]);
      CHECK(cs.a[i] == doctest::Approx(1e-4).epsilon(1e-9));
    }
    CHECK(cs.omega == 2.0);
  }
  SUBCASE("r' = N^{1/d} R") {
    const auto field = gaussian_field(1.0);
    CHECK(cutoff_scaling(100, field, 0.1).r_prime == doctest::Approx(10.0));
    // quadrupling N at fixed r' quarters R (d=1)
    CHECK(cutoff_scaling(400, field, 0.1 / 4.0).r_prime == doctest::Approx(10.0));
  }
  SUBCASE("zero-density regions are flagged") {
    std::vector<double> grid(101), vals(101);
    for (int i = 0; i <= 100; ++i) {
      grid[i] = i * 0.01;
      vals[i] = (i < 50) ? 2.0 : 0.0;
    }
    // renormalize to integrate to 1
    double integral = 0.0;
    for (int i = 0; i <= 100; ++i) integral += ((i == 0 || i == 100) ? 0.5 : 1.0) * vals[i] * 0.01;
    for (auto& v : vals) v /= integral;
    ContinuumField f;
    f.z = grid;
    f.rho = vals;
    f.h = 0.01;
    const auto cs = cutoff_scaling(100, f, 0.05);
    CHECK(!cs.defined.empty());
    CHECK(cs.defined.front() == 1);
    CHECK(cs.defined.back() == 0);
  }
}

TEST_CASE("fisher functional closed forms") {
  CHECK(fisher_functional(gaussian_field(1.0)) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(fisher_functional(gaussian_field(2.0)) == doctest::Approx(0.25).epsilon(1e-3));

  SUBCASE("uniform density has zero fisher information in the interior") {
    const auto field = ContinuumField::from_spec(DensitySpec::uniform(0.0, 1.0), 0.0, 1.0, 501);
    CHECK(fisher_functional(field) < 1e-12);
  }
  SUBCASE("translation invariance and dilation scaling at 1e-6") {
    const auto a = ContinuumField::from_spec(DensitySpec::gaussian(3.0, 1.3), -10.0, 16.0, 8001);
    const auto b = ContinuumField::from_spec(DensitySpec::gaussian(0.0, 1.3), -13.0, 13.0, 8001);
    CHECK(fisher_functional(a) == doctest::Approx(fisher_functional(b)).epsilon(1e-6));
    const double lam = 2.0;
    const auto c = ContinuumField::from_spec(DensitySpec::gaussian(0.0, 1.3 * lam), -26.0, 26.0, 16001);
    CHECK(fisher_functional(c) ==
          doctest::Approx(fisher_functional(b) / (lam * lam)).epsilon(1e-6));
  }
}

TEST_CASE("continuum variety decomposition") {
  SUBCASE("uniform density: horizon term only") {
    const auto field = ContinuumField::from_spec(DensitySpec::uniform(0.0, 1.0), 0.0, 1.0, 501);
    const auto cs = cutoff_scaling(1000, field, 0.05);
    const auto cv = continuum_variety(field, cs, 1000);
    CHECK(cv.horizon_term == doctest::Approx(400.0));
    CHECK(std::abs(cv.fisher_term) < 1e-10);
    CHECK(std::abs(cv.correction_term) < 1e-10);
  }
  SUBCASE("gaussian: fisher term is minus the fisher functional, exactly shared") {
    const auto field = gaussian_field(1.0);
    const auto cs = cutoff_scaling(10000, field, 10.0 / 10000.0);
    const auto cv = continuum_variety(field, cs, 10000);
    CHECK(cv.fisher_term == doctest::Approx(-fisher_functional(field)).epsilon(1e-12));
    CHECK(cv.correction_term > 0.0);
  }
  SUBCASE("correction term scales as 1/N^2 at fixed r'") {
    const auto field = gaussian_field(1.0);
    const double rp = 10.0;
    const auto c1 = continuum_variety(field, cutoff_scaling(1000, field, rp / 1000.0), 1000);
    const auto c2 = continuum_variety(field, cutoff_scaling(2000, field, rp / 2000.0), 2000);
    CHECK(c2.correction_term == doctest::Approx(c1.correction_term / 4.0).epsilon(1e-9));
  }
}

TEST_CASE("correction potential") {
  SUBCASE("uniform density gives an identically zero field") {
    const auto field = ContinuumField::from_spec(DensitySpec::uniform(0.0, 1.0), 0.0, 1.0, 501);
    const auto cf = correction_potential(field, 100, 1.0);
    for (std::size_t i = 8; i + 8 < cf.value.size(); ++i) CHECK(std::abs(cf.value[i]) < 1e-9);
  }
  SUBCASE("gaussian matches the closed-form bracket to 1e-6 in |x| <= 2 sigma") {
    const auto field = gaussian_field(1.0, 8.0, 16001);
    const double n = 100.0, rp = 1.0;
    const auto cf = correction_potential(field, n, rp);
    const double pref = rp * rp / (n * n) * (1.0 / 3.0) * 0.5;
    for (std::size_t i = 0; i < field.z.size(); i += 50) {
      const double x = field.z[i];
      if (std::abs(x) > 2.0) continue;
      const double expected = pref * gaussian_bracket(x, 1.0);
      CHECK(cf.value[i] == doctest::Approx(expected).epsilon(1e-6));
    }
  }
  SUBCASE("prefactor: explicit N^{-2/d} scaling at d=1 and d=2") {
    const auto field = gaussian_field(1.0, 8.0, 8001);
    const auto c1 = correction_potential(field, 100, 1.0);
    const auto c4 = correction_potential(field, 400, 1.0);
    const std::size_t mid = field.z.size() / 2;
    // d=1: (4N)^{-2} = N^{-2}/16
    CHECK(c4.value[mid] == doctest::Approx(c1.value[mid] / 16.0).epsilon(1e-12));
    // d=2: (4N)^{-1} = N^{-1}/4
    const auto d1 = correction_potential(field, 100, 1.0, 2);
    const auto d4 = correction_potential(field, 400, 1.0, 2);
    CHECK(d4.value[mid] == doctest::Approx(d1.value[mid] / 4.0).epsilon(1e-12));
  }
  SUBCASE("too-coarse grids are rejected") {
    const auto field = gaussian_field(1.0, 8.0, 33);
    CHECK_THROWS_AS(correction_potential(field, 100, 1.0), std::invalid_argument);
  }
  SUBCASE("grid convergence: windowed quadrature of the field is Richardson-consistent") {
    // integrate over the fixed window |x| <= 4 (grid-commensurate on all
    // three grids) so edge-bracket growth does not pollute the order check
    const auto f1 = gaussian_field(1.0, 8.0, 2001);
    const auto f2 = gaussian_field(1.0, 8.0, 4001);
    const auto f3 = gaussian_field(1.0, 8.0, 8001);
    auto integral = [](const ContinuumField& f) {
      const auto cf = correction_potential(f, 100, 1.0);
      double acc = 0.0;
      for (std::size_t i = 0; i < cf.value.size(); ++i) {
        if (std::abs(f.z[i]) > 4.0 + 1e-12) continue;
        const bool edge = std::abs(std::abs(f.z[i]) - 4.0) < 1e-12;
        acc += (edge ? 0.5 : 1.0) * cf.value[i];
      }
      return acc * f.h;
    };
    const double i1 = integral(f1), i2 = integral(f2), i3 = integral(f3);
    const double ratio = (i1 - i2) / (i2 - i3);
    CHECK(ratio > 3.0);  // at least 2nd order under refinement
    // halving h changes the result by no more than 4x the finer change
    CHECK(std::abs(i2 - i3) <= 4.0 * std::abs(i1 - i2));
  }
}

TEST_CASE("energy shift") {
  const auto field = gaussian_field(1.0, 8.0, 8001);
  SUBCASE("zero correction gives zero shift") {
    CorrectionField cf;
    cf.z = field.z;
    cf.value.assign(field.z.size(), 0.0);
    CHECK(energy_shift(field.rho, cf, field.h) == 0.0);
  }
  SUBCASE("closed form for the gaussian: dE = -(8/3) r'^2/N^2 at sigma_rho^2 = 1/2") {
    // ground-state density of the unit harmonic trap
    const auto rho_field = ContinuumField::from_spec(
        DensitySpec::gaussian(0.0, std::sqrt(0.5)), -8.0, 8.0, 16001);
    const double n = 100.0, rp = 1.0;
    const auto cf = correction_potential(rho_field, n, rp);
    const double de = energy_shift(rho_field.rho, cf, rho_field.h);
    CHECK(de == doctest::Approx(-(8.0 / 3.0) * rp * rp / (n * n)).epsilon(1e-4));
  }
  SUBCASE("log-log slope of |dE| vs N is -2") {
    std::vector<double> lx, ly;
    for (double n : {100.0, 1000.0, 10000.0}) {
      const auto cf = correction_potential(field, n, 1.0);
      lx.push_back(std::log(n));
      ly.push_back(std::log(std::abs(energy_shift(field.rho, cf, field.h))));
    }
    const double slope = (ly.back() - ly.front()) / (lx.back() - lx.front());
    CHECK(slope == doctest::Approx(-2.0).epsilon(1e-10));
  }
}

TEST_CASE("normalization constants") {
  SUBCASE("hand values at d=1, r=11, N=100") {
    const auto nc = normalization_constants(100, 11, 1);
    CHECK(nc.Z_KE == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(nc.Z_0 == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(nc.Z_V == doctest::Approx(100.0 * 100.0 / (4.0 * 100.0) / 1e6).epsilon(1e-12));
  }
  SUBCASE("d=1: Z_0 = d * Z_KE") {
    const auto nc = normalization_constants(64, 7, 1);
    CHECK(nc.Z_0 == doctest::Approx(nc.Z_KE).epsilon(1e-14));
  }
  SUBCASE("exact vs stated approximate form differ by 2 r^{2d}/(r^d-1)^2") {
    // the stated large-r form carries an extra factor 1/2 relative to the
    // exact formula; the ratio tends to 2, not 1 (2.42 at r=11)
    const double exact = normalization_constants(100, 11, 1).Z_V;
    const double approx = zv_approximate(100, 11, 1);
    CHECK(exact / approx == doctest::Approx(2.0 * 121.0 / 100.0).epsilon(1e-12));
    const double exact_big = normalization_constants(100, 1e4, 1).Z_V;
    CHECK(exact_big / zv_approximate(100, 1e4, 1) == doctest::Approx(2.0).epsilon(1e-3));
  }
  SUBCASE("r <= 1 rejected") {
    CHECK_THROWS_AS(normalization_constants(100, 1.0, 1), std::invalid_argument);
  }
}

TEST_CASE("discrete vs continuum convergence (smoke, small N)") {
  const auto spec = DensitySpec::gaussian(0.0, 1.0);
  const auto table = discrete_vs_continuum(spec, {250, 1000}, 40.0, {1, 2, 3, 4, 5},
                                           SampleMode::Systematic);
  REQUIRE(table.rows.size() == 10);
  REQUIRE(table.median_discrepancy.size() == 2);
  CHECK(table.median_discrepancy[1] < table.median_discrepancy[0]);
  CHECK(table.median_discrepancy[1] < 0.05);
  for (const auto& row : table.rows) {
    CHECK(row.discrete_value > 0.0);
    CHECK(row.continuum_value > 0.0);
  }
  SUBCASE("uniform density: discrete fisher estimate consistent with zero") {
    const auto u = DensitySpec::uniform(0.0, 1.0);
    const auto t = discrete_vs_continuum(u, {1000}, 40.0, {1}, SampleMode::Systematic, 0.9);
    // fisher target of the uniform interior is ~0; compare absolute values
    CHECK(std::abs(t.rows[0].discrete_value) < 1e-3);
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(discrete_vs_continuum(spec, {1000, 250}, 40.0, {1}), std::invalid_argument);
    CHECK_THROWS_AS(discrete_vs_continuum(spec, {}, 40.0, {1}), std::invalid_argument);
  }
}

TEST_CASE("kinetic-energy continuum check (smoke)") {
  const auto spec = DensitySpec::gaussian(0.0, 1.0);
  SUBCASE("constant S gives zero on both sides") {
    const auto t = ke_continuum_check(spec, [](double) { return 4.2; }, {200}, 20.0, {1});
    CHECK(t.rows[0].discrete_value == doctest::Approx(0.0));
    CHECK(t.rows[0].continuum_value == doctest::Approx(0.0));
  }
  SUBCASE("linear S targets p0^2/2m and tightens with N") {
    const double p0 = 0.3;
    const auto t = ke_continuum_check(
        spec, [&](double x) { return p0 * x; }, {250, 1000}, 20.0, {1, 2, 3, 4, 5});
    CHECK(t.rows[0].continuum_value == doctest::Approx(p0 * p0 / 2.0).epsilon(1e-6));
    CHECK(t.median_discrepancy[1] < 0.05);
  }
  SUBCASE("sinusoidal S: estimator expectation has the rho^2 pair weighting") {
    const auto t = ke_continuum_check(
        spec, [](double x) { return std::sin(x); }, {1000, 4000}, 20.0, {1, 2, 3, 4, 5});
    // reported target: int rho cos^2 / 2m = (1 + e^{-2})/4 for sigma = 1
    CHECK(t.rows[0].continuum_value == doctest::Approx(0.25 * (1.0 + std::exp(-2.0))).epsilon(1e-6));
    // The globally normalized pair sum weights each location by rho^2 (pair
    // density), so its large-N limit is  int rho^2 (S')^2 / int rho^2 / 2m,
    // which for S = sin and sigma = 1 is (1 + e^{-1})/4 / ... evaluated below.
    // For linear S the two weightings coincide and the reported target is
    // exact; here they differ by the factor (1+e^-1)/(1+e^-2) = 1.2048.
    const double t_rho2 = 0.25 * (1.0 + std::exp(-1.0));
    for (const auto& row : t.rows) {
      if (row.n != 4000) continue;
      CHECK(row.discrete_value == doctest::Approx(t_rho2).epsilon(0.05));
    }
  }
}

TEST_CASE("kde field integrates to one and tracks the sample density") {
  const auto st = sample_ensemble(DensitySpec::gaussian(0.0, 1.0), 4000, 8);
  const auto field = kde_from_ensemble(st, -6.0, 6.0, 1201);
  field.validate();
  const auto spec = DensitySpec::gaussian(0.0, 1.0);
  for (double x : {-1.0, 0.0, 0.5, 1.5}) {
    const int i = static_cast<int>((x + 6.0) / field.h + 0.5);
    CHECK(field.rho[i] == doctest::Approx(spec.pdf(x)).epsilon(0.1));
  }
}
