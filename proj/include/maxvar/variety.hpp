#pragma once

#include <vector>

#include "maxvar/ensemble.hpp"
#include "maxvar/views.hpp"

namespace maxvar {

/// Total variety, per-member local variety, and (optionally) the pair
/// distinctiveness matrix. total = (A/N) sum_k local[k] holds by
/// construction; the pair aggregation route is cross-checked in tests.
struct VarietyBreakdown {
  double total = 0.0;                 // inverse-length-squared
  std::vector<double> local;          // per-member, same units
  std::vector<double> pair;           // upper-tri I_ij (i<j), row-major; may be empty
  bool has_pairs = false;

  double pair_at(int i, int j, int n) const {
    if (i > j) std::swap(i, j);
    return pair[static_cast<std::size_t>(i) * n - static_cast<std::size_t>(i) * (i + 1) / 2 + (j - i - 1)];
  }
};

/// Per-member view sums over in-horizon neighbours:
///   P[k*dim+a] = sum_i V_i^{ka},  Q[k] = sum_i |V_i^k|^2,  count[k] = #neighbours.
/// These are the building blocks of the variety, its gradient, and the
/// continuum-limit evaluators.
struct MemberSums {
  std::vector<double> P;
  std::vector<double> Q;
  std::vector<int> count;
};

MemberSums member_view_sums(const EnsembleState& state);

/// Distinctiveness of members i and j (zero-filled outside the horizon).
double distinctiveness(const ViewSet& views, int i, int j);

VarietyBreakdown variety(const EnsembleState& state, bool with_pairs = false);

/// Fast total-only path.
double variety_total(const EnsembleState& state);

/// Inter-ensemble potential energy -(hbar^2/8m) * variety; always <= 0.
double variety_potential(const EnsembleState& state);

struct GradientResult {
  std::vector<double> grad;          // n*dim, d(variety_potential)/dx
  bool near_horizon_warning = false; // some pair within epsilon_min of R
};

/// Exact analytic gradient of variety_potential with respect to every
/// coordinate, horizon membership held fixed.
GradientResult variety_gradient(const EnsembleState& state);

/// Closed-form three-member interaction (1D):
/// (hbar^2/8m) [ (1/D32-1/D21)^2 + (1/D13-1/D32)^2 + (1/D21-1/D13)^2 ].
double three_body_potential(double x1, double x2, double x3,
                            const PhysicalConstants& constants = {});

/// Naive triple-loop evaluation of the variety; the oracle for the optimized
/// path. O(N^3 d).
double variety_reference(const EnsembleState& state);

}  // namespace maxvar
