#pragma once

#include <stdexcept>
#include <vector>

#include "maxvar/ensemble.hpp"

namespace maxvar {

/// Thrown when a pair separation falls below epsilon_min and a view magnitude
/// would exceed 1/epsilon_min.
struct DegenerateConfiguration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Cutoff-pruned view vectors V[i][k][a] = (x_i - x_k)_a / |x_i - x_k|^2 for
/// ordered pairs i != k with |x_i - x_k| < R (strict; ties excluded). Absent
/// entries mean "outside horizon" and read back as zero. Entries for each
/// viewer i are stored sorted by target k, so the structure is antisymmetric
/// by construction: entry(i,k) = -entry(k,i).
struct ViewSet {
  int n = 0;
  int dim = 1;
  double horizon = 0.0;
  std::vector<std::size_t> offsets;  // n+1, CSR row starts
  std::vector<int> targets;          // viewed member k per entry
  std::vector<double> comps;         // entry components, dim-major per entry

  std::size_t entry_count() const { return targets.size(); }

  /// Component a of V_i^k; 0 if the pair is outside the horizon.
  double entry(int i, int k, int a) const;

  /// True if member k is within viewer i's horizon.
  bool present(int i, int k) const;
};

ViewSet compute_views(const EnsembleState& state);

}  // namespace maxvar
