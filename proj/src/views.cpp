#include "maxvar/views.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace maxvar {

double ViewSet::entry(int i, int k, int a) const {
  const auto lo = targets.begin() + static_cast<std::ptrdiff_t>(offsets[i]);
  const auto hi = targets.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]);
  const auto it = std::lower_bound(lo, hi, k);
  if (it == hi || *it != k) return 0.0;
  const std::size_t idx = static_cast<std::size_t>(it - targets.begin());
  return comps[idx * dim + a];
}

bool ViewSet::present(int i, int k) const {
  const auto lo = targets.begin() + static_cast<std::ptrdiff_t>(offsets[i]);
  const auto hi = targets.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]);
  return std::binary_search(lo, hi, k);
}

namespace {

void check_pair(double dist, double eps, int i, int k) {
  if (dist < eps)
    throw DegenerateConfiguration("pair (" + std::to_string(i) + "," + std::to_string(k) +
                                  ") at separation " + std::to_string(dist) +
                                  " < epsilon_min " + std::to_string(eps));
}

}  // namespace

ViewSet compute_views(const EnsembleState& state) {
  const int n = state.n, d = state.dim;
  const double R = state.cutoffs.horizon;
  const double eps = state.cutoffs.epsilon_min;

  ViewSet vs;
  vs.n = n;
  vs.dim = d;
  vs.horizon = R;
  vs.offsets.assign(n + 1, 0);
  if (n < 2) return vs;

  if (d == 1 && std::isfinite(R)) {
    // Sorted sliding window: each viewer's in-horizon neighbours are a
    // contiguous run in position order.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return state.pos(a, 0) < state.pos(b, 0); });
    std::vector<double> x(n);
    for (int r = 0; r < n; ++r) x[r] = state.pos(order[r], 0);
    for (int r = 1; r < n; ++r) check_pair(x[r] - x[r - 1], eps, order[r - 1], order[r]);

    std::vector<std::vector<std::pair<int, double>>> rows(n);
    int lo = 0, hi = 0;
    for (int r = 0; r < n; ++r) {
      while (x[r] - x[lo] >= R) ++lo;
      if (hi < r + 1) hi = r + 1;
      while (hi < n && x[hi] - x[r] < R) ++hi;
      auto& row = rows[order[r]];
      row.reserve(hi - lo - 1);
      for (int q = lo; q < hi; ++q) {
        if (q == r) continue;
        const double dx = x[r] - x[q];
        row.emplace_back(order[q], 1.0 / dx);  // (x_i - x_k)/dx^2 = 1/dx
      }
      std::sort(row.begin(), row.end());
    }
    std::size_t total = 0;
    for (int i = 0; i < n; ++i) {
      vs.offsets[i] = total;
      total += rows[i].size();
    }
    vs.offsets[n] = total;
    vs.targets.resize(total);
    vs.comps.resize(total);
    std::size_t w = 0;
    for (int i = 0; i < n; ++i)
      for (const auto& [k, v] : rows[i]) {
        vs.targets[w] = k;
        vs.comps[w] = v;
        ++w;
      }
    return vs;
  }

  // Generic path: all ordered pairs, horizon filtered.
  std::vector<std::vector<int>> rows(n);
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) {
      const double dist = state.pair_distance(i, k);
      check_pair(dist, eps, i, k);
      if (dist < R) {
        rows[i].push_back(k);
        rows[k].push_back(i);
      }
    }
  std::size_t total = 0;
  for (int i = 0; i < n; ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    vs.offsets[i] = total;
    total += rows[i].size();
  }
  vs.offsets[n] = total;
  vs.targets.resize(total);
  vs.comps.resize(total * d);
  std::size_t w = 0;
  for (int i = 0; i < n; ++i)
    for (int k : rows[i]) {
      double s2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double dx = state.pos(i, a) - state.pos(k, a);
        s2 += dx * dx;
      }
      vs.targets[w] = k;
      for (int a = 0; a < d; ++a)
        vs.comps[w * d + a] = (state.pos(i, a) - state.pos(k, a)) / s2;
      ++w;
    }
  return vs;
}

}  // namespace maxvar
