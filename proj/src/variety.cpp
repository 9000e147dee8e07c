#include "maxvar/variety.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

namespace maxvar {

namespace {

// Sorted order of a 1D state; identity order otherwise.
std::vector<int> position_order(const EnsembleState& state) {
  std::vector<int> order(state.n);
  std::iota(order.begin(), order.end(), 0);
  if (state.dim == 1)
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return state.pos(a, 0) < state.pos(b, 0); });
  return order;
}

void check_min_separation(const EnsembleState& state) {
  const double eps = state.cutoffs.epsilon_min;
  if (eps <= 0.0 || state.n < 2) return;
  const double m = state.min_pair_separation();
  if (m < eps)
    throw DegenerateConfiguration("minimum pair separation " + std::to_string(m) +
                                  " < epsilon_min " + std::to_string(eps));
}

template <typename Fn>
void parallel_over_members(int n, Fn&& body) {
  const unsigned hw = std::thread::hardware_concurrency();
  if (n < 2048 || hw < 2) {
    for (int k = 0; k < n; ++k) body(k);
    return;
  }
  const int nthreads = static_cast<int>(std::min<unsigned>(hw, 8));
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      for (int k = t; k < n; k += nthreads) body(k);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

namespace {

// Canonical member order (lexicographic by coordinates): accumulation in this
// order makes every sum independent of member labels, so permutation
// invariance holds bitwise.
std::vector<int> canonical_order(const EnsembleState& state) {
  std::vector<int> order(state.n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int c = 0; c < state.dim; ++c) {
      if (state.pos(a, c) != state.pos(b, c)) return state.pos(a, c) < state.pos(b, c);
    }
    return false;
  });
  return order;
}

}  // namespace

MemberSums member_view_sums(const EnsembleState& state) {
  check_min_separation(state);
  const int n = state.n, d = state.dim;
  const double R = state.cutoffs.horizon;
  MemberSums ms;
  ms.P.assign(static_cast<std::size_t>(n) * d, 0.0);
  ms.Q.assign(n, 0.0);
  ms.count.assign(n, 0);
  if (n < 2) return ms;

  if (d == 1 && std::isfinite(R)) {
    const auto order = position_order(state);
    std::vector<double> x(n);
    for (int r = 0; r < n; ++r) x[r] = state.pos(order[r], 0);
    parallel_over_members(n, [&](int r) {
      const int k = order[r];
      double p = 0.0, q = 0.0;
      int c = 0;
      for (int s = r - 1; s >= 0 && x[r] - x[s] < R; --s) {
        const double inv = 1.0 / (x[s] - x[r]);
        p += inv;
        q += inv * inv;
        ++c;
      }
      for (int s = r + 1; s < n && x[s] - x[r] < R; ++s) {
        const double inv = 1.0 / (x[s] - x[r]);
        p += inv;
        q += inv * inv;
        ++c;
      }
      ms.P[k] = p;  // P_k = sum over viewers i of V_i^{k} = (x_i - x_k)/s^2
      ms.Q[k] = q;
      ms.count[k] = c;
    });
    return ms;
  }

  const std::vector<int> order = canonical_order(state);
  parallel_over_members(n, [&](int k) {
    double* pk = &ms.P[static_cast<std::size_t>(k) * d];
    double q = 0.0;
    int c = 0;
    for (int idx = 0; idx < n; ++idx) {
      const int i = order[idx];
      if (i == k) continue;
      double s2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double dx = state.pos(i, a) - state.pos(k, a);
        s2 += dx * dx;
      }
      if (std::isfinite(R) && s2 >= R * R) continue;
      for (int a = 0; a < d; ++a) pk[a] += (state.pos(i, a) - state.pos(k, a)) / s2;
      q += 1.0 / s2;
      ++c;
    }
    ms.Q[k] = q;
    ms.count[k] = c;
  });
  return ms;
}

double distinctiveness(const ViewSet& views, int i, int j) {
  if (i == j) throw std::invalid_argument("distinctiveness: i == j");
  const int n = views.n, d = views.dim;
  // Merge the two sorted target rows; absent views contribute zero.
  std::size_t pi = views.offsets[i], ei = views.offsets[i + 1];
  std::size_t pj = views.offsets[j], ej = views.offsets[j + 1];
  double acc = 0.0;
  auto add_sq = [&](std::size_t ent_i, std::size_t ent_j, bool has_i, bool has_j) {
    for (int a = 0; a < d; ++a) {
      const double vi = has_i ? views.comps[ent_i * d + a] : 0.0;
      const double vj = has_j ? views.comps[ent_j * d + a] : 0.0;
      const double diff = vi - vj;
      acc += diff * diff;
    }
  };
  while (pi < ei || pj < ej) {
    const int ki = (pi < ei) ? views.targets[pi] : n;
    const int kj = (pj < ej) ? views.targets[pj] : n;
    if (ki < kj) {
      if (ki != i && ki != j) add_sq(pi, 0, true, false);
      ++pi;
    } else if (kj < ki) {
      if (kj != i && kj != j) add_sq(0, pj, false, true);
      ++pj;
    } else {
      if (ki != i && ki != j) add_sq(pi, pj, true, true);
      ++pi;
      ++pj;
    }
  }
  return acc / n;
}

VarietyBreakdown variety(const EnsembleState& state, bool with_pairs) {
  const int n = state.n;
  VarietyBreakdown out;
  out.local.assign(n, 0.0);
  // with fewer than three members every (i, j, k) triple is empty
  if (n <= 2) {
    if (with_pairs && n == 2) {
      out.pair.assign(1, 0.0);
      out.has_pairs = true;
    }
    return out;
  }

  const MemberSums ms = member_view_sums(state);
  const int d = state.dim;
  for (int k = 0; k < n; ++k) {
    double p2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double pa = ms.P[static_cast<std::size_t>(k) * d + a];
      p2 += pa * pa;
    }
    out.local[k] = (2.0 * (n - 1) * ms.Q[k] - 2.0 * p2) / (static_cast<double>(n) * n);
  }
  const std::vector<int> order = canonical_order(state);
  double total = 0.0;
  for (int k : order) total += out.local[k];  // canonical order, label-independent
  out.total = state.cutoffs.A * total / n;

  if (with_pairs) {
    if (n > 1024) throw std::invalid_argument("variety: pair matrix requested for N > 1024");
    const ViewSet vs = compute_views(state);
    out.pair.resize(static_cast<std::size_t>(n) * (n - 1) / 2);
    std::size_t w = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) out.pair[w++] = distinctiveness(vs, i, j);
    out.has_pairs = true;
  }
  return out;
}

double variety_total(const EnsembleState& state) {
  const int n = state.n, d = state.dim;
  if (n <= 2) return 0.0;
  const MemberSums ms = member_view_sums(state);
  const std::vector<int> order = canonical_order(state);
  double total = 0.0;
  for (int k : order) {
    double p2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double pa = ms.P[static_cast<std::size_t>(k) * d + a];
      p2 += pa * pa;
    }
    total += 2.0 * (n - 1) * ms.Q[k] - 2.0 * p2;
  }
  return state.cutoffs.A * total / (static_cast<double>(n) * n * n);
}

double variety_potential(const EnsembleState& state) {
  const auto& c = state.constants;
  return -(c.hbar * c.hbar / (8.0 * c.mass)) * variety_total(state);
}

GradientResult variety_gradient(const EnsembleState& state) {
  const int n = state.n, d = state.dim;
  const double R = state.cutoffs.horizon;
  const double eps = state.cutoffs.epsilon_min;
  GradientResult res;
  res.grad.assign(static_cast<std::size_t>(n) * d, 0.0);
  if (n <= 2) return res;  // the variety is identically zero there

  const MemberSums ms = member_view_sums(state);
  const std::vector<int> order = canonical_order(state);
  const double pref =
      -(state.constants.hbar * state.constants.hbar / (8.0 * state.constants.mass)) *
      (2.0 * state.cutoffs.A / (static_cast<double>(n) * n * n));

  std::atomic<bool> warn{false};
  parallel_over_members(n, [&](int m) {
    double* g = &res.grad[static_cast<std::size_t>(m) * d];
    const double* pm = &ms.P[static_cast<std::size_t>(m) * d];
    for (int idx = 0; idx < n; ++idx) {
      const int j = order[idx];
      if (j == m) continue;
      double s2 = 0.0;
      double delta[3];
      for (int a = 0; a < d; ++a) {
        delta[a] = state.pos(m, a) - state.pos(j, a);
        s2 += delta[a] * delta[a];
      }
      const double s = std::sqrt(s2);
      if (std::isfinite(R)) {
        if (std::abs(s - R) < eps) warn.store(true, std::memory_order_relaxed);
        if (s >= R) continue;
      }
      const double* pj = &ms.P[static_cast<std::size_t>(j) * d];
      // (P_j - P_m)^a T^{ab},  T^{ab} = delta^{ab}/s^2 - 2 D^a D^b / s^4
      double dp_dot_delta = 0.0;
      for (int a = 0; a < d; ++a) dp_dot_delta += (pj[a] - pm[a]) * delta[a];
      const double inv2 = 1.0 / s2, inv4 = inv2 * inv2;
      for (int b = 0; b < d; ++b) {
        const double dq_term = -4.0 * (n - 1) * delta[b] * inv4;
        const double dp_term = -2.0 * ((pj[b] - pm[b]) * inv2 - 2.0 * dp_dot_delta * delta[b] * inv4);
        g[b] += pref * (dq_term + dp_term);
      }
    }
  });
  res.near_horizon_warning = warn.load();
  return res;
}

double three_body_potential(double x1, double x2, double x3, const PhysicalConstants& constants) {
  const double d21 = std::abs(x2 - x1);
  const double d32 = std::abs(x3 - x2);
  const double d13 = std::abs(x1 - x3);
  if (d21 == 0.0 || d32 == 0.0 || d13 == 0.0)
    throw DegenerateConfiguration("three_body_potential: coincident pair");
  const double t1 = 1.0 / d32 - 1.0 / d21;
  const double t2 = 1.0 / d13 - 1.0 / d32;
  const double t3 = 1.0 / d21 - 1.0 / d13;
  return constants.hbar * constants.hbar / (8.0 * constants.mass) * (t1 * t1 + t2 * t2 + t3 * t3);
}

double variety_reference(const EnsembleState& state) {
  const int n = state.n, d = state.dim;
  if (n < 2) return 0.0;
  check_min_separation(state);
  const double R = state.cutoffs.horizon;
  auto view = [&](int i, int k, double* v) {
    double s2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double dx = state.pos(i, a) - state.pos(k, a);
      s2 += dx * dx;
    }
    if (std::isfinite(R) && s2 >= R * R) {
      for (int a = 0; a < d; ++a) v[a] = 0.0;
      return;
    }
    for (int a = 0; a < d; ++a) v[a] = (state.pos(i, a) - state.pos(k, a)) / s2;
  };
  double total = 0.0;
  double vi[3], vj[3];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      for (int k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        view(i, k, vi);
        view(j, k, vj);
        for (int a = 0; a < d; ++a) {
          const double diff = vi[a] - vj[a];
          total += diff * diff;
        }
      }
    }
  return state.cutoffs.A * total / (static_cast<double>(n) * n * n);
}

}  // namespace maxvar
