#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairalloc/instance.hpp"
#include "fairalloc/welfare.hpp"

namespace fairalloc {

struct SolveOptions {
  double tol = 1e-8;     // relative duality-gap target
  int max_iters = 20000;
  bool track_plan = true;
};

/// Hybrid program data: fixed past utilities W (absolute units), a tail of
/// free items (row-major rows x n), and the divisor T_total >= rows.
struct SolveRequest {
  const WelfareSpec* spec = nullptr;
  std::span<const double> past_w;    // may be empty (all zeros)
  std::span<const double> tail;      // rows x n
  std::size_t t_total = 0;
  SolveOptions opts;
  std::span<const double> warm_plan;  // optional feasible plan over the tail
};

struct SolveResult {
  std::vector<double> u_star;     // time-averaged
  std::vector<double> beta_star;  // grad log f(u_star)
  AllocationPlan plan;            // over the tail; empty unless tracked
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;  // dual - primal, the certificate
  int iters = 0;
  bool certified = false;
};

namespace detail {

// Gradient with zero coordinates floored far below any feasible positive
// utility; only agents that can never earn utility sit at the floor, and for
// those every search direction is identically zero.
inline void guarded_grad(const WelfareSpec& spec, std::span<const double> u,
                         std::vector<double>& scratch, std::span<double> out) {
  const std::size_t n = spec.n();
  scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = std::max(u[i], 1e-300);
  grad_log_welfare(spec, scratch, out);
}

// Directional derivative of log f along d at u + gamma d; -inf once a
// coordinate with negative direction hits zero under p <= 0.
inline double dir_deriv(const WelfareSpec& spec, std::span<const double> u,
                        std::span<const double> s, double gamma, std::vector<double>& z,
                        std::vector<double>& scratch, std::vector<double>& g) {
  const std::size_t n = spec.n();
  z.resize(n);
  g.resize(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = (1.0 - gamma) * u[i] + gamma * s[i];
  if (spec.p <= 0.0) {
    for (std::size_t i = 0; i < n; ++i)
      if (z[i] <= 0.0 && s[i] < u[i]) return kNegInf;
  }
  guarded_grad(spec, z, scratch, g);
  double dd = 0.0;
  for (std::size_t i = 0; i < n; ++i) dd += g[i] * (s[i] - u[i]);
  return dd;
}

}  // namespace detail

/// Conditional-gradient solve of the hybrid log-welfare program. The linear
/// oracle allocates every tail item wholly to argmax_i g_i v_{t,i} (lowest
/// index on ties, all-zero items unallocated), exact line search bisects the
/// monotone directional derivative, and the certificate <g, s - u> equals the
/// weak-duality gap of dual_objective at beta = g.
inline SolveResult solve_hybrid(const SolveRequest& req) {
  const WelfareSpec& spec = *req.spec;
  const std::size_t n = spec.n();
  if (req.tail.size() % n != 0) throw std::invalid_argument("solve_hybrid: bad tail size");
  const std::size_t rows = req.tail.size() / n;
  const std::size_t t_total = req.t_total;
  if (t_total < rows || t_total == 0)
    throw std::invalid_argument("solve_hybrid: need T_total >= rows(tail) and > 0");
  if (!req.past_w.empty() && req.past_w.size() != n)
    throw std::invalid_argument("solve_hybrid: past utilities dimension mismatch");

  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i < req.past_w.size(); ++i) {
    if (!(req.past_w[i] >= 0.0))
      throw std::invalid_argument("solve_hybrid: negative past utility at agent " +
                                  std::to_string(i));
    w[i] = req.past_w[i];
  }

  const double* vals = req.tail.data();
  // Reachability: W_i > 0 or some positive item value.
  std::vector<char> reachable(n, 0);
  for (std::size_t i = 0; i < n; ++i) reachable[i] = w[i] > 0.0;
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t i = 0; i < n; ++i)
      if (vals[t * n + i] > 0.0) reachable[i] = 1;
  if (spec.p <= 0.0) {
    for (std::size_t i = 0; i < n; ++i)
      if (!reachable[i])
        throw std::invalid_argument("solve_hybrid: agent " + std::to_string(i) +
                                    " has no positive reachable utility (required for p <= 0)");
  } else if (std::none_of(reachable.begin(), reachable.end(), [](char c) { return c != 0; })) {
    throw std::invalid_argument("solve_hybrid: no agent has positive reachable utility");
  }

  const double inv_t = 1.0 / static_cast<double>(t_total);

  // Plan seeding: every agent claims its single highest-value tail item
  // (lowest index tie-break); claimed items split equally among claimants,
  // the rest split 1/n. This keeps u > 0 for every reachable agent, so
  // log f stays finite under p <= 0.
  std::vector<double> x(rows * n, 0.0);
  if (!req.warm_plan.empty()) {
    if (req.warm_plan.size() != rows * n)
      throw std::invalid_argument("solve_hybrid: warm plan shape mismatch");
    std::copy(req.warm_plan.begin(), req.warm_plan.end(), x.begin());
  } else if (rows > 0) {
    std::vector<int> claimants(rows, 0);
    std::vector<std::size_t> claim_of(n, rows);
    for (std::size_t i = 0; i < n; ++i) {
      double best = 0.0;
      std::size_t best_t = rows;
      for (std::size_t t = 0; t < rows; ++t)
        if (vals[t * n + i] > best) {
          best = vals[t * n + i];
          best_t = t;
        }
      if (best_t < rows) {
        claim_of[i] = best_t;
        ++claimants[best_t];
      }
    }
    for (std::size_t t = 0; t < rows; ++t) {
      if (claimants[t] > 0) continue;
      bool nonzero = false;
      for (std::size_t i = 0; i < n; ++i) nonzero = nonzero || vals[t * n + i] > 0.0;
      if (nonzero)
        for (std::size_t i = 0; i < n; ++i) x[t * n + i] = 1.0 / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i)
      if (claim_of[i] < rows)
        x[claim_of[i] * n + i] = 1.0 / static_cast<double>(claimants[claim_of[i]]);
  }

  auto utility_from_plan = [&](std::vector<double>& u) {
    u.assign(w.begin(), w.end());
    for (std::size_t t = 0; t < rows; ++t)
      for (std::size_t i = 0; i < n; ++i) u[i] += vals[t * n + i] * x[t * n + i];
    for (double& ui : u) ui *= inv_t;
  };

  std::vector<double> u(n);
  utility_from_plan(u);

  SolveResult res;
  std::vector<double> g(n), s(n), z_scratch, grad_scratch, ls_grad;
  std::vector<std::int32_t> winner(rows, -1);
  double primal = eval_log_welfare(spec, u);
  double gap = std::numeric_limits<double>::infinity();

  int k = 0;
  for (; k < req.opts.max_iters; ++k) {
    detail::guarded_grad(spec, u, grad_scratch, g);

    // Linear oracle over the allocation polytope.
    for (std::size_t i = 0; i < n; ++i) s[i] = w[i];
    for (std::size_t t = 0; t < rows; ++t) {
      const double* row = vals + t * n;
      double best = 0.0;
      std::int32_t bi = -1;
      for (std::size_t i = 0; i < n; ++i) {
        const double sv = g[i] * row[i];
        if (sv > best) {
          best = sv;
          bi = static_cast<std::int32_t>(i);
        }
      }
      winner[t] = bi;
      if (bi >= 0) s[static_cast<std::size_t>(bi)] += row[bi];
    }
    for (std::size_t i = 0; i < n; ++i) s[i] *= inv_t;

    gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) gap += g[i] * (s[i] - u[i]);
    primal = eval_log_welfare(spec, u);
    assert(gap >= -1e-10);  // weak duality per iterate
    if (primal > kNegInf && gap <= req.opts.tol * std::max(1.0, std::abs(primal))) {
      res.certified = true;
      break;
    }

    // Exact line search: bisection on the monotone directional derivative.
    double gamma = 1.0;
    if (detail::dir_deriv(spec, u, s, 1.0, z_scratch, grad_scratch, ls_grad) < 0.0) {
      double lo = 0.0, hi = 1.0;
      for (int b = 0; b < 60; ++b) {
        const double mid = 0.5 * (lo + hi);
        if (detail::dir_deriv(spec, u, s, mid, z_scratch, grad_scratch, ls_grad) >= 0.0)
          lo = mid;
        else
          hi = mid;
      }
      gamma = 0.5 * (lo + hi);
    }

    for (std::size_t i = 0; i < n; ++i) u[i] = (1.0 - gamma) * u[i] + gamma * s[i];
    const double keep = 1.0 - gamma;
    for (double& xe : x) xe *= keep;
    for (std::size_t t = 0; t < rows; ++t)
      if (winner[t] >= 0) x[t * n + winner[t]] += gamma;
  }

  // Tighten the plan/utility identity, then certify at the final iterate.
  utility_from_plan(u);
  detail::guarded_grad(spec, u, grad_scratch, g);
  res.primal = eval_log_welfare(spec, u);
  res.dual = dual_objective(spec, g, w, req.tail, t_total);
  res.gap = res.dual - res.primal;
  res.certified =
      res.primal > kNegInf && res.gap <= req.opts.tol * std::max(1.0, std::abs(res.primal));
  res.iters = k;
  res.u_star = std::move(u);
  res.beta_star = g;
  if (req.opts.track_plan) {
    res.plan.n = n;
    res.plan.x = std::move(x);
  }
  return res;
}

/// Hindsight program, Eq.-style: W = 0 and the full sequence as the tail.
inline SolveResult solve_hindsight(const WelfareSpec& spec, const ItemSequence& seq,
                                   const SolveOptions& opts = {}) {
  SolveRequest req;
  req.spec = &spec;
  req.tail = seq.all();
  req.t_total = seq.rows();
  req.opts = opts;
  return solve_hybrid(req);
}

/// Hindsight optimal welfare: exp of the log program's optimum.
inline double opt_welfare(const WelfareSpec& spec, const ItemSequence& seq,
                          const SolveOptions& opts = {}) {
  return std::exp(solve_hindsight(spec, seq, opts).primal);
}

namespace detail {

// Monotone comparison key for welfare of an (unnormalized) utility vector:
// larger key <=> larger welfare. Avoids pow at enumeration leaves for the
// common exponents.
struct WelfareKey {
  double p;
  std::span<const double> b;

  double operator()(std::span<const double> u) const {
    const std::size_t n = b.size();
    if (p == 0.0) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (u[i] <= 0.0) return kNegInf;
        acc += b[i] * std::log(u[i]);
      }
      return acc;
    }
    if (p == 0.5) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += b[i] * std::sqrt(u[i]);
      return acc;
    }
    if (p == -1.0) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (u[i] <= 0.0) return kNegInf;
        acc += b[i] / u[i];
      }
      return -acc;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (u[i] <= 0.0) {
        if (p < 0.0) return kNegInf;
        continue;
      }
      acc += b[i] * std::pow(u[i], p);
    }
    return p > 0.0 ? acc : -acc;
  }
};

}  // namespace detail

/// Exhaustive welfare maximization over per-item allocations restricted to
/// the simplex grid {j/grid_k}: exact maximum over that grid, which
/// lower-bounds the fractional optimum within O(vbar * n / grid_k). The
/// search is a depth-first product enumeration; a monotone upper bound
/// (remaining items granted fully to every agent) prunes subtrees without
/// changing the returned maximum, and the last item's grid is scanned with an
/// exact unimodal shortcut. Instances must satisfy T <= 6, n <= 3,
/// grid_k <= 50, and a leaf budget of 2^31 evaluations.
inline double brute_force_oracle(const WelfareSpec& spec, const ItemSequence& seq, int grid_k) {
  const std::size_t n = seq.n;
  const std::size_t big_t = seq.rows();
  if (n != spec.n()) throw std::invalid_argument("brute_force_oracle: dimension mismatch");
  if (big_t > 6 || n > 3 || grid_k > 50 || grid_k < 1)
    throw std::invalid_argument("brute_force_oracle: instance too large (need T <= 6, n <= 3, grid_k <= 50)");

  if (n == 1) {
    double sum = 0.0;
    for (double v : seq.values) sum += v;
    return sum / static_cast<double>(big_t);
  }

  // Items with no value never receive allocation.
  std::vector<std::size_t> items;
  for (std::size_t t = 0; t < big_t; ++t) {
    bool nonzero = false;
    for (std::size_t i = 0; i < n; ++i) nonzero = nonzero || seq.values[t * n + i] > 0.0;
    if (nonzero) items.push_back(t);
  }
  if (spec.p <= 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      bool reach = false;
      for (std::size_t t : items) reach = reach || seq.values[t * n + i] > 0.0;
      if (!reach) return 0.0;  // some agent is stuck at zero utility
    }
  }
  std::vector<double> ut(n, 0.0);
  if (items.empty()) return eval_welfare(spec, ut);

  // High-value items first so the bound bites early.
  std::stable_sort(items.begin(), items.end(), [&](std::size_t a, std::size_t b) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ma = std::max(ma, seq.values[a * n + i]);
      mb = std::max(mb, seq.values[b * n + i]);
    }
    return ma > mb;
  });
  const std::size_t m = items.size();
  std::vector<double> v(m * n);
  for (std::size_t d = 0; d < m; ++d)
    for (std::size_t i = 0; i < n; ++i) v[d * n + i] = seq.values[items[d] * n + i];

  // suffix_full[d] = total value of items d..m-1 granted fully to everyone.
  std::vector<double> suffix_full((m + 1) * n, 0.0);
  for (std::size_t d = m; d-- > 0;)
    for (std::size_t i = 0; i < n; ++i)
      suffix_full[d * n + i] = suffix_full[(d + 1) * n + i] + v[d * n + i];

  const detail::WelfareKey key{spec.p, spec.weights};
  const double k_inv = 1.0 / static_cast<double>(grid_k);

  double best_key = kNegInf;
  std::vector<double> best_u(n, 0.0);
  auto offer = [&](std::span<const double> u) {
    const double kk = key(u);
    if (kk > best_key) {
      best_key = kk;
      std::copy(u.begin(), u.end(), best_u.begin());
    }
  };

  // Seed with integral assignments so pruning starts tight: max-value winner,
  // round robin, and sequential key-greedy.
  {
    std::vector<double> u(n);
    for (int seedkind = 0; seedkind < 3; ++seedkind) {
      std::fill(u.begin(), u.end(), 0.0);
      for (std::size_t d = 0; d < m; ++d) {
        std::size_t pick = 0;
        if (seedkind == 0) {
          double bv = -1.0;
          for (std::size_t i = 0; i < n; ++i)
            if (v[d * n + i] > bv) {
              bv = v[d * n + i];
              pick = i;
            }
        } else if (seedkind == 1) {
          pick = d % n;
        } else {
          double bk = kNegInf;
          for (std::size_t i = 0; i < n; ++i) {
            u[i] += v[d * n + i];
            const double kk = key(u);
            u[i] -= v[d * n + i];
            if (kk > bk) {
              bk = kk;
              pick = i;
            }
          }
        }
        u[pick] += v[d * n + pick];
      }
      offer(u);
    }
  }

  long long budget = (1ll << 31);
  std::vector<double> u(n, 0.0), ub(n);

  // Exact max over the last item's grid. Along any segment the welfare is
  // strictly concave, so the integer sequence is unimodal; ternary search
  // narrows the range, with a linear fallback whenever probes tie (flat-zero
  // plateaus under p <= 0).
  auto scan_last = [&](std::span<const double> base, const double* row) {
    const auto eval2 = [&](int j, std::span<double> tmp) {
      tmp[0] = base[0] + row[0] * (static_cast<double>(j) * k_inv);
      tmp[1] = base[1] + row[1] * (static_cast<double>(grid_k - j) * k_inv);
      return key(tmp);
    };
    std::vector<double> tmp(n);
    if (n == 2) {
      int lo = 0, hi = grid_k;
      while (hi - lo > 8) {
        const int m1 = lo + (hi - lo) / 3;
        const int m2 = hi - (hi - lo) / 3;
        const double k1 = eval2(m1, tmp);
        const double k2 = eval2(m2, tmp);
        budget -= 2;
        if (k1 < k2)
          lo = m1 + 1;
        else if (k1 > k2)
          hi = m2 - 1;
        else
          break;  // tie: fall through to the linear scan of [lo, hi]
      }
      for (int j = lo; j <= hi; ++j) {
        --budget;
        const double kk = eval2(j, tmp);
        if (kk > best_key) {
          best_key = kk;
          best_u[0] = base[0] + row[0] * (static_cast<double>(j) * k_inv);
          best_u[1] = base[1] + row[1] * (static_cast<double>(grid_k - j) * k_inv);
        }
      }
      return;
    }
    // n == 3: enumerate the first coordinate, unimodal scan on the second.
    std::vector<double> b2(2), r2(2);
    for (int j1 = 0; j1 <= grid_k; ++j1) {
      const double u0 = base[0] + row[0] * (static_cast<double>(j1) * k_inv);
      const int rem = grid_k - j1;
      const auto eval3 = [&](int j2, std::span<double> t3) {
        t3[0] = u0;
        t3[1] = base[1] + row[1] * (static_cast<double>(j2) * k_inv);
        t3[2] = base[2] + row[2] * (static_cast<double>(rem - j2) * k_inv);
        return key(t3);
      };
      int lo = 0, hi = rem;
      while (hi - lo > 8) {
        const int m1 = lo + (hi - lo) / 3;
        const int m2 = hi - (hi - lo) / 3;
        const double k1 = eval3(m1, tmp);
        const double k2 = eval3(m2, tmp);
        budget -= 2;
        if (k1 < k2)
          lo = m1 + 1;
        else if (k1 > k2)
          hi = m2 - 1;
        else
          break;
      }
      for (int j2 = lo; j2 <= hi; ++j2) {
        --budget;
        const double kk = eval3(j2, tmp);
        if (kk > best_key) {
          best_key = kk;
          best_u[0] = tmp[0];
          best_u[1] = tmp[1];
          best_u[2] = tmp[2];
        }
      }
    }
  };

  auto recurse = [&](auto&& self, std::size_t depth) -> void {
    if (budget <= 0)
      throw std::runtime_error("brute_force_oracle: enumeration budget exceeded");
    // Monotone bound: grant every remaining item fully to every agent.
    for (std::size_t i = 0; i < n; ++i) ub[i] = u[i] + suffix_full[depth * n + i];
    if (key(ub) <= best_key) return;
    const double* row = v.data() + depth * n;
    if (depth == m - 1) {
      scan_last(u, row);
      return;
    }
    if (n == 2) {
      for (int j = 0; j <= grid_k; ++j) {
        const double a0 = row[0] * (static_cast<double>(j) * k_inv);
        const double a1 = row[1] * (static_cast<double>(grid_k - j) * k_inv);
        u[0] += a0;
        u[1] += a1;
        self(self, depth + 1);
        u[0] -= a0;
        u[1] -= a1;
      }
      return;
    }
    for (int j1 = 0; j1 <= grid_k; ++j1) {
      const double a0 = row[0] * (static_cast<double>(j1) * k_inv);
      u[0] += a0;
      for (int j2 = 0; j2 <= grid_k - j1; ++j2) {
        const double a1 = row[1] * (static_cast<double>(j2) * k_inv);
        const double a2 = row[2] * (static_cast<double>(grid_k - j1 - j2) * k_inv);
        u[1] += a1;
        u[2] += a2;
        self(self, depth + 1);
        u[1] -= a1;
        u[2] -= a2;
      }
      u[0] -= a0;
    }
  };
  recurse(recurse, 0);

  for (std::size_t i = 0; i < n; ++i) best_u[i] /= static_cast<double>(big_t);
  return eval_welfare(spec, best_u);
}

}  // namespace fairalloc
