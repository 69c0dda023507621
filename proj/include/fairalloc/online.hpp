#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fairalloc/solver.hpp"

namespace fairalloc {

enum class AlgorithmKind { Greedy, DualResolve, PrimalResolve, RoundRobin, UtilitarianGreedy };

inline const char* algorithm_name(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::Greedy: return "greedy";
    case AlgorithmKind::DualResolve: return "dual_resolve";
    case AlgorithmKind::PrimalResolve: return "primal_resolve";
    case AlgorithmKind::RoundRobin: return "round_robin";
    case AlgorithmKind::UtilitarianGreedy: return "utilitarian_greedy";
  }
  return "?";
}

struct AlgorithmOptions {
  SolveOptions solver{1e-6, 20000, true};  // per-step tolerance, looser than offline
  bool warm_start = true;
  bool safeguard_p0 = true;  // extend the zero-utility safeguard from p < 0 to p = 0
};

/// Full record of an online run: per-step allocation rows, cumulative
/// utilities after each step, the dual vector used per step (re-solving
/// kinds only), and the final time-averaged utilities W_T / T.
struct AllocationTrajectory {
  std::size_t n = 0;
  std::vector<double> choices;    // T x n
  std::vector<double> w_path;     // T x n
  std::vector<double> beta_path;  // T x n or empty
  std::vector<double> final_u;

  std::size_t steps() const { return n == 0 ? 0 : w_path.size() / n; }
  std::span<const double> choice_row(std::size_t t) const {
    return std::span<const double>(choices.data() + t * n, n);
  }
  std::span<const double> w_row(std::size_t t) const {
    return std::span<const double>(w_path.data() + t * n, n);
  }
  std::span<const double> beta_row(std::size_t t) const {
    return std::span<const double>(beta_path.data() + t * n, n);
  }
};

/// One greedy decision (Algorithm 1 style): pick argmax_i f(W + v e_i),
/// lowest index on ties; the 1/t scaling cancels by homogeneity. Zero items
/// go unallocated. Under p < 0 (and p = 0 when the safeguard extension is
/// on), an item is handed to the lowest-index agent with zero cumulative
/// utility and positive value, escaping the all-ways tie at zero welfare.
inline std::optional<std::size_t> greedy_step(const WelfareSpec& spec, std::span<const double> w,
                                              std::size_t t, std::span<const double> v,
                                              bool safeguard_p0 = true) {
  (void)t;
  const std::size_t n = spec.n();
  if (w.size() != n || v.size() != n) throw std::invalid_argument("greedy_step: shape mismatch");
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) any = any || v[i] > 0.0;
  if (!any) return std::nullopt;
  const bool safeguard = spec.p < 0.0 || (spec.p == 0.0 && safeguard_p0);
  if (safeguard) {
    for (std::size_t i = 0; i < n; ++i)
      if (w[i] == 0.0 && v[i] > 0.0) return i;
  }
  std::vector<double> z(w.begin(), w.end());
  double best = kNegInf;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] += v[i];
    const double val = eval_log_welfare(spec, z);
    z[i] = w[i];
    if (val > best) {
      best = val;
      best_i = i;
    }
  }
  return best_i;
}

/// One dual re-solving decision: solve the hybrid program over the current
/// true item plus the historical tail, extract beta = grad log f(u*) by the
/// KKT identity, and hand the whole item to argmax_i beta_i v_{t,i} (lowest
/// index on ties; nothing when v_t = 0).
inline std::pair<std::optional<std::size_t>, std::vector<double>> dual_resolve_step(
    const WelfareSpec& spec, std::span<const double> w, std::span<const double> v_t,
    std::span<const double> hist_tail, std::size_t t_total, const SolveOptions& opts = {}) {
  const std::size_t n = spec.n();
  std::vector<double> items(v_t.begin(), v_t.end());
  items.insert(items.end(), hist_tail.begin(), hist_tail.end());
  SolveRequest req;
  req.spec = &spec;
  req.past_w = w;
  req.tail = items;
  req.t_total = t_total;
  req.opts = opts;
  req.opts.track_plan = false;
  SolveResult res = solve_hybrid(req);
  std::optional<std::size_t> winner;
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sv = res.beta_star[i] * v_t[i];
    if (sv > best) {
      best = sv;
      winner = i;
    }
  }
  return {winner, std::move(res.beta_star)};
}

/// One primal re-solving decision: same hybrid solve, returning the
/// optimizer's fractional row for the current item together with the full
/// solve. The row's support lies in argmax_i beta_i v_{t,i} by the KKT
/// conditions.
inline std::pair<std::vector<double>, SolveResult> primal_resolve_step(
    const WelfareSpec& spec, std::span<const double> w, std::span<const double> v_t,
    std::span<const double> hist_tail, std::size_t t_total, const SolveOptions& opts = {}) {
  const std::size_t n = spec.n();
  std::vector<double> items(v_t.begin(), v_t.end());
  items.insert(items.end(), hist_tail.begin(), hist_tail.end());
  SolveRequest req;
  req.spec = &spec;
  req.past_w = w;
  req.tail = items;
  req.t_total = t_total;
  req.opts = opts;
  req.opts.track_plan = true;
  SolveResult res = solve_hybrid(req);
  std::vector<double> row(res.plan.row(0).begin(), res.plan.row(0).end());
  return {std::move(row), std::move(res)};
}

/// Runs a full online episode. Re-solving kinds require a historical
/// sequence of the same shape; the step-t program consists of the true item
/// v_t plus the historical tail t+1..T. Warm starts reuse the previous
/// step's plan over the shared tail items.
inline AllocationTrajectory run_online(AlgorithmKind kind, const WelfareSpec& spec,
                                       const ItemSequence& online_seq,
                                       const ItemSequence* hist_seq = nullptr,
                                       const AlgorithmOptions& opts = {}) {
  const std::size_t n = spec.n();
  const std::size_t big_t = online_seq.rows();
  if (online_seq.n != n) throw std::invalid_argument("run_online: sequence/welfare shape mismatch");
  if (big_t < n) throw std::invalid_argument("run_online: need T >= n");
  const bool resolving =
      kind == AlgorithmKind::DualResolve || kind == AlgorithmKind::PrimalResolve;
  if (resolving) {
    if (hist_seq == nullptr)
      throw std::invalid_argument("run_online: re-solving needs a history sequence");
    if (hist_seq->n != n || hist_seq->rows() != big_t)
      throw std::invalid_argument("run_online: history shape mismatch");
  }

  AllocationTrajectory traj;
  traj.n = n;
  traj.choices.assign(big_t * n, 0.0);
  traj.w_path.assign(big_t * n, 0.0);
  if (resolving) traj.beta_path.assign(big_t * n, 0.0);

  std::vector<double> w(n, 0.0);

  // Program buffer for re-solving: starts as the history; before step t the
  // slot of the consumed historical item is overwritten with the true item,
  // so rows t-1..T-1 are exactly the step-t hybrid items, contiguously.
  std::vector<double> buf;
  std::vector<double> warm;  // plan over buffer rows t-1..T-1
  std::vector<double> prev_beta;
  if (resolving) buf = hist_seq->values;

  for (std::size_t t = 1; t <= big_t; ++t) {
    const std::span<const double> v = online_seq.row(t - 1);
    double* x_row = traj.choices.data() + (t - 1) * n;

    if (kind == AlgorithmKind::Greedy) {
      if (auto pick = greedy_step(spec, w, t, v, opts.safeguard_p0)) x_row[*pick] = 1.0;
    } else if (kind == AlgorithmKind::RoundRobin) {
      x_row[(t - 1) % n] = 1.0;
    } else if (kind == AlgorithmKind::UtilitarianGreedy) {
      double best = 0.0;
      std::size_t best_i = n;
      for (std::size_t i = 0; i < n; ++i)
        if (v[i] > best) {
          best = v[i];
          best_i = i;
        }
      if (best_i < n) x_row[best_i] = 1.0;
    } else {
      const std::size_t off = (t - 1) * n;
      std::copy(v.begin(), v.end(), buf.begin() + off);
      const std::span<const double> items(buf.data() + off, (big_t - t + 1) * n);

      SolveRequest req;
      req.spec = &spec;
      req.past_w = w;
      req.tail = items;
      req.t_total = big_t;
      req.opts = opts.solver;
      req.opts.track_plan = true;  // carried across steps for warm starts

      if (opts.warm_start && t > 1) {
        // Shift out the consumed row, then seed the new current item by the
        // previous multipliers.
        warm.erase(warm.begin(), warm.begin() + n);
        std::fill(warm.begin(), warm.begin() + n, 0.0);
        double best = 0.0;
        std::size_t best_i = n;
        for (std::size_t i = 0; i < n; ++i)
          if (prev_beta[i] * v[i] > best) {
            best = prev_beta[i] * v[i];
            best_i = i;
          }
        if (best_i < n) warm[best_i] = 1.0;
        req.warm_plan = warm;
      }

      SolveResult res = solve_hybrid(req);
      std::copy(res.beta_star.begin(), res.beta_star.end(), traj.beta_path.begin() + off);

      if (kind == AlgorithmKind::DualResolve) {
        double best = 0.0;
        std::size_t best_i = n;
        for (std::size_t i = 0; i < n; ++i)
          if (res.beta_star[i] * v[i] > best) {
            best = res.beta_star[i] * v[i];
            best_i = i;
          }
        if (best_i < n) x_row[best_i] = 1.0;
      } else {
        const auto z = res.plan.row(0);
        std::copy(z.begin(), z.end(), x_row);
      }
      warm = std::move(res.plan.x);
      prev_beta = std::move(res.beta_star);
    }

    for (std::size_t i = 0; i < n; ++i) w[i] += v[i] * x_row[i];
    std::copy(w.begin(), w.end(), traj.w_path.begin() + (t - 1) * n);
  }

  traj.final_u.assign(w.begin(), w.end());
  for (double& ui : traj.final_u) ui /= static_cast<double>(big_t);
  return traj;
}

/// Greedy episode (Algorithm 1 semantics).
inline AllocationTrajectory run_greedy(const WelfareSpec& spec, const ItemSequence& online_seq,
                                       const AlgorithmOptions& opts = {}) {
  return run_online(AlgorithmKind::Greedy, spec, online_seq, nullptr, opts);
}

}  // namespace fairalloc
