#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

#include "fairalloc/instance.hpp"
#include "fairalloc/rng.hpp"

namespace fairalloc {

/// Arrival models: empirical redraw from a pool, the same with per-period
/// boosted agent groups, verbatim trace replay, and synthetic per-entry laws.
struct IidEmpirical {
  ItemSequence pool;
};

struct PeriodicBoost {
  ItemSequence pool;
  int periods = 4;
  double factor = 2.0;
};

struct TraceReplay {
  ItemSequence seq;
};

struct Synthetic {
  enum class Law { Uniform, BetaShaped };
  Law law = Law::Uniform;
  std::size_t n = 2;
  double vbar = 1.0;
  double lo = 0.0;  // uniform support [lo, hi] within [0, vbar]
  double hi = 1.0;
  int alpha = 2;  // beta-shaped: vbar * Beta(alpha, beta_param)
  int beta_param = 2;
};

using ArrivalModel = std::variant<IidEmpirical, PeriodicBoost, TraceReplay, Synthetic>;

struct Matched {};
struct GaussianNoise {
  double variance_scale = 0.5;  // per-entry variance = variance_scale * value
};
struct IndependentRedraw {};

using HistoryMode = std::variant<Matched, GaussianNoise, IndependentRedraw>;

/// Realized per-step l1 distances between two sequences and their mean,
/// the coupled-sampling surrogate of the time-averaged Wasserstein
/// discrepancy.
struct ShiftReport {
  std::vector<double> per_step_l1;
  double delta_avg = 0.0;
};

inline std::size_t model_agents(const ArrivalModel& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, IidEmpirical>) return m.pool.n;
        if constexpr (std::is_same_v<M, PeriodicBoost>) return m.pool.n;
        if constexpr (std::is_same_v<M, TraceReplay>) return m.seq.n;
        if constexpr (std::is_same_v<M, Synthetic>) return m.n;
      },
      model);
}

inline double model_vbar(const ArrivalModel& model) {
  return std::visit(
      [](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, IidEmpirical>) return m.pool.vbar;
        if constexpr (std::is_same_v<M, PeriodicBoost>) return m.pool.vbar;
        if constexpr (std::is_same_v<M, TraceReplay>) return m.seq.vbar;
        if constexpr (std::is_same_v<M, Synthetic>) return m.vbar;
      },
      model);
}

namespace detail {

// Balanced contiguous blocks: the first (total % q) blocks get one extra slot.
inline std::size_t block_of(std::size_t idx, std::size_t total, std::size_t q) {
  const std::size_t base = total / q;
  const std::size_t rem = total % q;
  const std::size_t fat = rem * (base + 1);
  return idx < fat ? idx / (base + 1) : rem + (idx - fat) / base;
}

}  // namespace detail

/// Draws an online sequence of length T from the model. Requires T >= n.
inline ItemSequence sample_online(const ArrivalModel& model, std::size_t big_t, SplitRng& rng) {
  const std::size_t n = model_agents(model);
  if (big_t < n) throw std::invalid_argument("sample_online: need T >= n");
  return std::visit(
      [&](const auto& m) -> ItemSequence {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, TraceReplay>) {
          if (m.seq.rows() != big_t)
            throw std::invalid_argument("sample_online: trace length differs from T");
          return m.seq;
        } else if constexpr (std::is_same_v<M, Synthetic>) {
          std::vector<double> vals(big_t * m.n);
          for (double& v : vals) {
            if (m.law == Synthetic::Law::Uniform)
              v = std::min(m.vbar, std::max(0.0, rng.next_range(m.lo, m.hi)));
            else
              v = m.vbar * rng.next_beta(m.alpha, m.beta_param);
          }
          return ItemSequence(m.n, m.vbar, std::move(vals));
        } else {
          const ItemSequence& pool = m.pool;
          if (pool.rows() == 0) throw std::invalid_argument("sample_online: empty pool");
          std::vector<double> vals(big_t * pool.n);
          for (std::size_t t = 0; t < big_t; ++t) {
            const auto row = pool.row(rng.next_below(pool.rows()));
            std::copy(row.begin(), row.end(), vals.begin() + t * pool.n);
          }
          if constexpr (std::is_same_v<M, PeriodicBoost>) {
            if (m.periods < 1) throw std::invalid_argument("sample_online: periods must be >= 1");
            const std::size_t q = static_cast<std::size_t>(m.periods);
            if (q > pool.n)
              throw std::invalid_argument("sample_online: more periods than agent groups");
            if (q > big_t) throw std::invalid_argument("sample_online: more periods than steps");
            for (std::size_t t = 0; t < big_t; ++t) {
              const std::size_t period = detail::block_of(t, big_t, q);
              for (std::size_t i = 0; i < pool.n; ++i)
                if (detail::block_of(i, pool.n, q) == period)
                  vals[t * pool.n + i] = std::min(pool.vbar, vals[t * pool.n + i] * m.factor);
            }
          }
          return ItemSequence(pool.n, pool.vbar, std::move(vals));
        }
      },
      model);
}

/// Exact per-step l1 distances between shape-matched sequences.
inline ShiftReport measure_l1_discrepancy(const ItemSequence& a, const ItemSequence& b) {
  if (a.n != b.n || a.rows() != b.rows())
    throw std::invalid_argument("measure_l1_discrepancy: shape mismatch");
  ShiftReport rep;
  rep.per_step_l1.resize(a.rows());
  double total = 0.0;
  for (std::size_t t = 0; t < a.rows(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.n; ++i) s += std::abs(a.values[t * a.n + i] - b.values[t * a.n + i]);
    rep.per_step_l1[t] = s;
    total += s;
  }
  rep.delta_avg = a.rows() == 0 ? 0.0 : total / static_cast<double>(a.rows());
  return rep;
}

/// Draws the historical sequence coupled to an online draw. Matched and
/// IndependentRedraw both redraw independently from the same per-step model;
/// GaussianNoise perturbs each online entry by N(0, variance_scale * value),
/// clamped to [0, vbar]. The report measures the realized shift against the
/// online sequence.
inline std::pair<ItemSequence, ShiftReport> sample_history(const ArrivalModel& model,
                                                           const HistoryMode& mode,
                                                           const ItemSequence& online_seq,
                                                           SplitRng& rng) {
  ItemSequence hist = std::visit(
      [&](const auto& mm) -> ItemSequence {
        using M = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<M, GaussianNoise>) {
          if (mm.variance_scale < 0.0)
            throw std::invalid_argument("sample_history: variance_scale must be >= 0");
          std::vector<double> vals = online_seq.values;
          if (mm.variance_scale > 0.0) {
            for (double& v : vals) {
              const double sigma = std::sqrt(mm.variance_scale * v);
              v = std::min(online_seq.vbar, std::max(0.0, v + sigma * rng.next_normal()));
            }
          }
          return ItemSequence(online_seq.n, online_seq.vbar, std::move(vals));
        } else {
          (void)mm;
          return sample_online(model, online_seq.rows(), rng);
        }
      },
      mode);
  ShiftReport rep = measure_l1_discrepancy(hist, online_seq);
  return {std::move(hist), std::move(rep)};
}

}  // namespace fairalloc
