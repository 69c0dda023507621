#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairalloc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// CES welfare objective: exponent p < 1 and strictly positive weights that
/// are normalized to sum to one at construction. Exponents within 1e-9 of
/// zero are treated as the weighted geometric mean (the p = 0 case).
struct WelfareSpec {
  double p = 0.0;
  std::vector<double> weights;

  WelfareSpec(double exponent, std::vector<double> b) : p(exponent), weights(std::move(b)) {
    if (!(p < 1.0)) throw std::invalid_argument("welfare exponent must satisfy p < 1");
    if (weights.empty()) throw std::invalid_argument("welfare weights must be nonempty");
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] > 0.0))
        throw std::invalid_argument("welfare weight " + std::to_string(i) +
                                    " must be strictly positive");
      sum += weights[i];
    }
    for (double& w : weights) w /= sum;
    if (std::abs(p) < 1e-9) p = 0.0;
  }

  static WelfareSpec symmetric(double exponent, std::size_t n) {
    return WelfareSpec(exponent, std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t n() const { return weights.size(); }
  bool log_case() const { return p == 0.0; }
  bool symmetric_weights() const {
    for (double w : weights)
      if (std::abs(w - weights[0]) > 1e-15) return false;
    return true;
  }
};

/// Constants of log f on a box [lo, hi]^n, consumed by the diagnostics:
///   lambda  -- smoothness modulus w.r.t. l_inf (grid upper bound, x1.1)
///   kappa   -- max derivative ratio max_{i,j,u} d_i f / d_j f  (closed form)
///   lip1    -- Lipschitz modulus w.r.t. l_1, i.e. max ||grad log f||_inf
///              on the box (grid upper bound, x1.1)
struct SmoothnessBox {
  double lo = 0.0;
  double hi = 0.0;
  double lambda = 0.0;
  double kappa = 1.0;
  double lip1 = 0.0;
};

namespace detail {

inline void require_dim(const WelfareSpec& spec, std::span<const double> u, const char* what) {
  if (u.size() != spec.n())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(u.size()) + ", expected " +
                                std::to_string(spec.n()) + ")");
}

inline double logsumexp(std::span<const double> terms) {
  double m = kNegInf;
  for (double t : terms) m = std::max(m, t);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace detail

/// f(u) = (sum_i B_i u_i^p)^(1/p) for p != 0, prod_i u_i^{B_i} for p = 0.
/// Computed in the log domain. Returns 0 when p <= 0 and some u_i = 0.
inline double eval_welfare(const WelfareSpec& spec, std::span<const double> u) {
  detail::require_dim(spec, u, "eval_welfare");
  const std::size_t n = spec.n();
  for (std::size_t i = 0; i < n; ++i)
    if (!(u[i] >= 0.0))
      throw std::invalid_argument("eval_welfare: negative utility at agent " + std::to_string(i));
  if (spec.log_case()) {
    double ls = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (u[i] == 0.0) return 0.0;
      ls += spec.weights[i] * std::log(u[i]);
    }
    return std::exp(ls);
  }
  std::vector<double> terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (u[i] == 0.0) {
      if (spec.p < 0.0) return 0.0;
      continue;  // p in (0,1): zero terms vanish
    }
    terms.push_back(std::log(spec.weights[i]) + spec.p * std::log(u[i]));
  }
  if (terms.empty()) return 0.0;
  return std::exp(detail::logsumexp(terms) / spec.p);
}

/// log f(u); -inf when p <= 0 and some u_i = 0.
inline double eval_log_welfare(const WelfareSpec& spec, std::span<const double> u) {
  detail::require_dim(spec, u, "eval_log_welfare");
  const std::size_t n = spec.n();
  for (std::size_t i = 0; i < n; ++i)
    if (!(u[i] >= 0.0))
      throw std::invalid_argument("eval_log_welfare: negative utility at agent " +
                                  std::to_string(i));
  if (spec.log_case()) {
    double ls = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (u[i] == 0.0) return kNegInf;
      ls += spec.weights[i] * std::log(u[i]);
    }
    return ls;
  }
  std::vector<double> terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (u[i] == 0.0) {
      if (spec.p < 0.0) return kNegInf;
      continue;
    }
    terms.push_back(std::log(spec.weights[i]) + spec.p * std::log(u[i]));
  }
  if (terms.empty()) return kNegInf;
  return detail::logsumexp(terms) / spec.p;
}

/// grad log f at u > 0:  B_i / u_i for p = 0,  B_i u_i^{p-1} / sum_j B_j u_j^p
/// otherwise. Satisfies the Euler identity <grad, u> = 1.
inline void grad_log_welfare(const WelfareSpec& spec, std::span<const double> u,
                             std::span<double> out) {
  detail::require_dim(spec, u, "grad_log_welfare");
  if (out.size() != spec.n()) throw std::invalid_argument("grad_log_welfare: bad output size");
  const std::size_t n = spec.n();
  for (std::size_t i = 0; i < n; ++i)
    if (!(u[i] > 0.0))
      throw std::invalid_argument("grad_log_welfare: non-positive utility at agent " +
                                  std::to_string(i));
  if (spec.log_case()) {
    for (std::size_t i = 0; i < n; ++i) out[i] = spec.weights[i] / u[i];
    return;
  }
  std::vector<double> lt(n);
  for (std::size_t i = 0; i < n; ++i) lt[i] = std::log(spec.weights[i]) + spec.p * std::log(u[i]);
  const double ls = detail::logsumexp(lt);
  // g_i = exp(log B_i + (p-1) log u_i - ls) = exp(lt_i - log u_i - ls)
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(lt[i] - std::log(u[i]) - ls);
}

inline std::vector<double> grad_log_welfare(const WelfareSpec& spec, std::span<const double> u) {
  std::vector<double> g(spec.n());
  grad_log_welfare(spec, u, g);
  return g;
}

namespace detail {

inline void require_positive_beta(const WelfareSpec& spec, std::span<const double> beta,
                                  const char* what) {
  require_dim(spec, beta, what);
  for (std::size_t i = 0; i < beta.size(); ++i)
    if (!(beta[i] > 0.0))
      throw std::invalid_argument(std::string(what) + ": non-positive multiplier at agent " +
                                  std::to_string(i));
}

}  // namespace detail

/// Restricted Fenchel conjugate of log f:
///   conjugate(beta) = max_{u >= 0} { log f(u) - <beta, u> }.
/// Closed forms: sum_i B_i log(B_i / beta_i) - 1 for p = 0, and
/// -1 - log m(beta) with m(beta) = (sum_i B_i^{1/(1-p)} beta_i^q)^{1/q},
/// q = p/(p-1), otherwise. Diverges for p in (0,1) as any beta_i -> 0+,
/// hence the strict positivity requirement.
inline double conjugate(const WelfareSpec& spec, std::span<const double> beta) {
  detail::require_positive_beta(spec, beta, "conjugate");
  const std::size_t n = spec.n();
  if (spec.log_case()) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += spec.weights[i] * (std::log(spec.weights[i]) - std::log(beta[i]));
    return s - 1.0;
  }
  const double q = spec.p / (spec.p - 1.0);
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i)
    terms[i] = std::log(spec.weights[i]) / (1.0 - spec.p) + q * std::log(beta[i]);
  const double log_s = detail::logsumexp(terms);
  return -1.0 - log_s / q;
}

/// The maximizer attaining conjugate(beta): u_i = (B_i/beta_i)^{1/(1-p)} / S
/// with S = sum_j B_j^{1/(1-p)} beta_j^q; reduces to B_i/beta_i at p = 0.
/// At this point grad log f(u) = beta and <beta, u> = 1.
inline std::vector<double> conjugate_argmax(const WelfareSpec& spec,
                                            std::span<const double> beta) {
  detail::require_positive_beta(spec, beta, "conjugate_argmax");
  const std::size_t n = spec.n();
  std::vector<double> u(n);
  if (spec.log_case()) {
    for (std::size_t i = 0; i < n; ++i) u[i] = spec.weights[i] / beta[i];
    return u;
  }
  const double q = spec.p / (spec.p - 1.0);
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i)
    terms[i] = std::log(spec.weights[i]) / (1.0 - spec.p) + q * std::log(beta[i]);
  const double log_s = detail::logsumexp(terms);
  for (std::size_t i = 0; i < n; ++i)
    u[i] = std::exp((std::log(spec.weights[i]) - std::log(beta[i])) / (1.0 - spec.p) - log_s);
  return u;
}

/// Hybrid dual objective at multiplier beta, for past utilities W (absolute
/// units) and a tail of future items (row-major, rows x n):
///   (1/T) (<beta, W> + sum_tau max_i beta_i v_{tau,i}) + conjugate(beta).
/// With W = 0 and the full sequence as the tail this is the hindsight dual.
inline double dual_objective(const WelfareSpec& spec, std::span<const double> beta,
                             std::span<const double> past_w, std::span<const double> tail_values,
                             std::size_t t_total) {
  detail::require_positive_beta(spec, beta, "dual_objective");
  detail::require_dim(spec, past_w, "dual_objective (past utilities)");
  const std::size_t n = spec.n();
  if (tail_values.size() % n != 0)
    throw std::invalid_argument("dual_objective: tail size not a multiple of n");
  const std::size_t rows = tail_values.size() / n;
  if (t_total < rows || t_total == 0)
    throw std::invalid_argument("dual_objective: need T_total >= rows(tail) and > 0");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += beta[i] * past_w[i];
  for (std::size_t t = 0; t < rows; ++t) {
    const double* row = tail_values.data() + t * n;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) best = std::max(best, beta[i] * row[i]);
    acc += best;
  }
  return acc / static_cast<double>(t_total) + conjugate(spec, beta);
}

namespace detail {

// Hessian of log f at u > 0 (row-major n x n).
// p = 0: diag(-B_i/u_i^2); else H_ij = (p-1) g_i/u_i delta_ij - p g_i g_j.
inline void log_welfare_hessian(const WelfareSpec& spec, std::span<const double> u,
                                std::vector<double>& h) {
  const std::size_t n = spec.n();
  h.assign(n * n, 0.0);
  if (spec.log_case()) {
    for (std::size_t i = 0; i < n; ++i) h[i * n + i] = -spec.weights[i] / (u[i] * u[i]);
    return;
  }
  const std::vector<double> g = grad_log_welfare(spec, u);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = -spec.p * g[i] * g[j];
      if (i == j) v += (spec.p - 1.0) * g[i] / u[i];
      h[i * n + j] = v;
    }
}

// Operator norm l_inf -> l_1 of a symmetric matrix: max over sign vectors d
// of ||H d||_1. Exact for n <= 24 by enumeration of 2^(n-1) sign patterns.
inline double opnorm_inf_to_one(const std::vector<double>& h, std::size_t n) {
  double best = 0.0;
  const std::size_t patterns = std::size_t{1} << (n - 1);  // d and -d tie
  std::vector<double> hd(n);
  for (std::size_t mask = 0; mask < patterns; ++mask) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = (j + 1 < n && (mask >> j) & 1) ? -1.0 : 1.0;
        s += h[i * n + j] * d;
      }
      hd[i] = s;
    }
    double norm1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm1 += std::abs(hd[i]);
    best = std::max(best, norm1);
  }
  return best;
}

}  // namespace detail

/// Conservative constants of log f on [lo, hi]^n. kappa is closed-form:
/// max_{i,j} (B_i/B_j) (hi/lo)^{1-p}. lambda and lip1 are grid maxima of the
/// Hessian l_inf->l_1 operator norm and the gradient l_inf norm, inflated by
/// 1.1. For symmetric weights the grid runs over two distinct coordinate
/// values (a, b, ..., b); otherwise a full per-axis grid with n <= 6 (the
/// per-axis count drops from 17 to 9/7 at n = 5/6 to keep the sweep cheap).
inline SmoothnessBox smoothness_constants(const WelfareSpec& spec, double lo, double hi) {
  if (!(lo > 0.0)) throw std::invalid_argument("smoothness_constants: need lo > 0");
  if (!(hi >= lo)) throw std::invalid_argument("smoothness_constants: need hi >= lo");
  const std::size_t n = spec.n();
  SmoothnessBox box;
  box.lo = lo;
  box.hi = hi;

  double wratio = 1.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) wratio = std::max(wratio, spec.weights[i] / spec.weights[j]);
  box.kappa = wratio * std::pow(hi / lo, 1.0 - spec.p);

  const bool sym = spec.symmetric_weights();
  const int pts = 17;
  std::vector<double> axis;
  auto fill_axis = [&](int k) {
    axis.resize(k);
    if (k == 1) {
      axis[0] = lo;
      return;
    }
    for (int i = 0; i < k; ++i)
      axis[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
  };

  double lambda = 0.0, lip1 = 0.0;
  std::vector<double> u(n), h;
  auto visit = [&]() {
    detail::log_welfare_hessian(spec, u, h);
    lambda = std::max(lambda, detail::opnorm_inf_to_one(h, n));
    const std::vector<double> g = grad_log_welfare(spec, u);
    for (double gi : g) lip1 = std::max(lip1, gi);
  };

  if (n == 1) {
    fill_axis(pts);
    for (double a : axis) {
      u[0] = a;
      visit();
    }
  } else if (sym) {
    fill_axis(pts);
    for (double a : axis)
      for (double b : axis) {
        u.assign(n, b);
        u[0] = a;
        visit();
      }
  } else {
    if (n > 6)
      throw std::invalid_argument("smoothness_constants: asymmetric weights need n <= 6");
    fill_axis(n <= 4 ? pts : (n == 5 ? 9 : 7));
    const std::size_t k = axis.size();
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      for (std::size_t i = 0; i < n; ++i) u[i] = axis[idx[i]];
      visit();
      std::size_t d = 0;
      while (d < n && ++idx[d] == k) idx[d++] = 0;
      if (d == n) break;
    }
  }
  box.lambda = 1.1 * lambda;
  box.lip1 = 1.1 * lip1;
  return box;
}

}  // namespace fairalloc
