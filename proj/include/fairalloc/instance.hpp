#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "fairalloc/rng.hpp"

namespace fairalloc {

/// A T x n matrix of item values in arrival order, bounded by vbar.
/// Immutable in spirit: build once, then share freely.
struct ItemSequence {
  std::size_t n = 0;
  double vbar = 1.0;
  std::vector<double> values;  // row-major, T * n

  ItemSequence() = default;
  ItemSequence(std::size_t agents, double bound, std::vector<double> vals)
      : n(agents), vbar(bound), values(std::move(vals)) {
    if (n == 0) throw std::invalid_argument("item sequence needs n >= 1");
    if (!(vbar > 0.0)) throw std::invalid_argument("item sequence needs vbar > 0");
    if (values.size() % n != 0)
      throw std::invalid_argument("item sequence values not a multiple of n");
    for (std::size_t t = 0; t < rows(); ++t)
      for (std::size_t i = 0; i < n; ++i) {
        const double v = values[t * n + i];
        if (!(v >= 0.0) || v > vbar)
          throw std::invalid_argument("value outside [0, vbar] at row " + std::to_string(t) +
                                      ", agent " + std::to_string(i));
      }
  }

  std::size_t rows() const { return n == 0 ? 0 : values.size() / n; }

  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(values.data() + t * n, n);
  }

  std::span<const double> tail(std::size_t from_row) const {
    return std::span<const double>(values.data() + from_row * n, (rows() - from_row) * n);
  }

  std::span<const double> all() const { return values; }
};

/// Per-item allocation fractions: x[t][i] >= 0, sum_i x[t][i] <= 1 + 1e-12.
struct AllocationPlan {
  std::size_t n = 0;
  std::vector<double> x;  // row-major, T * n

  std::size_t rows() const { return n == 0 ? 0 : x.size() / n; }

  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(x.data() + t * n, n);
  }

  void validate() const {
    for (std::size_t t = 0; t < rows(); ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!(x[t * n + i] >= 0.0))
          throw std::invalid_argument("allocation fraction negative at row " + std::to_string(t));
        s += x[t * n + i];
      }
      if (s > 1.0 + 1e-12)
        throw std::invalid_argument("allocation row " + std::to_string(t) +
                                    " exceeds unit supply");
    }
  }
};

/// Absolute cumulative utilities (not divided by T).
using CumulativeUtility = std::vector<double>;

/// Time-averaged utility of each agent: u_i = (1/T) sum_t v_{t,i} x_{t,i}.
inline std::vector<double> utilities_of(const ItemSequence& seq, const AllocationPlan& plan) {
  if (seq.n != plan.n || seq.rows() != plan.rows())
    throw std::invalid_argument("utilities_of: shape mismatch");
  const std::size_t big_t = seq.rows();
  std::vector<double> u(seq.n, 0.0);
  for (std::size_t t = 0; t < big_t; ++t)
    for (std::size_t i = 0; i < seq.n; ++i) u[i] += seq.values[t * seq.n + i] * plan.x[t * seq.n + i];
  for (double& ui : u) ui /= static_cast<double>(big_t);
  return u;
}

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buf, ptr);
}

}  // namespace detail

/// Writes the CSV schema `t,a0,...,a{n-1}` with shortest round-trip decimal
/// values and LF line endings.
inline void save_csv(const ItemSequence& seq, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t";
  for (std::size_t i = 0; i < seq.n; ++i) out << ",a" << i;
  out << "\n";
  for (std::size_t t = 0; t < seq.rows(); ++t) {
    out << t;
    for (std::size_t i = 0; i < seq.n; ++i) out << "," << detail::format_double(seq.values[t * seq.n + i]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

/// Loads the CSV schema above. Pass vbar > 0 to validate against a declared
/// bound, or vbar = 0 to adopt the maximum value seen (at least 1e-12).
inline ItemSequence load_csv(const std::string& path, double vbar = 0.0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": no rows");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::size_t n = 0;
  {
    if (line.substr(0, 1) != "t") throw std::runtime_error(path + ": bad header");
    std::size_t pos = 1;
    while (pos < line.size()) {
      if (line[pos] != ',') throw std::runtime_error(path + ": bad header");
      const std::string expect = ",a" + std::to_string(n);
      if (line.compare(pos, expect.size(), expect) != 0)
        throw std::runtime_error(path + ": bad header column " + std::to_string(n + 1));
      pos += expect.size();
      ++n;
    }
    if (n == 0) throw std::runtime_error(path + ": header names no agents");
  }
  std::vector<double> values;
  std::size_t row_idx = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    long long t = -1;
    auto [tp, tec] = std::from_chars(p, end, t);
    if (tec != std::errc() || t != static_cast<long long>(row_idx))
      throw std::runtime_error(path + ": malformed row " + std::to_string(row_idx) +
                               " (bad or out-of-order t)");
    p = tp;
    for (std::size_t i = 0; i < n; ++i) {
      if (p == end || *p != ',')
        throw std::runtime_error(path + ": malformed row " + std::to_string(row_idx));
      ++p;
      double v = 0.0;
      auto [vp, vec] = std::from_chars(p, end, v);
      if (vec != std::errc())
        throw std::runtime_error(path + ": malformed row " + std::to_string(row_idx));
      p = vp;
      values.push_back(v);
    }
    if (p != end)
      throw std::runtime_error(path + ": malformed row " + std::to_string(row_idx) +
                               " (extra columns)");
    ++row_idx;
  }
  if (row_idx == 0) throw std::runtime_error(path + ": no rows");
  double bound = vbar;
  if (bound == 0.0) {
    for (double v : values) bound = std::max(bound, v);
    bound = std::max(bound, 1e-12);
  }
  for (std::size_t t = 0; t < row_idx; ++t)
    for (std::size_t i = 0; i < n; ++i)
      if (values[t * n + i] < 0.0 || values[t * n + i] > bound)
        throw std::runtime_error(path + ": value outside [0, vbar] at row " + std::to_string(t));
  return ItemSequence(n, bound, std::move(values));
}

/// True iff no two items share a value ratio on any agent pair, among entries
/// where all four values are positive:
///   |v_{t1,i}/v_{t1,j} - v_{t2,i}/v_{t2,j}| > tol for t1 != t2, i != j.
inline bool check_general_position(const ItemSequence& seq, double tol = 1e-12) {
  if (tol < 0.0) throw std::invalid_argument("check_general_position: tol must be >= 0");
  const std::size_t big_t = seq.rows();
  const std::size_t n = seq.n;
  for (std::size_t t1 = 0; t1 < big_t; ++t1)
    for (std::size_t t2 = t1 + 1; t2 < big_t; ++t2)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          const double a = seq.values[t1 * n + i], b = seq.values[t1 * n + j];
          const double c = seq.values[t2 * n + i], d = seq.values[t2 * n + j];
          if (a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0) {
            if (std::abs(a / b - c / d) <= tol) return false;
          }
        }
  return true;
}

/// Adds independent uniform noise in (0, scale] to every strictly positive
/// entry (zeros stay zero), clamped to [0, vbar], retrying with fresh noise
/// until the result passes check_general_position with tol = 0 (up to 8
/// attempts).
inline ItemSequence perturb_general_position(const ItemSequence& seq, double scale,
                                             SplitRng& rng) {
  if (!(scale > 0.0)) throw std::invalid_argument("perturb_general_position: scale must be > 0");
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::vector<double> vals = seq.values;
    for (double& v : vals)
      if (v > 0.0) v = std::min(seq.vbar, v + scale * rng.next_unit_open_low());
    ItemSequence out(seq.n, seq.vbar, std::move(vals));
    if (check_general_position(out, 0.0)) return out;
  }
  throw std::runtime_error("perturb_general_position: retries exhausted");
}

inline double default_perturb_scale(const ItemSequence& seq) { return 1e-9 * seq.vbar; }

}  // namespace fairalloc
