#pragma once

// Brute-force references for the statistical tests.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ideation/stats.hpp"

namespace ideation::testing {

inline double choose(long long n, long long k) {
  double r = 1.0;
  for (long long i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}

// Sum of hypergeometric probabilities no larger than the observed one.
inline double fisher_oracle(long long a, long long b, long long c, long long d) {
  const long long r1 = a + b, r2 = c + d, c1 = a + c;
  const double total = choose(r1 + r2, c1);
  auto prob = [&](long long x) { return choose(r1, x) * choose(r2, c1 - x) / total; };
  const double obs = prob(a);
  double p = 0.0;
  for (long long x = std::max(0LL, c1 - r2); x <= std::min(r1, c1); ++x) {
    if (prob(x) <= obs * (1 + 1e-9)) p += prob(x);
  }
  return std::min(1.0, p);
}

inline double u_of(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : x == y ? 0.5 : 0.0;
  }
  return u;
}

// Two-sided permutation p over every relabelling of the pooled sample.
inline double mwu_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pool(a);
  pool.insert(pool.end(), b.begin(), b.end());
  const std::size_t n = pool.size(), na = a.size();
  const double mu = double(na * b.size()) / 2.0;
  const double obs = std::abs(u_of(a, b) - mu);
  std::size_t hits = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != na) continue;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) ((mask >> i) & 1 ? x : y).push_back(pool[i]);
    hits += std::abs(u_of(x, y) - mu) >= obs - 1e-9;
    ++total;
  }
  return double(hits) / double(total);
}

inline double chi_oracle(const stats::CountTable& t) {
  double n = 0.0;
  std::vector<double> rs(t.size(), 0.0), cs(t[0].size(), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t[i].size(); ++j) {
      rs[i] += double(t[i][j]);
      cs[j] += double(t[i][j]);
      n += double(t[i][j]);
    }
  }
  double x = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t[i].size(); ++j) {
      const double e = rs[i] * cs[j] / n;
      x += (double(t[i][j]) - e) * (double(t[i][j]) - e) / e;
    }
  }
  return x;
}

}  // namespace ideation::testing
