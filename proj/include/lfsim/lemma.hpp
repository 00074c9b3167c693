#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <stdexcept>
#include <vector>

namespace lfsim {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

/// C(a, b) with the convention C(a, b) = 0 for b < 0 or b > a.
inline BigInt binomial(long long a, long long b) {
  if (b < 0 || b > a) return 0;
  if (b > a - b) b = a - b;
  BigInt result = 1;
  for (long long i = 1; i <= b; ++i) {
    result *= (a - b + i);
    result /= i;
  }
  return result;
}

/// Chance that a fixed non-target node shares a random affected set with the
/// target, over all node subsets of size up to k that contain the target:
///   g_k = sum_{m=1..k} C(n-1, m-1)     subsets containing the target
///   f_k = sum_{m=1..k} C(n-2, m-2)     of those, subsets also containing
///                                      the fixed other node
///   p_k = f_k / g_k
struct CouplingProbability {
  long long n = 0;
  long long k = 0;
  BigInt g;
  BigInt f;
  BigRational p;
};

inline CouplingProbability coupling_probability(long long n, long long k) {
  if (n < 2) throw std::invalid_argument("coupling_probability: n must be >= 2");
  if (k < 1 || k > n)
    throw std::invalid_argument("coupling_probability: k must be in [1, n]");
  CouplingProbability cp;
  cp.n = n;
  cp.k = k;
  for (long long m = 1; m <= k; ++m) {
    cp.g += binomial(n - 1, m - 1);
    cp.f += binomial(n - 2, m - 2);
  }
  cp.p = BigRational(cp.f, cp.g);
  return cp;
}

/// Independent oracle: enumerate every subset S of n nodes with
/// target in S and 1 <= |S| <= k; return the fraction that also contains a
/// fixed non-target node. Exact, exponential in n.
inline BigRational coupling_probability_bruteforce(long long n, long long k) {
  if (n < 2) throw std::invalid_argument("bruteforce: n must be >= 2");
  if (k < 1 || k > n) throw std::invalid_argument("bruteforce: k out of range");
  if (n > 20) throw std::invalid_argument("bruteforce: n > 20 refused");
  // Nodes 0..n-1; target = 0; fixed other node = 1. Enumerate subsets of the
  // remaining n-1 nodes with size <= k-1.
  const long long others = n - 1;
  long long total = 0;
  long long with_fixed = 0;
  for (std::uint64_t mask = 0; mask < (1ull << others); ++mask) {
    const int size = __builtin_popcountll(mask);
    if (size > k - 1) continue;
    ++total;
    if (mask & 1ull) ++with_fixed;  // bit 0 = the fixed non-target node
  }
  return BigRational(with_fixed, total);
}

/// True iff p_k strictly increases over k = 1..n, computed exactly.
inline bool monotonicity_check(long long n) {
  if (n < 3) throw std::invalid_argument("monotonicity_check: n must be >= 3");
  CouplingProbability prev = coupling_probability(n, 1);
  for (long long k = 2; k <= n; ++k) {
    CouplingProbability cur = coupling_probability(n, k);
    if (!(cur.p > prev.p)) return false;
    prev = cur;
  }
  return true;
}

/// Full table for one n; used by the CLI.
inline std::vector<CouplingProbability> coupling_table(long long n) {
  std::vector<CouplingProbability> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (long long k = 1; k <= n; ++k) rows.push_back(coupling_probability(n, k));
  return rows;
}

}  // namespace lfsim
