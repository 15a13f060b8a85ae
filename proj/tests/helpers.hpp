// Test-only utilities: an independent recursive reference for the hierarchy
// passes, and small statistical helpers (Welch test, binomial tail, KS test,
// Spearman correlation) used by the property and acceptance suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "hiermarket/hierarchy.hpp"

namespace testref {

using hiermarket::CommunityState;
using hiermarket::HierarchyParams;
using hiermarket::TraderRole;

// Recursive reference for the backward pass. Operations are performed in the
// same order as the production code (child-index order, multiply by 1/k) so
// results are comparable bit-for-bit.
inline CommunityState backward_ref(long node, const HierarchyParams& hp, long first_bottom,
                                   const std::vector<TraderRole>& roles,
                                   std::vector<CommunityState>& out) {
  CommunityState sum{};
  if (node >= first_bottom) {
    long nc = static_cast<long>(out.size());
    for (int c = 0; c < hp.k; ++c) {
      long leaf = hp.k * node + 1 + c - nc;
      sum += role_vector(roles[static_cast<std::size_t>(leaf)], hp.omega, hp.upsilon);
    }
  } else {
    for (int c = 0; c < hp.k; ++c)
      sum += backward_ref(hp.k * node + 1 + c, hp, first_bottom, roles, out);
  }
  return out[static_cast<std::size_t>(node)] = (1.0 / hp.k) * sum;
}

// Recursive reference for the forward pass: f(root) = b(root),
// f(i) = b(i)/2 + phi * f(parent).
inline CommunityState forward_ref(long node, const HierarchyParams& hp,
                                  const std::vector<CommunityState>& backward,
                                  std::vector<CommunityState>& memo,
                                  std::vector<bool>& have) {
  if (have[static_cast<std::size_t>(node)]) return memo[static_cast<std::size_t>(node)];
  CommunityState result;
  if (node == 0) {
    result = backward[0];
  } else {
    CommunityState parent = forward_ref((node - 1) / hp.k, hp, backward, memo, have);
    result = 0.5 * backward[static_cast<std::size_t>(node)] + hp.phi * parent;
  }
  have[static_cast<std::size_t>(node)] = true;
  return memo[static_cast<std::size_t>(node)] = result;
}

struct PassReference {
  std::vector<CommunityState> backward;
  std::vector<CommunityState> forward;
};

inline PassReference reference_passes(const HierarchyParams& hp,
                                      const std::vector<TraderRole>& roles) {
  auto counts = hiermarket::hierarchy_counts(hp);
  long first_bottom = 0, pw = 1;
  for (int level = 1; level < hp.L - 1; ++level) {
    first_bottom += pw;
    pw *= hp.k;
  }
  PassReference ref;
  ref.backward.assign(static_cast<std::size_t>(counts.communities), CommunityState{});
  backward_ref(0, hp, first_bottom, roles, ref.backward);
  ref.forward.assign(static_cast<std::size_t>(counts.communities), CommunityState{});
  std::vector<bool> have(static_cast<std::size_t>(counts.communities), false);
  for (long i = 0; i < counts.communities; ++i)
    forward_ref(i, hp, ref.backward, ref.forward, have);
  return ref;
}

}  // namespace testref

namespace teststat {

inline double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_var(std::span<const double> xs) {
  double m = mean(xs), s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

// Regularized incomplete beta I_x(a, b) by continued fraction.
inline double betacf(double a, double b, double x) {
  const int kMaxIter = 300;
  const double eps = 3e-14, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
              b * std::log(1.0 - x);
  double front = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// P(T > t) for Student's t with df degrees of freedom.
inline double t_sf(double t, double df) {
  double p = 0.5 * ibeta(0.5 * df, 0.5, df / (df + t * t));
  return t >= 0.0 ? p : 1.0 - p;
}

// One-sided Welch test p-value for H1: mean(a) > mean(b).
inline double welch_p_greater(std::span<const double> a, std::span<const double> b) {
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double va = sample_var(a) / na, vb = sample_var(b) / nb;
  double t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  double df = (va + vb) * (va + vb) /
              (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return t_sf(t, df);
}

// Exact binomial upper tail P(X >= k) for X ~ Bin(n, p).
inline double binom_sf(long k, long n, double p) {
  double total = 0.0;
  for (long i = k; i <= n; ++i) {
    double lg = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                i * std::log(p) + (n - i) * std::log1p(-p);
    total += std::exp(lg);
  }
  return std::min(1.0, total);
}

// Asymptotic two-sample Kolmogorov-Smirnov p-value.
inline double ks2_p(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  double ne = static_cast<double>(a.size()) * b.size() / (a.size() + b.size());
  double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

inline std::vector<double> ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  for (std::size_t pos = 0; pos < idx.size();) {
    std::size_t end = pos;
    while (end + 1 < idx.size() && xs[idx[end + 1]] == xs[idx[pos]]) ++end;
    double avg = 0.5 * static_cast<double>(pos + end) + 1.0;
    for (std::size_t t = pos; t <= end; ++t) r[idx[t]] = avg;
    pos = end + 1;
  }
  return r;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  auto rx = ranks(x), ry = ranks(y);
  double mx = mean(rx), my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace teststat
