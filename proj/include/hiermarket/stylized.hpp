#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hiermarket {

/// Log-returns at horizon T (in steps): R_t = ln p_t - ln p_{t-T}.
inline std::vector<double> log_returns(std::span<const double> prices, long horizon) {
  long n = static_cast<long>(prices.size());
  if (horizon < 1) throw std::invalid_argument("log_returns: horizon must be >= 1");
  if (n <= horizon) throw std::invalid_argument("log_returns: series shorter than horizon");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n - horizon));
  for (long t = horizon; t < n; ++t)
    out.push_back(std::log(prices[t]) - std::log(prices[t - horizon]));
  return out;
}

inline std::vector<double> abs_values(std::span<const double> xs) {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [](double x) { return std::abs(x); });
  return out;
}

inline std::vector<double> squared_values(std::span<const double> xs) {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(), [](double x) { return x * x; });
  return out;
}

/// Hill tail-index estimator on the top m = floor(tail_fraction * n) order
/// statistics. Zero values are dropped before sorting; the metric is absent
/// when fewer than 10 tail observations remain.
inline std::optional<double> hill_alpha(std::span<const double> abs_returns,
                                        double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction < 0.5))
    throw std::invalid_argument("hill_alpha: tail_fraction must lie in (0, 0.5)");
  std::vector<double> x;
  x.reserve(abs_returns.size());
  for (double v : abs_returns)
    if (v != 0.0) x.push_back(v);
  long n = static_cast<long>(x.size());
  long m = static_cast<long>(std::floor(tail_fraction * static_cast<double>(n)));
  if (m < 10) return std::nullopt;
  std::sort(x.begin(), x.end());
  double threshold = x[static_cast<std::size_t>(n - m - 1)];  // X_(n-m), 1-based
  if (!(threshold > 0.0)) return std::nullopt;
  double sum = 0.0;
  for (long i = 0; i < m; ++i)
    sum += std::log(x[static_cast<std::size_t>(n - 1 - i)]) - std::log(threshold);
  return static_cast<double>(m) / sum;
}

/// Sample excess kurtosis, adjusted Fisher convention (the pandas/SPSS G2).
/// Absent when the variance vanishes.
inline std::optional<double> excess_kurtosis(std::span<const double> xs) {
  long n = static_cast<long>(xs.size());
  if (n < 4) throw std::invalid_argument("excess_kurtosis: need at least 4 observations");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    double d = x - mean;
    double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 <= 0.0) return std::nullopt;
  double g2 = m4 / (m2 * m2) - 3.0;
  double dn = static_cast<double>(n);
  return ((dn + 1.0) * g2 + 6.0) * (dn - 1.0) / ((dn - 2.0) * (dn - 3.0));
}

/// Sample autocorrelation at the given lag, full-sample mean and variance.
inline std::optional<double> acf(std::span<const double> xs, long lag) {
  long n = static_cast<long>(xs.size());
  if (lag < 0 || n <= lag) throw std::invalid_argument("acf: need length > lag >= 0");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0, cov = 0.0;
  for (long t = 0; t < n; ++t) {
    double d = xs[t] - mean;
    var += d * d;
    if (t >= lag) cov += d * (xs[t - lag] - mean);
  }
  if (var <= 0.0) return std::nullopt;
  return cov / var;
}

struct DecayFit {
  double a;
  double beta;
};

/// Power-law fit ACF_tau ~ a * tau^(-beta) on ACF values at lags 1..len by
/// log-log linear least squares, using only lags with positive ACF. Absent
/// with fewer than 5 usable points.
inline std::optional<DecayFit> decay_fit_from_acf(std::span<const double> acf_values) {
  std::vector<std::pair<double, double>> pts;  // (ln tau, ln acf)
  for (long tau = 1; tau <= static_cast<long>(acf_values.size()); ++tau) {
    double rho = acf_values[static_cast<std::size_t>(tau - 1)];
    if (rho > 0.0) pts.emplace_back(std::log(static_cast<double>(tau)), std::log(rho));
  }
  if (pts.size() < 5) return std::nullopt;
  double n = static_cast<double>(pts.size());
  double sx = 0.0, sy = 0.0;
  for (auto [x, y] : pts) {
    sx += x;
    sy += y;
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (auto [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx <= 0.0) return std::nullopt;
  double slope = sxy / sxx;
  return DecayFit{std::exp(my - slope * mx), -slope};
}

/// Decay fit of the sample ACF of a return series over lags 1..max_lag.
inline std::optional<DecayFit> acf_decay_fit(std::span<const double> abs_returns,
                                             long max_lag) {
  std::vector<double> values;
  for (long tau = 1; tau <= max_lag; ++tau) {
    if (static_cast<long>(abs_returns.size()) <= tau) break;
    auto rho = acf(abs_returns, tau);
    values.push_back(rho ? *rho : 0.0);
  }
  return decay_fit_from_acf(values);
}

/// Population standard deviation of the price series.
inline double volatility(std::span<const double> prices) {
  long n = static_cast<long>(prices.size());
  if (n < 2) throw std::invalid_argument("volatility: need at least 2 observations");
  double mean = 0.0;
  for (double p : prices) mean += p;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double p : prices) ss += (p - mean) * (p - mean);
  return std::sqrt(ss / static_cast<double>(n));
}

/// F_sigma: RMS deviation from the fundamental minus the price volatility.
/// May be negative.
inline double fundamental_deviation(std::span<const double> prices,
                                    std::span<const double> fundamentals) {
  if (prices.size() != fundamentals.size())
    throw std::invalid_argument("fundamental_deviation: length mismatch");
  long n = static_cast<long>(prices.size());
  if (n < 2) throw std::invalid_argument("fundamental_deviation: need at least 2 observations");
  double ss = 0.0;
  for (long i = 0; i < n; ++i) {
    double d = prices[i] - fundamentals[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(n)) - volatility(prices);
}

/// Per-run stylized-fact metrics. Fields are absent when their preconditions
/// fail (short series, zero variance, thin tails).
struct StylizedReport {
  std::optional<double> tail_alpha_2_5, tail_alpha_5, tail_alpha_10;
  std::optional<double> kurtosis_t1, kurtosis_t10, kurtosis_t50;
  std::optional<double> acf_abs_lag10, acf_sq_lag10;
  std::optional<double> decay_a, decay_beta;
  double sigma = 0.0;
  double f_sigma = 0.0;
};

/// Metrics of one run: Hill tails on |returns| at T=1, kurtosis ladder at
/// T in {1,10,50}, ACF of absolute and squared T=70 returns at lag 10, and
/// the power-law decay fit over lags 1..70.
inline StylizedReport compute_stylized(std::span<const double> prices,
                                       std::span<const double> fundamentals) {
  StylizedReport rep;
  rep.sigma = volatility(prices);
  rep.f_sigma = fundamental_deviation(prices, fundamentals);
  long n = static_cast<long>(prices.size());

  if (n > 1) {
    auto r1 = log_returns(prices, 1);
    auto a1 = abs_values(r1);
    rep.tail_alpha_2_5 = hill_alpha(a1, 0.025);
    rep.tail_alpha_5 = hill_alpha(a1, 0.05);
    rep.tail_alpha_10 = hill_alpha(a1, 0.10);
    if (static_cast<long>(r1.size()) >= 4) rep.kurtosis_t1 = excess_kurtosis(r1);
  }
  if (n > 10) {
    auto r10 = log_returns(prices, 10);
    if (static_cast<long>(r10.size()) >= 4) rep.kurtosis_t10 = excess_kurtosis(r10);
  }
  if (n > 50) {
    auto r50 = log_returns(prices, 50);
    if (static_cast<long>(r50.size()) >= 4) rep.kurtosis_t50 = excess_kurtosis(r50);
  }
  if (n > 70 + 10) {
    auto r70 = log_returns(prices, 70);
    auto a70 = abs_values(r70);
    rep.acf_abs_lag10 = acf(a70, 10);
    rep.acf_sq_lag10 = acf(squared_values(r70), 10);
    if (auto fit = acf_decay_fit(a70, 70)) {
      rep.decay_a = fit->a;
      rep.decay_beta = fit->beta;
    }
  }
  return rep;
}

}  // namespace hiermarket
