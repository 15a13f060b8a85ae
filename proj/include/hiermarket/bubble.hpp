#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hiermarket {

namespace detail {

// ADF t-statistic for lags = 0 on y[start, end): regression
// dy_t = a + rho * y_{t-1} + e. Centered two-pass computation (equivalent to
// Gram-Schmidt orthogonalization against the intercept column), no
// allocation. Returns nullopt on a singular design.
inline std::optional<double> adf_t_lag0(const double* y, long start, long end) {
  long m = end - start - 1;
  if (m < 3) return std::nullopt;
  double sx = 0.0, sy = 0.0;
  for (long t = start + 1; t < end; ++t) {
    sx += y[t - 1];
    sy += y[t] - y[t - 1];
  }
  double mx = sx / static_cast<double>(m);
  double my = sy / static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (long t = start + 1; t < end; ++t) {
    double dx = y[t - 1] - mx;
    double dy = (y[t] - y[t - 1]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  double scale = std::max(1.0, syy + mx * mx);
  if (sxx <= 1e-24 * scale * static_cast<double>(m)) return std::nullopt;
  double rho = sxy / sxx;
  double rss = syy - rho * sxy;
  if (rss <= 1e-20 * scale * static_cast<double>(m)) return 0.0;  // exact fit
  double s2 = rss / static_cast<double>(m - 2);
  return rho / std::sqrt(s2 / sxx);
}

// General ADF t-statistic via modified Gram-Schmidt QR on the design
// [1, y_{t-1}, dy_{t-1}, ..., dy_{t-lags}].
inline std::optional<double> adf_t_general(std::span<const double> y, int lags) {
  long n = static_cast<long>(y.size());
  long m = n - 1 - lags;
  int p = lags + 2;
  if (m < p + 1) return std::nullopt;

  std::vector<std::vector<double>> q(static_cast<std::size_t>(p),
                                     std::vector<double>(static_cast<std::size_t>(m)));
  std::vector<double> resp(static_cast<std::size_t>(m));
  for (long i = 0; i < m; ++i) {
    long t = i + 1 + lags;
    q[0][static_cast<std::size_t>(i)] = 1.0;
    q[1][static_cast<std::size_t>(i)] = y[t - 1];
    for (int j = 1; j <= lags; ++j)
      q[static_cast<std::size_t>(1 + j)][static_cast<std::size_t>(i)] =
          y[t - j] - y[t - j - 1];
    resp[static_cast<std::size_t>(i)] = y[t] - y[t - 1];
  }

  std::vector<double> rmat(static_cast<std::size_t>(p * p), 0.0);
  auto R = [&](int i, int j) -> double& { return rmat[static_cast<std::size_t>(i * p + j)]; };
  for (int j = 0; j < p; ++j) {
    double norm0 = 0.0;
    for (long i = 0; i < m; ++i) norm0 += q[j][static_cast<std::size_t>(i)] * q[j][static_cast<std::size_t>(i)];
    for (int i = 0; i < j; ++i) {
      double dot = 0.0;
      for (long t = 0; t < m; ++t) dot += q[i][static_cast<std::size_t>(t)] * q[j][static_cast<std::size_t>(t)];
      R(i, j) = dot;
      for (long t = 0; t < m; ++t) q[j][static_cast<std::size_t>(t)] -= dot * q[i][static_cast<std::size_t>(t)];
    }
    double norm = 0.0;
    for (long t = 0; t < m; ++t) norm += q[j][static_cast<std::size_t>(t)] * q[j][static_cast<std::size_t>(t)];
    if (norm <= 1e-24 * std::max(1.0, norm0)) return std::nullopt;  // singular design
    R(j, j) = std::sqrt(norm);
    for (long t = 0; t < m; ++t) q[j][static_cast<std::size_t>(t)] /= R(j, j);
  }

  std::vector<double> c(static_cast<std::size_t>(p));
  double yy = 0.0;
  for (long t = 0; t < m; ++t) yy += resp[static_cast<std::size_t>(t)] * resp[static_cast<std::size_t>(t)];
  for (int j = 0; j < p; ++j) {
    double dot = 0.0;
    for (long t = 0; t < m; ++t) dot += q[j][static_cast<std::size_t>(t)] * resp[static_cast<std::size_t>(t)];
    c[static_cast<std::size_t>(j)] = dot;
    for (long t = 0; t < m; ++t) resp[static_cast<std::size_t>(t)] -= dot * q[j][static_cast<std::size_t>(t)];
  }
  double rss = 0.0;
  for (long t = 0; t < m; ++t) rss += resp[static_cast<std::size_t>(t)] * resp[static_cast<std::size_t>(t)];

  // back-substitution for the coefficients
  std::vector<double> beta(static_cast<std::size_t>(p));
  for (int i = p - 1; i >= 0; --i) {
    double v = c[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < p; ++j) v -= R(i, j) * beta[static_cast<std::size_t>(j)];
    beta[static_cast<std::size_t>(i)] = v / R(i, i);
  }

  // row 1 of R^{-1} gives se(rho): (X'X)^{-1} = R^{-1} R^{-T}
  std::vector<double> rinv_row(static_cast<std::size_t>(p), 0.0);
  rinv_row[1] = 1.0 / R(1, 1);
  for (int j = 2; j < p; ++j) {
    double v = 0.0;
    for (int i = 1; i < j; ++i) v -= rinv_row[static_cast<std::size_t>(i)] * R(i, j);
    rinv_row[static_cast<std::size_t>(j)] = v / R(j, j);
  }
  double diag = 0.0;
  for (int j = 1; j < p; ++j) diag += rinv_row[static_cast<std::size_t>(j)] * rinv_row[static_cast<std::size_t>(j)];

  if (rss <= 1e-20 * std::max(1.0, yy)) return 0.0;  // exact fit
  double s2 = rss / static_cast<double>(m - p);
  return beta[1] / std::sqrt(s2 * diag);
}

}  // namespace detail

/// ADF regression t-statistic of rho in
///   dy_t = a + rho * y_{t-1} + sum_j c_j * dy_{t-j} + e_t
/// (intercept, no trend). Absent on a singular design.
inline std::optional<double> adf_stat(std::span<const double> y, int lags = 0) {
  if (lags < 0) throw std::invalid_argument("adf_stat: lags must be >= 0");
  if (static_cast<long>(y.size()) < lags + 10)
    throw std::invalid_argument("adf_stat: series too short");
  if (lags == 0) return detail::adf_t_lag0(y.data(), 0, static_cast<long>(y.size()));
  return detail::adf_t_general(y, lags);
}

struct SadfResult {
  double stat;                   // sup of the recursion
  std::vector<double> sequence;  // per-r2 statistics, NaN where absent
  long min_window;               // ceil(r0 * n) observations
};

/// Forward recursive (expanding-window) sup-ADF. The sequence feeds PWY
/// date-stamping: element j is the statistic of window [0, min_window + j).
inline SadfResult sadf(std::span<const double> y, double r0, int lags = 0) {
  long n = static_cast<long>(y.size());
  if (!(r0 > 0.0 && r0 <= 1.0)) throw std::invalid_argument("sadf: r0 must lie in (0, 1]");
  long w0 = static_cast<long>(std::ceil(r0 * static_cast<double>(n)));
  if (w0 < lags + 10) throw std::invalid_argument("sadf: r0 * length too small");
  SadfResult res;
  res.min_window = w0;
  res.stat = -std::numeric_limits<double>::infinity();
  res.sequence.reserve(static_cast<std::size_t>(n - w0 + 1));
  for (long end = w0; end <= n; ++end) {
    std::optional<double> t =
        lags == 0 ? detail::adf_t_lag0(y.data(), 0, end)
                  : detail::adf_t_general(y.subspan(0, static_cast<std::size_t>(end)), lags);
    res.sequence.push_back(t ? *t : std::numeric_limits<double>::quiet_NaN());
    if (t && *t > res.stat) res.stat = *t;
  }
  return res;
}

/// Doubly recursive sup-ADF over all windows [r1, r2] with r2 - r1 >= r0.
inline double gsadf(std::span<const double> y, double r0, int lags = 0) {
  long n = static_cast<long>(y.size());
  if (!(r0 > 0.0 && r0 <= 1.0)) throw std::invalid_argument("gsadf: r0 must lie in (0, 1]");
  long w0 = static_cast<long>(std::ceil(r0 * static_cast<double>(n)));
  if (w0 < lags + 10) throw std::invalid_argument("gsadf: r0 * length too small");
  double sup = -std::numeric_limits<double>::infinity();
  for (long start = 0; start + w0 <= n; ++start) {
    for (long end = start + w0; end <= n; ++end) {
      std::optional<double> t =
          lags == 0
              ? detail::adf_t_lag0(y.data(), start, end)
              : detail::adf_t_general(
                    y.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(end - start)),
                    lags);
      if (t && *t > sup) sup = *t;
    }
  }
  return sup;
}

/// PWY date-stamping: maximal runs of the SADF recursion above the critical
/// value, with runs separated by fewer than merge_gap observations merged.
/// Intervals are inclusive positions in the analyzed series (element j of the
/// sequence ends at position min_window - 1 + j).
inline std::vector<std::pair<long, long>> pwy_stamp(std::span<const double> sequence,
                                                    double cv, long min_window,
                                                    long merge_gap = 3) {
  std::vector<std::pair<long, long>> intervals;
  long run_start = -1;
  long len = static_cast<long>(sequence.size());
  for (long j = 0; j <= len; ++j) {
    bool above = j < len && !std::isnan(sequence[j]) && sequence[j] > cv;
    if (above && run_start < 0) run_start = j;
    if (!above && run_start >= 0) {
      long pos0 = min_window - 1 + run_start;
      long pos1 = min_window - 1 + (j - 1);
      if (!intervals.empty() && pos0 - intervals.back().second - 1 < merge_gap)
        intervals.back().second = pos1;
      else
        intervals.emplace_back(pos0, pos1);
      run_start = -1;
    }
  }
  return intervals;
}

enum class BubbleTest { Sadf, Gsadf };

struct CriticalValue {
  double cv;
  double r0;
};

namespace detail {

struct CvRow {
  long n;
  double sadf[3];   // 90, 95, 100
  double gsadf[3];  // 90, 95, 100
  double r0;
};

// Asymptotic SADF and finite-sample GSADF critical values with the matching
// minimum window fractions.
inline constexpr CvRow kCvTable[] = {
    {100, {1.10, 1.37, 1.88}, {1.65, 2.00, 2.57}, 0.190},
    {200, {1.12, 1.41, 2.03}, {1.84, 2.08, 2.70}, 0.137},
    {400, {1.20, 1.49, 2.07}, {1.92, 2.20, 2.80}, 0.100},
    {800, {1.21, 1.51, 2.06}, {2.10, 2.34, 2.79}, 0.074},
    {1600, {1.23, 1.51, 2.06}, {2.19, 2.41, 2.87}, 0.055},
};

inline int level_index(int level) {
  switch (level) {
    case 90: return 0;
    case 95: return 1;
    case 100: return 2;
    default: throw std::invalid_argument("critical_value: level must be 90, 95 or 100");
  }
}

}  // namespace detail

/// Tabulated critical value for sample size n, interpolated linearly in
/// ln(n) between bracketing rows; n above the last row clamps to it. The r0
/// column (shared by both tests) is interpolated the same way.
inline CriticalValue critical_value(BubbleTest test, long n, int level) {
  if (n < 100) throw std::invalid_argument("critical_value: n must be >= 100");
  int li = detail::level_index(level);
  const auto& tab = detail::kCvTable;
  constexpr int rows = static_cast<int>(std::size(detail::kCvTable));
  auto pick = [&](int row) {
    return test == BubbleTest::Sadf ? tab[row].sadf[li] : tab[row].gsadf[li];
  };
  if (n >= tab[rows - 1].n) return {pick(rows - 1), tab[rows - 1].r0};
  int hi = 1;
  while (tab[hi].n < n) ++hi;
  int lo = hi - 1;
  double w = (std::log(static_cast<double>(n)) - std::log(static_cast<double>(tab[lo].n))) /
             (std::log(static_cast<double>(tab[hi].n)) - std::log(static_cast<double>(tab[lo].n)));
  return {pick(lo) + w * (pick(hi) - pick(lo)), tab[lo].r0 + w * (tab[hi].r0 - tab[lo].r0)};
}

struct BubbleReport {
  double sadf_stat = 0.0;
  double gsadf_stat = 0.0;
  bool sadf_significant = false;
  bool gsadf_significant = false;
  std::vector<std::pair<long, long>> explosive_intervals;  // step positions
  int level = 90;
  long stride = 1;
};

/// Right-tailed bubble tests on a price series downsampled to one observation
/// every `stride` steps. Stamped intervals are mapped back to step positions.
inline BubbleReport detect_bubbles(std::span<const double> prices, long stride,
                                   int level, int lags = 0) {
  if (stride < 1) throw std::invalid_argument("detect_bubbles: stride must be >= 1");
  std::vector<double> y;
  y.reserve(prices.size() / static_cast<std::size_t>(stride) + 1);
  for (std::size_t i = 0; i < prices.size(); i += static_cast<std::size_t>(stride))
    y.push_back(prices[i]);
  long n = static_cast<long>(y.size());

  BubbleReport rep;
  rep.level = level;
  rep.stride = stride;
  auto cv_s = critical_value(BubbleTest::Sadf, n, level);
  auto cv_g = critical_value(BubbleTest::Gsadf, n, level);
  auto s = sadf(y, cv_s.r0, lags);
  rep.sadf_stat = s.stat;
  rep.gsadf_stat = gsadf(y, cv_g.r0, lags);
  rep.sadf_significant = rep.sadf_stat > cv_s.cv;
  rep.gsadf_significant = rep.gsadf_stat > cv_g.cv;
  for (auto [a, b] : pwy_stamp(s.sequence, cv_s.cv, s.min_window))
    rep.explosive_intervals.emplace_back(a * stride, b * stride);
  return rep;
}

}  // namespace hiermarket
