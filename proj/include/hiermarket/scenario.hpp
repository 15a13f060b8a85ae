#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "hiermarket/hierarchy.hpp"

namespace hiermarket {

enum class EchoMode { Off, Asymmetric, Symmetric };

/// Echo-chamber configuration: a trader's influence is multiplied by E when
/// its opinion conforms to the majority of its parent community.
struct EchoConfig {
  EchoMode mode = EchoMode::Off;
  double E = 1.0;

  void validate() const {
    if (!(E >= 1.0) || !std::isfinite(E))
      throw std::invalid_argument("EchoConfig: E must be finite and >= 1");
  }
};

/// Leaf vector under an echo chamber. The majority is judged on the parent
/// community's previous-step post-forward state; ties leave influences at
/// their base values.
inline CommunityState effective_influence(TraderRole role,
                                          const CommunityState& parent_prev,
                                          const EchoConfig& echo, double omega,
                                          double upsilon) {
  double w = omega, u = upsilon;
  if (echo.mode != EchoMode::Off) {
    if (parent_prev.o > parent_prev.p) w = echo.E;
    if (echo.mode == EchoMode::Symmetric && parent_prev.p > parent_prev.o)
      u = echo.E;
  }
  return role_vector(role, w, u);
}

/// Pump-and-dump corruption of one community over steps [t_begin, t_end).
struct PumpDumpConfig {
  long target = 0;   // community (non-leaf) node id
  long t_begin = 0;  // T0
  long t_end = 0;    // T1
  double S = 0.0;    // signal strength

  void validate() const {
    if (target < 0) throw std::invalid_argument("PumpDumpConfig: target must be a community id");
    if (!(t_begin >= 0 && t_begin < t_end))
      throw std::invalid_argument("PumpDumpConfig: need 0 <= T0 < T1");
    if (!(S >= 0.0) || !std::isfinite(S))
      throw std::invalid_argument("PumpDumpConfig: S must be finite and >= 0");
  }
};

/// What a corrupted community presents to its children during the corruption
/// window: optimism inflated to S*(o+p+f), everything else honest. The stored
/// state and the upward contribution are untouched.
inline CommunityState corrupted_emission(const CommunityState& q, double S) {
  return {S * (q.o + q.p + q.f), q.p, q.f};
}

/// Success test for a pump-and-dump run: the corrupted run's peak price at or
/// after T0 must strictly exceed the nearest-rank 95th percentile of the
/// baseline per-run maxima over the same window.
inline bool pnd_success(std::span<const double> corrupted_prices,
                        std::span<const double> baseline_maxima, long t0) {
  if (baseline_maxima.size() < 50)
    throw std::invalid_argument("pnd_success: need at least 50 baseline runs");
  if (t0 < 0 || t0 >= static_cast<long>(corrupted_prices.size()))
    throw std::invalid_argument("pnd_success: T0 outside the corrupted series");
  double peak = *std::max_element(corrupted_prices.begin() + t0, corrupted_prices.end());
  std::vector<double> maxima(baseline_maxima.begin(), baseline_maxima.end());
  std::sort(maxima.begin(), maxima.end());
  // nearest-rank percentile: ceil(0.95 * n), 1-based (48th of 50)
  std::size_t rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(maxima.size())));
  return peak > maxima[rank - 1];
}

}  // namespace hiermarket
