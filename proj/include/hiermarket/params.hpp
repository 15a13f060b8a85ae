#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace hiermarket {

/// Scalar market parameters. Field names follow the usual LM99 symbols;
/// beta_price is the price-adjustment frequency (beta is reused elsewhere for
/// the ACF decay exponent).
struct ModelParams {
  double alpha2 = 0.25;    // chartist sensitivity to the price trend
  double alpha3 = 1.0;     // sensitivity to excess profits
  double v1 = 4.0;         // opinion-revision frequency
  double v2 = 1.0;         // strategy-revision frequency
  double beta_price = 4.0; // price-adjustment frequency
  double r = 0.004;        // dividend per unit time
  double R = 0.0004;       // alternative return per unit time
  double s = 0.75;         // fundamentalist discount factor, in (0, 1]
  double p_f = 10.0;       // fundamental value
  double mu_noise = 0.1;   // stddev of demand noise
  double gamma = 0.01;     // fundamentalist reaction strength
  double t_c = 0.015;      // chartist trade volume
  double dt = 0.01;        // time step
  double dt_prime = 0.002; // trend lookback window
  double tick = 0.01;      // absolute price increment per adjustment event

  void validate() const {
    auto req = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("ModelParams: ") + what);
    };
    for (double v : {alpha2, alpha3, v1, v2, beta_price, r, R, s, p_f,
                     mu_noise, gamma, t_c, dt, dt_prime, tick})
      req(std::isfinite(v), "all parameters must be finite");
    req(dt > 0, "dt must be > 0");
    req(dt_prime > 0, "dt_prime must be > 0");
    req(p_f > 0, "p_f must be > 0");
    req(s > 0 && s <= 1, "s must lie in (0, 1]");
    req(tick > 0, "tick must be > 0");
  }
};

/// Hierarchy parameters: L levels, k children per community, diffusion
/// efficiency phi, child influences omega/upsilon and hierarchy strength b.
struct HierarchyParams {
  int L = 5;
  int k = 5;
  double phi = 0.5;
  double omega = 1.0;
  double upsilon = 1.0;
  double b = 1.8;

  void validate() const {
    auto req = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("HierarchyParams: ") + what);
    };
    req(L >= 2, "L must be >= 2");
    req(k >= 2, "k must be >= 2");
    for (double v : {phi, omega, upsilon, b}) {
      req(std::isfinite(v), "phi/omega/upsilon/b must be finite");
      req(v >= 0, "phi/omega/upsilon/b must be non-negative");
    }
  }
};

enum class Preset { SetII, SetIII, SetIV };

inline ModelParams preset_params(Preset p) {
  ModelParams m;  // defaults are Set II
  switch (p) {
    case Preset::SetII:
      break;
    case Preset::SetIII:
      m.alpha3 = 0.75;
      m.v1 = 0.5;
      m.v2 = 0.5;
      m.beta_price = 2.0;
      m.gamma = 0.02;
      m.t_c = 0.02;
      break;
    case Preset::SetIV:
      m.alpha2 = 0.2;
      m.v1 = 2.0;
      m.v2 = 0.6;
      m.mu_noise = 0.05;
      m.t_c = 0.01;
      break;
  }
  return m;
}

inline HierarchyParams preset_hierarchy(Preset p) {
  HierarchyParams h;
  switch (p) {
    case Preset::SetII:  h.b = 1.8;  break;
    case Preset::SetIII: h.b = 2.25; break;
    case Preset::SetIV:  h.b = 2.4;  break;
  }
  return h;
}

}  // namespace hiermarket
