#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hiermarket/hierarchy.hpp"
#include "hiermarket/params.hpp"
#include "hiermarket/rng.hpp"
#include "hiermarket/scenario.hpp"

namespace hiermarket {

struct RoleCounts {
  long n_o = 0;
  long n_p = 0;
  long n_f = 0;
  long chartists() const { return n_o + n_p; }
  long total() const { return n_o + n_p + n_f; }
};

struct ExcessProfits {
  double fundamentalist;  // EP_f
  double optimist;        // EP_+
  double pessimist;       // EP_- = -EP_+
};

struct Pressures {
  double u1;   // optimist <-> pessimist
  double u21;  // optimist <-> fundamentalist
  double u22;  // pessimist <-> fundamentalist
};

struct TransitionProbabilities {
  double o_to_p, p_to_o;
  double o_to_f, f_to_o;
  double p_to_f, f_to_p;
};

/// Price trend: (p_t - p_{t-l}) / dt' with l = max(1, round(dt'/dt)) steps.
/// Returns 0 while the history is too short.
inline double price_trend(std::span<const double> prices, const ModelParams& mp) {
  long lag = std::max(1L, std::lround(mp.dt_prime / mp.dt));
  long n = static_cast<long>(prices.size());
  if (n < lag + 1) return 0.0;
  return (prices[n - 1] - prices[n - 1 - lag]) / mp.dt_prime;
}

inline ExcessProfits excess_profits(double price, double pdot, const ModelParams& mp) {
  if (!(price > 0)) throw std::invalid_argument("excess_profits: price must be > 0");
  double ep_f = mp.s * std::abs((mp.p_f - price) / price);
  double ep_plus = (mp.r + pdot / mp.v2) / price - mp.R;
  return {ep_f, ep_plus, -ep_plus};
}

/// Transition pressures. The community term of U1 is defined as 0 when the
/// local chartist mass vanishes.
inline Pressures transition_pressures(double c_o, double c_p, double pdot,
                                      const ExcessProfits& ep,
                                      const ModelParams& mp, double b) {
  double mass = c_o + c_p;
  double opinion = mass < 1e-12 ? 0.0 : (c_o - c_p) / mass;
  return {b * opinion + mp.alpha2 * pdot / mp.v1,
          mp.alpha3 * (ep.fundamentalist - ep.optimist),
          mp.alpha3 * (ep.fundamentalist - ep.pessimist)};
}

namespace detail {
inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

/// Clamp a trader's two exit probabilities to [0,1] and renormalize
/// proportionally if they jointly exceed 1.
inline void normalize_exits(double& a, double& b) {
  a = clamp01(a);
  b = clamp01(b);
  double sum = a + b;
  if (sum > 1.0) {
    a /= sum;
    b /= sum;
  }
}
}  // namespace detail

inline TransitionProbabilities transition_probabilities(const RoleCounts& counts,
                                                        const Pressures& u,
                                                        const ModelParams& mp) {
  double n = static_cast<double>(counts.total());
  if (!(n > 0)) throw std::invalid_argument("transition_probabilities: N must be > 0");
  double nc = static_cast<double>(counts.chartists());
  double no = static_cast<double>(counts.n_o);
  double np = static_cast<double>(counts.n_p);
  double nf = static_cast<double>(counts.n_f);
  using detail::clamp01;
  return {clamp01(mp.v1 * (nc / n) * std::exp(-u.u1) * mp.dt),
          clamp01(mp.v1 * (nc / n) * std::exp(u.u1) * mp.dt),
          clamp01(mp.v2 * (no / n) * std::exp(-u.u21) * mp.dt),
          clamp01(mp.v2 * (nf / n) * std::exp(u.u21) * mp.dt),
          clamp01(mp.v2 * (np / n) * std::exp(-u.u22) * mp.dt),
          clamp01(mp.v2 * (nf / n) * std::exp(u.u22) * mp.dt)};
}

struct ExcessDemand {
  double chartist;       // ED_c = (n_o - n_p) * t_c
  double fundamentalist; // ED_f = n_f * gamma * (p_f - p)
};

inline ExcessDemand excess_demand(const RoleCounts& counts, double price,
                                  const ModelParams& mp) {
  return {static_cast<double>(counts.n_o - counts.n_p) * mp.t_c,
          static_cast<double>(counts.n_f) * mp.gamma * (mp.p_f - price)};
}

/// One price-adjustment event: with probability beta*(ED+noise)*dt the price
/// moves one tick up (mirrored for down), floored at one tick.
inline double price_update(double price, const ExcessDemand& ed,
                           const ModelParams& mp, Rng& rng) {
  double noise = rng.normal(0.0, mp.mu_noise);
  double pressure = mp.beta_price * (ed.chartist + ed.fundamentalist + noise);
  double pi_up = detail::clamp01(std::max(0.0, pressure) * mp.dt);
  double pi_down = detail::clamp01(std::max(0.0, -pressure) * mp.dt);
  double u = rng.uniform();
  if (u < pi_up)
    price += mp.tick;
  else if (u < pi_up + pi_down)
    price -= mp.tick;
  return std::max(price, mp.tick);
}

/// Per-step record of one run. Index 0 is the initial state; step t appends
/// row t. Bit-for-bit reproducible from (params, hparams, seed).
struct MarketSeries {
  std::vector<double> price;
  std::vector<double> fundamental;
  std::vector<long> n_o, n_p, n_f;
  std::uint64_t seed = 0;

  long size() const { return static_cast<long>(price.size()); }
  void append(double p, double f, const RoleCounts& c) {
    price.push_back(p);
    fundamental.push_back(f);
    n_o.push_back(c.n_o);
    n_p.push_back(c.n_p);
    n_f.push_back(c.n_f);
  }
};

/// Round-robin O,P,F role assignment with n_o = n_p and the remainder given
/// to fundamentalists.
inline std::vector<TraderRole> initial_roles(long n_traders) {
  long pair = n_traders / 3;
  std::vector<TraderRole> roles(static_cast<std::size_t>(n_traders),
                                TraderRole::Fundamentalist);
  static constexpr TraderRole pattern[3] = {
      TraderRole::Optimist, TraderRole::Pessimist, TraderRole::Fundamentalist};
  for (long i = 0; i < 3 * pair; ++i) roles[static_cast<std::size_t>(i)] = pattern[i % 3];
  return roles;
}

/// A single simulation run: owns its tree, RNG and series. Strictly
/// single-threaded; independent runs parallelize across instances.
class Simulation {
 public:
  Simulation(const ModelParams& mp, const HierarchyParams& hp, std::uint64_t seed,
             EchoConfig echo = {}, std::optional<PumpDumpConfig> pnd = {})
      : mp_(mp),
        hp_(hp),
        echo_(echo),
        pnd_(std::move(pnd)),
        rng_(seed),
        tree_(hp, initial_roles(hierarchy_counts(hp).traders)) {
    mp_.validate();
    echo_.validate();
    if (pnd_) {
      pnd_->validate();
      if (pnd_->target >= tree_.num_communities())
        throw std::invalid_argument("Simulation: pump-and-dump target is not a community");
    }
    recount();
    price_ = mp_.p_f;
    // seed the community states so step 0 echo majorities are well defined
    tree_.backward_pass();
    tree_.forward_pass();
    long nb = tree_.num_communities() - tree_.first_bottom_community();
    prev_bottom_.assign(static_cast<std::size_t>(nb), CommunityState{});
    exp_pos_u1_.assign(static_cast<std::size_t>(nb), 1.0);
    exp_neg_u1_.assign(static_cast<std::size_t>(nb), 1.0);
    order_.resize(static_cast<std::size_t>(tree_.num_traders()));
    std::iota(order_.begin(), order_.end(), 0L);
    series_.seed = seed;
    series_.append(price_, mp_.p_f, counts_);
  }

  const MarketSeries& series() const { return series_; }
  const HierarchyTree& tree() const { return tree_; }
  const RoleCounts& counts() const { return counts_; }

  void run(long steps) {
    for (long i = 0; i < steps; ++i) step();
  }

  void step() {
    const long first_bottom = tree_.first_bottom_community();
    const long n_bottom = tree_.num_communities() - first_bottom;

    // snapshot bottom-level states: echo majorities look at the previous step
    for (long i = 0; i < n_bottom; ++i)
      prev_bottom_[static_cast<std::size_t>(i)] = tree_.state(first_bottom + i);

    tree_.backward_pass([&](long leaf, TraderRole role) {
      const CommunityState& prev =
          prev_bottom_[static_cast<std::size_t>(tree_.leaf_parent(leaf) - first_bottom)];
      return effective_influence(role, prev, echo_, hp_.omega, hp_.upsilon);
    });

    if (pnd_ && step_ >= pnd_->t_begin && step_ < pnd_->t_end) {
      const long target = pnd_->target;
      const double s = pnd_->S;
      tree_.forward_pass([&](long node, const CommunityState& st) {
        return node == target ? corrupted_emission(st, s) : st;
      });
    } else {
      tree_.forward_pass();
    }

    double pdot = price_trend(series_.price, mp_);
    ExcessProfits ep = excess_profits(price_, pdot, mp_);
    double u21 = mp_.alpha3 * (ep.fundamentalist - ep.optimist);
    double u22 = mp_.alpha3 * (ep.fundamentalist - ep.pessimist);
    const double e_pos_u21 = std::exp(u21), e_neg_u21 = std::exp(-u21);
    const double e_pos_u22 = std::exp(u22), e_neg_u22 = std::exp(-u22);

    // U1 varies only through the leaf's community; cache its exponentials
    const double trend_term = mp_.alpha2 * pdot / mp_.v1;
    for (long i = 0; i < n_bottom; ++i) {
      const CommunityState& st = tree_.state(first_bottom + i);
      double mass = st.o + st.p;
      double opinion = mass < 1e-12 ? 0.0 : (st.o - st.p) / mass;
      double u1 = hp_.b * opinion + trend_term;
      exp_pos_u1_[static_cast<std::size_t>(i)] = std::exp(u1);
      exp_neg_u1_[static_cast<std::size_t>(i)] = std::exp(-u1);
    }

    const double n = static_cast<double>(counts_.total());
    const double rate_c = mp_.v1 * (static_cast<double>(counts_.chartists()) / n) * mp_.dt;
    const double rate_o = mp_.v2 * (static_cast<double>(counts_.n_o) / n) * mp_.dt;
    const double rate_p = mp_.v2 * (static_cast<double>(counts_.n_p) / n) * mp_.dt;
    const double rate_f = mp_.v2 * (static_cast<double>(counts_.n_f) / n) * mp_.dt;

    shuffle(order_, rng_);
    RoleCounts next = counts_;
    for (long trader : order_) {
      long c = tree_.leaf_parent(trader) - first_bottom;
      double exit1, exit2;
      TraderRole to1, to2;
      switch (tree_.role(trader)) {
        case TraderRole::Optimist:
          exit1 = rate_c * exp_neg_u1_[static_cast<std::size_t>(c)];
          to1 = TraderRole::Pessimist;
          exit2 = rate_o * e_neg_u21;
          to2 = TraderRole::Fundamentalist;
          break;
        case TraderRole::Pessimist:
          exit1 = rate_c * exp_pos_u1_[static_cast<std::size_t>(c)];
          to1 = TraderRole::Optimist;
          exit2 = rate_p * e_neg_u22;
          to2 = TraderRole::Fundamentalist;
          break;
        default:
          exit1 = rate_f * e_pos_u21;
          to1 = TraderRole::Optimist;
          exit2 = rate_f * e_pos_u22;
          to2 = TraderRole::Pessimist;
          break;
      }
      detail::normalize_exits(exit1, exit2);
      double u = rng_.uniform();
      if (u < exit1)
        apply_transition(next, trader, to1);
      else if (u < exit1 + exit2)
        apply_transition(next, trader, to2);
    }
    counts_ = next;

    ExcessDemand ed = excess_demand(counts_, price_, mp_);
    price_ = price_update(price_, ed, mp_, rng_);

    ++step_;
    series_.append(price_, mp_.p_f, counts_);
  }

 private:
  void apply_transition(RoleCounts& next, long trader, TraderRole to) {
    switch (tree_.role(trader)) {
      case TraderRole::Optimist: --next.n_o; break;
      case TraderRole::Pessimist: --next.n_p; break;
      default: --next.n_f; break;
    }
    switch (to) {
      case TraderRole::Optimist: ++next.n_o; break;
      case TraderRole::Pessimist: ++next.n_p; break;
      default: ++next.n_f; break;
    }
    tree_.set_role(trader, to);
  }

  void recount() {
    counts_ = {};
    for (TraderRole r : tree_.roles()) {
      if (r == TraderRole::Optimist)
        ++counts_.n_o;
      else if (r == TraderRole::Pessimist)
        ++counts_.n_p;
      else
        ++counts_.n_f;
    }
  }

  ModelParams mp_;
  HierarchyParams hp_;
  EchoConfig echo_;
  std::optional<PumpDumpConfig> pnd_;
  Rng rng_;
  HierarchyTree tree_;
  RoleCounts counts_;
  double price_ = 0.0;
  long step_ = 0;
  MarketSeries series_;
  std::vector<CommunityState> prev_bottom_;
  std::vector<double> exp_pos_u1_, exp_neg_u1_;
  std::vector<long> order_;
};

}  // namespace hiermarket
