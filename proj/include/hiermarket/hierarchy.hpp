#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hiermarket/params.hpp"

namespace hiermarket {

enum class TraderRole : std::uint8_t { Optimist, Pessimist, Fundamentalist };

/// Community opinion-mass vector [o, p, f]. Components are non-negative.
struct CommunityState {
  double o = 0.0;
  double p = 0.0;
  double f = 0.0;

  CommunityState& operator+=(const CommunityState& x) {
    o += x.o;
    p += x.p;
    f += x.f;
    return *this;
  }
  friend CommunityState operator*(double c, const CommunityState& x) {
    return {c * x.o, c * x.p, c * x.f};
  }
  friend CommunityState operator+(CommunityState a, const CommunityState& b) {
    return a += b;
  }
  friend bool operator==(const CommunityState&, const CommunityState&) = default;
};

/// Homogeneous leaf contribution: an optimist counts as [omega,0,0], a
/// pessimist as [0,upsilon,0], a fundamentalist as [0,0,1].
inline CommunityState role_vector(TraderRole role, double omega, double upsilon) {
  switch (role) {
    case TraderRole::Optimist: return {omega, 0.0, 0.0};
    case TraderRole::Pessimist: return {0.0, upsilon, 0.0};
    default: return {0.0, 0.0, 1.0};
  }
}

struct HierarchyCounts {
  long traders;      // N_t = k^(L-1), leaf count
  long communities;  // N_c = (k^(L-1) - 1)/(k - 1), internal node count
};

/// Node counts of a complete k-ary tree with L levels. Rejects configurations
/// where k^L overflows.
inline HierarchyCounts hierarchy_counts(const HierarchyParams& hp) {
  hp.validate();
  unsigned long long total = 1;  // (k^L - 1)/(k - 1)
  unsigned long long power = 1;  // k^level
  for (int level = 1; level < hp.L; ++level) {
    if (power > (1ULL << 61) / static_cast<unsigned long long>(hp.k))
      throw std::overflow_error("hierarchy_counts: k^L exceeds integer range");
    power *= static_cast<unsigned long long>(hp.k);
    total += power;
  }
  return {static_cast<long>(power), static_cast<long>(total - power)};
}

/// Complete k-ary hierarchy with community state vectors on internal nodes
/// (level order, root first) and discrete trader roles on the leaves. Parent
/// and child indices are computed arithmetically; no allocation during the
/// passes.
class HierarchyTree {
 public:
  HierarchyTree(const HierarchyParams& hp, std::vector<TraderRole> roles)
      : hp_(hp), roles_(std::move(roles)) {
    auto c = hierarchy_counts(hp);
    if (static_cast<long>(roles_.size()) != c.traders)
      throw std::invalid_argument("HierarchyTree: role count must equal k^(L-1)");
    states_.assign(static_cast<std::size_t>(c.communities), CommunityState{});
    // first community on the bottom internal level: offset of level L-1
    long off = 0, pw = 1;
    for (int level = 1; level < hp.L - 1; ++level) {
      off += pw;
      pw *= hp.k;
    }
    first_bottom_ = off;
  }

  const HierarchyParams& params() const { return hp_; }
  long num_communities() const { return static_cast<long>(states_.size()); }
  long num_traders() const { return static_cast<long>(roles_.size()); }
  long first_bottom_community() const { return first_bottom_; }

  const CommunityState& state(long i) const { return states_[static_cast<std::size_t>(i)]; }
  CommunityState& state(long i) { return states_[static_cast<std::size_t>(i)]; }
  const std::vector<CommunityState>& states() const { return states_; }

  TraderRole role(long leaf) const { return roles_[static_cast<std::size_t>(leaf)]; }
  void set_role(long leaf, TraderRole r) { roles_[static_cast<std::size_t>(leaf)] = r; }
  const std::vector<TraderRole>& roles() const { return roles_; }

  long parent_of(long node) const { return (node - 1) / hp_.k; }
  /// Community index of the leaf's parent.
  long leaf_parent(long leaf) const { return (num_communities() + leaf - 1) / hp_.k; }

  /// Bottom-up averaging: every community becomes the mean of its k children.
  /// leaf_vec(leaf_index, role) supplies the leaves' vectors, which lets
  /// scenario overlays modify influences without touching the pass itself.
  template <typename LeafFn>
  void backward_pass(LeafFn&& leaf_vec) {
    const long nc = num_communities();
    const double inv_k = 1.0 / hp_.k;
    for (long i = nc - 1; i >= 0; --i) {
      CommunityState sum{};
      if (i >= first_bottom_) {
        long leaf0 = (i - first_bottom_) * hp_.k;
        for (int c = 0; c < hp_.k; ++c)
          sum += leaf_vec(leaf0 + c, roles_[static_cast<std::size_t>(leaf0 + c)]);
      } else {
        long child0 = hp_.k * i + 1;
        for (int c = 0; c < hp_.k; ++c) sum += states_[static_cast<std::size_t>(child0 + c)];
      }
      states_[static_cast<std::size_t>(i)] = inv_k * sum;
    }
  }

  void backward_pass() {
    backward_pass([this](long, TraderRole r) { return role_vector(r, hp_.omega, hp_.upsilon); });
  }

  /// Top-down blending: C' = C/2 + phi * Q, each node reading its parent's
  /// already-updated state. The root keeps its backward-pass state. emit(node,
  /// state) is what a parent presents to its children (hook for corruption).
  template <typename EmitFn>
  void forward_pass(EmitFn&& emit) {
    const long nc = num_communities();
    for (long i = 1; i < nc; ++i) {
      long q = parent_of(i);
      states_[static_cast<std::size_t>(i)] =
          0.5 * states_[static_cast<std::size_t>(i)] +
          hp_.phi * emit(q, states_[static_cast<std::size_t>(q)]);
    }
  }

  void forward_pass() {
    forward_pass([](long, const CommunityState& s) { return s; });
  }

  /// (C_o, C_p) of the leaf's parent community, read after the forward pass.
  std::pair<double, double> local_opinion(long leaf) const {
    const CommunityState& s = states_[static_cast<std::size_t>(leaf_parent(leaf))];
    return {s.o, s.p};
  }

 private:
  HierarchyParams hp_;
  std::vector<CommunityState> states_;
  std::vector<TraderRole> roles_;
  long first_bottom_;
};

}  // namespace hiermarket
