#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hiermarket/hierarchy.hpp"
#include "hiermarket/market.hpp"
#include "hiermarket/rng.hpp"
#include "helpers.hpp"

using namespace hiermarket;

namespace {

std::vector<TraderRole> random_roles(long n, Rng& rng) {
  std::vector<TraderRole> roles(static_cast<std::size_t>(n));
  for (auto& r : roles) {
    switch (rng.below(3)) {
      case 0: r = TraderRole::Optimist; break;
      case 1: r = TraderRole::Pessimist; break;
      default: r = TraderRole::Fundamentalist; break;
    }
  }
  return roles;
}

}  // namespace

TEST_CASE("hierarchy_counts matches the geometric series") {
  SECTION("paper configuration L=5, k=5") {
    auto c = hierarchy_counts({.L = 5, .k = 5});
    CHECK(c.traders == 625);
    CHECK(c.communities == 156);
  }
  SECTION("smallest tree L=2, k=2") {
    auto c = hierarchy_counts({.L = 2, .k = 2});
    CHECK(c.traders == 2);
    CHECK(c.communities == 1);
  }
  SECTION("count identity over a range of shapes") {
    for (int L = 2; L <= 6; ++L)
      for (int k = 2; k <= 4; ++k) {
        auto c = hierarchy_counts({.L = L, .k = k});
        long total = 0, pw = 1;
        for (int level = 0; level < L; ++level) {
          total += pw;
          pw *= k;
        }
        CHECK(c.traders + c.communities == total);
      }
  }
  SECTION("rejects configurations that overflow") {
    CHECK_THROWS_AS(hierarchy_counts({.L = 64, .k = 5}), std::overflow_error);
  }
  SECTION("rejects degenerate shapes") {
    CHECK_THROWS_AS(hierarchy_counts({.L = 1, .k = 5}), std::invalid_argument);
    CHECK_THROWS_AS(hierarchy_counts({.L = 5, .k = 1}), std::invalid_argument);
  }
}

TEST_CASE("backward pass averages children") {
  SECTION("homogeneous community of optimists") {
    HierarchyParams hp{.L = 2, .k = 5, .omega = 1.0};
    HierarchyTree tree(hp, std::vector<TraderRole>(5, TraderRole::Optimist));
    tree.backward_pass();
    CHECK(tree.state(0) == CommunityState{1.0, 0.0, 0.0});
  }
  SECTION("mixed community, direct average") {
    // children [1,0,0], [0,1,0], [0,0,1], [0,0,1], [1,0,0] with omega=upsilon=1
    HierarchyParams hp{.L = 2, .k = 5};
    HierarchyTree tree(hp, {TraderRole::Optimist, TraderRole::Pessimist,
                            TraderRole::Fundamentalist, TraderRole::Fundamentalist,
                            TraderRole::Optimist});
    tree.backward_pass();
    CHECK(tree.state(0).o == Catch::Approx(0.4));
    CHECK(tree.state(0).p == Catch::Approx(0.2));
    CHECK(tree.state(0).f == Catch::Approx(0.4));
  }
  SECTION("two-level recursion on an L=3, k=2 tree") {
    HierarchyParams hp{.L = 3, .k = 2};
    std::vector<TraderRole> roles{TraderRole::Optimist, TraderRole::Pessimist,
                                  TraderRole::Fundamentalist, TraderRole::Optimist};
    HierarchyTree tree(hp, roles);
    tree.backward_pass();
    auto ref = testref::reference_passes(hp, roles);
    CHECK(tree.state(0) == ref.backward[0]);
    // root is the mean of the two level-2 communities
    CHECK(tree.state(0).o == Catch::Approx(0.5 * (tree.state(1).o + tree.state(2).o)));
  }
}

TEST_CASE("forward pass blends with the parent") {
  HierarchyParams hp{.L = 3, .k = 2, .phi = 0.5};
  std::vector<TraderRole> roles(4, TraderRole::Optimist);
  HierarchyTree tree(hp, roles);

  SECTION("direct evaluation C' = C/2 + phi*Q") {
    tree.state(0) = {0.0, 1.0, 0.0};
    tree.state(1) = {1.0, 0.0, 0.0};
    tree.state(2) = {1.0, 0.0, 0.0};
    tree.forward_pass();
    CHECK(tree.state(1).o == Catch::Approx(0.5));
    CHECK(tree.state(1).p == Catch::Approx(0.5));
    CHECK(tree.state(1).f == 0.0);
    CHECK(tree.state(0) == CommunityState{0.0, 1.0, 0.0});  // root unchanged
  }
  SECTION("phi = 0 halves every non-root state") {
    HierarchyParams insular = hp;
    insular.phi = 0.0;
    HierarchyTree t2(insular, roles);
    t2.state(0) = {0.2, 0.3, 0.5};
    t2.state(1) = {0.6, 0.2, 0.2};
    t2.forward_pass();
    CHECK(t2.state(1).o == Catch::Approx(0.3));
    CHECK(t2.state(1).p == Catch::Approx(0.1));
    CHECK(t2.state(1).f == Catch::Approx(0.1));
  }
  SECTION("fixed point when child equals parent at phi = 0.5") {
    tree.state(0) = {0.4, 0.2, 0.4};
    tree.state(1) = {0.4, 0.2, 0.4};
    tree.forward_pass();
    CHECK(tree.state(1).o == Catch::Approx(0.4));
    CHECK(tree.state(1).p == Catch::Approx(0.2));
    CHECK(tree.state(1).f == Catch::Approx(0.4));
  }
}

TEST_CASE("local_opinion reads the leaf's parent community") {
  HierarchyParams hp{.L = 2, .k = 3};
  HierarchyTree tree(hp, std::vector<TraderRole>(3, TraderRole::Optimist));
  tree.state(0) = {1.0, 0.0, 0.0};
  CHECK(tree.local_opinion(0) == std::pair{1.0, 0.0});
  tree.state(0) = {0.5, 0.5, 0.0};
  CHECK(tree.local_opinion(1) == std::pair{0.5, 0.5});
  tree.state(0) = {0.0, 0.0, 1.0};
  CHECK(tree.local_opinion(2) == std::pair{0.0, 0.0});
}

TEST_CASE("passes match the recursive reference bit-for-bit (L<=3, k<=3)") {
  Rng rng(42);
  for (int L = 2; L <= 3; ++L)
    for (int k = 2; k <= 3; ++k) {
      HierarchyParams hp{.L = L, .k = k, .phi = 0.7, .omega = 1.3, .upsilon = 0.8};
      for (int rep = 0; rep < 20; ++rep) {
        auto roles = random_roles(hierarchy_counts(hp).traders, rng);
        HierarchyTree tree(hp, roles);
        tree.backward_pass();
        auto ref = testref::reference_passes(hp, roles);
        for (long i = 0; i < tree.num_communities(); ++i)
          REQUIRE(tree.state(i) == ref.backward[static_cast<std::size_t>(i)]);
        tree.forward_pass();
        for (long i = 0; i < tree.num_communities(); ++i)
          REQUIRE(tree.state(i) == ref.forward[static_cast<std::size_t>(i)]);
      }
    }
}

TEST_CASE("backward pass properties") {
  Rng rng(7);
  HierarchyParams hp{.L = 4, .k = 3};
  auto roles = random_roles(hierarchy_counts(hp).traders, rng);

  SECTION("linearity: scaling leaf vectors scales every state") {
    HierarchyTree a(hp, roles), b(hp, roles);
    const double c = 3.25;
    a.backward_pass();
    b.backward_pass([&](long, TraderRole r) { return c * role_vector(r, hp.omega, hp.upsilon); });
    for (long i = 0; i < a.num_communities(); ++i) {
      CHECK(b.state(i).o == Catch::Approx(c * a.state(i).o));
      CHECK(b.state(i).p == Catch::Approx(c * a.state(i).p));
      CHECK(b.state(i).f == Catch::Approx(c * a.state(i).f));
    }
  }
  SECTION("with omega=upsilon=1 components sum to 1") {
    HierarchyTree tree(hp, roles);
    tree.backward_pass();
    for (long i = 0; i < tree.num_communities(); ++i) {
      const auto& s = tree.state(i);
      CHECK(s.o + s.p + s.f == Catch::Approx(1.0));
    }
  }
  SECTION("non-negativity closure through both passes") {
    HierarchyTree tree(hp, roles);
    tree.backward_pass();
    tree.forward_pass();
    for (long i = 0; i < tree.num_communities(); ++i) {
      const auto& s = tree.state(i);
      CHECK(s.o >= 0.0);
      CHECK(s.p >= 0.0);
      CHECK(s.f >= 0.0);
    }
  }
}

TEST_CASE("large phi approaches global opinion visibility") {
  HierarchyParams hp{.L = 4, .k = 3, .phi = 1e6};
  Rng rng(99);
  auto roles = random_roles(hierarchy_counts(hp).traders, rng);
  HierarchyTree tree(hp, roles);
  tree.backward_pass();
  tree.forward_pass();

  long n_o = 0, n_p = 0;
  for (TraderRole r : roles) {
    if (r == TraderRole::Optimist) ++n_o;
    if (r == TraderRole::Pessimist) ++n_p;
  }
  double global = static_cast<double>(n_o - n_p) / static_cast<double>(n_o + n_p);
  for (long leaf = 0; leaf < tree.num_traders(); ++leaf) {
    auto [c_o, c_p] = tree.local_opinion(leaf);
    CHECK(std::abs((c_o - c_p) / (c_o + c_p) - global) < 1e-3);
  }
}
