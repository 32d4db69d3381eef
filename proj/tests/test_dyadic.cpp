#include <gtest/gtest.h>

#include <random>

#include "coronalab/dyadic.hpp"
#include "support.hpp"

using namespace coronalab;
using coronalab::testing::code_of;

namespace {

Domain disk() {
  ShapeSpec s;
  s.shape = "ball";
  return make_domain(s);
}

Domain four_corner(int stages) {
  ShapeSpec s;
  s.shape = "four_corner";
  s.stages = stages;
  return make_domain(s);
}

// Independent scan over every cube containing the sample.
double brute_maximal(const DyadicGrid& g, const std::vector<double>& masses, int s) {
  double best = 0;
  for (const auto& Q : g.cubes)
    if (g.contains_sample(Q.id, s)) best = std::max(best, masses[Q.id] / Q.sigma);
  return best;
}

DiscreteMeasure random_measure(const DyadicGrid& g, std::mt19937_64& rng) {
  std::exponential_distribution<double> E(1.0);
  DiscreteMeasure mu;
  for (int l = 0; l < g.leaf_count(); ++l) mu.leaf_mass.push_back(E(rng) * E(rng));
  return mu;
}

}  // namespace

TEST(BuildGrid, CircleArcsHalveEachGeneration) {
  auto g = build_grid(disk(), 3);
  for (int k = 0; k <= 3; ++k) {
    ASSERT_EQ(g.by_gen[k].size(), std::size_t{1} << k);
    for (int q : g.by_gen[k]) {
      EXPECT_NEAR(g.cube(q).sigma, 2 * kPi / (1 << k), 1e-12);
      EXPECT_NEAR(norm(g.cube(q).center), 1.0, 1e-12);
    }
  }
}

TEST(BuildGrid, CircleCenterIsArcMidpoint) {
  auto g = build_grid(disk(), 5);
  for (int q : g.by_gen[4]) {
    const auto& Q = g.cube(q);
    // the arc endpoints are equidistant from the midpoint
    Point first = g.samples[Q.sample_begin], last = g.samples[Q.sample_end - 1];
    EXPECT_NEAR(dist(first, Q.center), dist(last, Q.center), 1e-12);
  }
}

TEST(BuildGrid, FourCornerCellsFollowSquares) {
  auto D = four_corner(3);
  auto g = build_grid(D, 5);
  double total = 0;
  for (int q : g.by_gen[g.depth]) total += g.cube(q).sigma;
  EXPECT_NEAR(total, D.boundary_measure(), 1e-12);
  for (const auto& Q : g.cubes) EXPECT_NEAR(Q.len, std::ldexp(D.root_length(), -Q.gen), 1e-15);
}

TEST(BuildGrid, DepthZeroIsWholeBoundary) {
  auto D = disk();
  auto g = build_grid(D, 0);
  ASSERT_EQ(g.cubes.size(), 1u);
  EXPECT_NEAR(g.cube(0).sigma, D.boundary_measure(), 1e-12);
  EXPECT_EQ(g.cube(0).sample_end - g.cube(0).sample_begin, static_cast<int>(g.samples.size()));
}

TEST(BuildGrid, DepthOutOfRange) {
  EXPECT_EQ(code_of([] { build_grid(disk(), 17); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(code_of([] { build_grid(disk(), -1); }), ErrorCode::InvalidSpec);
}

TEST(BuildGrid, ResolutionTooCoarse) {
  ShapeSpec s;
  s.shape = "ball";
  s.resolution = 0.1;
  EXPECT_EQ(code_of([&] { build_grid(make_domain(s), 6); }), ErrorCode::ResolutionTooCoarse);
}

TEST(VerifyGrid, InvariantsOnSeveralShapes) {
  std::vector<std::pair<Domain, int>> cases;
  cases.push_back({disk(), 7});
  cases.push_back({four_corner(3), 6});
  ShapeSpec b;
  b.shape = "ball";
  b.dim = 3;
  cases.push_back({make_domain(b), 3});
  ShapeSpec h;
  h.shape = "half_space";
  h.window = 1;
  cases.push_back({make_domain(h), 6});
  for (auto& [D, depth] : cases) {
    auto g = build_grid(D, depth);
    auto rep = verify_grid(g, {0.25, 0.125});
    EXPECT_TRUE(rep.partition_ok);
    EXPECT_TRUE(rep.nesting_ok);
    EXPECT_TRUE(rep.ancestry_ok);
    EXPECT_TRUE(rep.containment_ok);
    EXPECT_TRUE(rep.sigma_additive);
    EXPECT_LE(rep.C1, kMaxC1);
    EXPECT_DOUBLE_EQ(g.Xi, 2 * g.C1 * g.C1);
  }
}

TEST(VerifyGrid, NestingForAllPairs) {
  auto g = build_grid(four_corner(2), 5);
  for (const auto& A : g.cubes)
    for (const auto& B : g.cubes) {
      bool disjoint = A.sample_end <= B.sample_begin || B.sample_end <= A.sample_begin;
      EXPECT_TRUE(disjoint || g.is_within(A.id, B.id) || g.is_within(B.id, A.id));
    }
}

TEST(VerifyGrid, CircleStripExponentNearOne) {
  auto g = build_grid(disk(), 8);
  auto rep = verify_grid(g, {0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625});
  for (const auto& e : rep.strips) EXPECT_LE(e.max_fraction, 4 * e.tau);
  EXPECT_NEAR(rep.gamma, 1.0, 0.15);
}

TEST(VerifyGrid, ZeroTauStripIsEmpty) {
  auto g = build_grid(disk(), 5);
  auto rep = verify_grid(g, {0.0});
  ASSERT_EQ(rep.strips.size(), 1u);
  EXPECT_EQ(rep.strips[0].max_fraction, 0.0);
}

TEST(VerifyGrid, FourCornerStripExponentPositive) {
  auto g = build_grid(four_corner(3), 8);
  auto rep = verify_grid(g, {0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625});
  EXPECT_GT(rep.gamma, 0.0);
}

TEST(CubeBalls, RootAndLeaves) {
  auto g = build_grid(disk(), 6);
  auto b = cube_balls(g, g.root());
  for (const Point& p : g.samples) EXPECT_LE(dist(p, b.x), b.r_tilde * (1 + 1e-12));
  for (int l : g.leaves()) EXPECT_GE(cube_balls(g, l).samples_in_inner, 1);
}

TEST(Ancestor, Examples) {
  auto g = build_grid(disk(), 5);
  int leaf = g.leaves()[13];
  EXPECT_EQ(ancestor(g, leaf, 0), leaf);
  EXPECT_EQ(ancestor(g, leaf, 5), g.root());
  EXPECT_EQ(code_of([&] { ancestor(g, leaf, 6); }), ErrorCode::AboveRoot);
  int q = g.by_gen[3][2];
  EXPECT_EQ(ancestor(g, q, 1), g.cube(q).parent);
}

TEST(DyadicMaximal, SigmaGivesOne) {
  auto g = build_grid(four_corner(2), 5);
  auto m = cube_masses(g, sigma_measure(g));
  for (int s = 0; s < static_cast<int>(g.samples.size()); s += 7) EXPECT_NEAR(dyadic_maximal(g, m, s), 1.0, 1e-12);
}

TEST(DyadicMaximal, PointMassOnOneLeaf) {
  auto g = build_grid(disk(), 5);
  const int L = 9;
  DiscreteMeasure mu;
  mu.leaf_mass.assign(g.leaf_count(), 0.0);
  mu.leaf_mass[L] = 1.0;
  auto m = cube_masses(g, mu);
  const auto& leaf = g.cube(g.leaf_cube(L));
  EXPECT_DOUBLE_EQ(dyadic_maximal(g, m, leaf.sample_begin), 1.0 / leaf.sigma);
  // outside L the maximal function is 1/sigma(A) for the smallest common ancestor A
  int other = g.leaf_cube(L + 1);
  int s = g.cube(other).sample_begin;
  int a = g.leaf_cube(L);
  while (!g.contains_sample(a, s)) a = g.cube(a).parent;
  EXPECT_DOUBLE_EQ(dyadic_maximal(g, m, s), 1.0 / g.cube(a).sigma);
}

TEST(DyadicMaximal, MatchesExhaustiveScan) {
  std::mt19937_64 rng(5);
  auto g = build_grid(four_corner(2), 6);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = cube_masses(g, random_measure(g, rng));
    auto on_leaves = maximal_on_leaves(g, m);
    for (int s = 0; s < static_cast<int>(g.samples.size()); s += 3) {
      double v = dyadic_maximal(g, m, s);
      EXPECT_EQ(v, brute_maximal(g, m, s));
      EXPECT_EQ(v, on_leaves[g.sample_leaf[s]]);
    }
  }
}

TEST(SqrtMaximalAverage, MatchesDirectLeafSum) {
  std::mt19937_64 rng(9);
  auto g = build_grid(disk(), 5);
  auto m = cube_masses(g, random_measure(g, rng));
  auto sq = sqrt_maximal_average(g, m);
  for (const auto& Q : g.cubes) {
    double acc = 0;
    for (int l = Q.leaf_begin; l < Q.leaf_end; ++l) {
      int c = g.leaf_cube(l);
      acc += g.cube(c).sigma * std::sqrt(brute_maximal(g, m, g.cube(c).sample_begin));
    }
    double want = (acc / Q.sigma) * (acc / Q.sigma);
    EXPECT_NEAR(sq[Q.id], want, 1e-12 * want);
    // M mu >= mu(Q)/sigma(Q) pointwise on Q
    EXPECT_GE(sq[Q.id], m[Q.id] / Q.sigma * (1 - 1e-12));
  }
}

TEST(CubeMasses, AdditiveAlongTree) {
  std::mt19937_64 rng(3);
  auto g = build_grid(four_corner(1), 5);
  auto mu = random_measure(g, rng);
  auto m = cube_masses(g, mu);
  for (const auto& Q : g.cubes) {
    double direct = 0;
    for (int l = Q.leaf_begin; l < Q.leaf_end; ++l) direct += mu.leaf_mass[l];
    EXPECT_NEAR(m[Q.id], direct, 1e-12 * direct);
  }
  EXPECT_NEAR(m[g.root()], mu.total(), 1e-12 * mu.total());
}

TEST(AreNClose, Examples) {
  auto g = build_grid(disk(), 6);
  int q = g.by_gen[4][3];
  int p = g.cube(q).parent;
  EXPECT_TRUE(are_n_close(g, q, q, 0));
  EXPECT_FALSE(are_n_close(g, q, p, 0));
  EXPECT_TRUE(are_n_close(g, q, p, 1));
  int opposite = g.by_gen[4][3 + 8];
  EXPECT_FALSE(are_n_close(g, q, opposite, 1));
  EXPECT_TRUE(are_n_close(g, q, opposite, 4));
}

TEST(AreNClose, Symmetric) {
  auto g = build_grid(four_corner(2), 4);
  for (int a = 0; a < static_cast<int>(g.cubes.size()); a += 3)
    for (int b = 0; b < static_cast<int>(g.cubes.size()); b += 5)
      for (int N : {0, 1, 2, 3}) EXPECT_EQ(are_n_close(g, a, b, N), are_n_close(g, b, a, N));
}

TEST(CubeDistance, UpperConsistent) {
  auto g = build_grid(disk(), 5);
  for (int a : g.by_gen[3])
    for (int b : g.by_gen[3]) {
      double d = cube_distance(g, a, b);
      EXPECT_GE(d, 0);
      EXPECT_LE(d, dist(g.samples[g.cube(a).center_sample], g.samples[g.cube(b).center_sample]) + 1e-15);
    }
}

TEST(GridJson, NodeFields) {
  auto g = build_grid(disk(), 3);
  json j = grid_to_json(g);
  ASSERT_EQ(j["nodes"].size(), g.cubes.size());
  for (const auto& n : j["nodes"])
    for (const char* k : {"id", "gen", "center", "len", "sigma", "parent", "children"}) EXPECT_TRUE(n.contains(k)) << k;
  EXPECT_TRUE(j["nodes"][0]["parent"].is_null());
}
