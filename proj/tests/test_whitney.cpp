#include <gtest/gtest.h>

#include <set>

#include "coronalab/whitney.hpp"
#include "support.hpp"

using namespace coronalab;
using coronalab::testing::code_of;

namespace {

Domain disk() {
  ShapeSpec s;
  s.shape = "ball";
  return make_domain(s);
}

Domain half_plane() {
  ShapeSpec s;
  s.shape = "half_space";
  s.window = 1;
  return make_domain(s);
}

Domain four_corner(int stages) {
  ShapeSpec s;
  s.shape = "four_corner";
  s.stages = stages;
  return make_domain(s);
}

std::set<int> as_set(const Region& r) { return {r.cubes.begin(), r.cubes.end()}; }

bool subset(const std::set<int>& a, const std::set<int>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// Interior point at height l(Q)/2 above the cube center.
std::vector<FamilyPoint> lifted_family(const DyadicGrid& g, int gen) {
  std::vector<FamilyPoint> out;
  for (int q : g.by_gen[gen]) {
    const auto& Q = g.cube(q);
    out.push_back({q, Q.center - g.domain.outward_normal(Q.center) * (Q.len / 2)});
  }
  return out;
}

}  // namespace

TEST(BuildWhitney, DiskCubesSatisfyConstants) {
  auto D = disk();
  auto W = build_whitney(D, std::ldexp(1.0, -8));
  auto chk = verify_whitney(D, W);
  EXPECT_GT(chk.cubes, 1000u);
  EXPECT_EQ(chk.distance_violations, 0u);
  EXPECT_EQ(chk.neighbor_violations, 0u);
  EXPECT_EQ(chk.overlap_violations, 0u);
  EXPECT_GT(chk.touching_pairs, chk.cubes);
  EXPECT_TRUE(W.cutoff_hit);
  EXPECT_DOUBLE_EQ(W.lambda, 1.0 / 32);
}

TEST(BuildWhitney, DistanceBoundsRecomputed) {
  auto D = four_corner(2);
  auto W = build_whitney(D, std::ldexp(1.0, -9));
  const double sd = std::sqrt(2.0);
  for (std::size_t i = 0; i < W.cubes.size(); ++i) {
    const auto& c = W.cubes[i];
    double diam = c.len * sd;
    EXPECT_LE(4 * diam, D.box_distance(W.box(static_cast<int>(i), 4.0)));
    EXPECT_LE(c.dist, 40 * diam);
    EXPECT_TRUE(D.contains(c.center));
  }
  EXPECT_TRUE(verify_whitney(D, W).ok());
}

TEST(BuildWhitney, HalfPlaneLayers) {
  auto D = half_plane();
  auto W = build_whitney(D, std::ldexp(1.0, -8));
  ASSERT_FALSE(W.cubes.empty());
  EXPECT_TRUE(verify_whitney(D, W).ok());
  // dist/len stays inside the 4/40 band
  for (const auto& c : W.cubes) {
    EXPECT_GE(c.corner.y, 0.0);
    double ratio = c.dist / c.len;
    EXPECT_GE(ratio, 4 * std::sqrt(2.0) - 1e-12);
    EXPECT_LE(ratio, 40 * std::sqrt(2.0) + 1e-12);
  }
}

TEST(BuildWhitney, CoarseCutoffIsShallowAndFlagged) {
  auto D = disk();
  auto W = build_whitney(D, 2.0);
  EXPECT_TRUE(W.cutoff_hit);
  EXPECT_LE(W.cubes.size(), 4u);
  EXPECT_EQ(code_of([&] { build_whitney(D, 0.0); }), ErrorCode::PreconditionViolated);
}

TEST(BuildWhitney, LocateFindsContainingCube) {
  auto D = disk();
  auto W = build_whitney(D, std::ldexp(1.0, -7));
  for (std::size_t i = 0; i < W.cubes.size(); i += 17) EXPECT_EQ(W.locate(W.cubes[i].center), static_cast<int>(i));
  EXPECT_EQ(W.locate(Point{2, 2, 0}), -1);
}

TEST(BuildWhitney, CsvHeader) {
  auto W = build_whitney(disk(), 0.25);
  std::ostringstream os;
  write_whitney_csv(os, W);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "corner_x,corner_y,len,dist");
}

TEST(WhitneyRegion, HalfPlaneContainsCorkscrew) {
  auto D = half_plane();
  auto g = build_grid(D, 6);
  auto W = build_whitney(D, std::ldexp(1.0, -10));
  const int theta = whitney_theta0(2);
  EXPECT_EQ(theta, 9);
  int q = g.by_gen[3][3];
  auto R = whitney_region(g, W, q, theta);
  ASSERT_FALSE(R.cubes.empty());
  Point X = g.cube(q).center + Point{0, g.cube(q).len / 2, 0};
  int I = W.locate(X);
  ASSERT_GE(I, 0);
  EXPECT_TRUE(as_set(R).count(I));
}

TEST(WhitneyRegion, MonotoneInTheta) {
  auto D = disk();
  auto g = build_grid(D, 5);
  auto W = build_whitney(D, std::ldexp(1.0, -8));
  for (int q : {g.by_gen[2][1], g.by_gen[4][7]})
    for (int theta = 0; theta < 4; ++theta)
      EXPECT_TRUE(subset(as_set(whitney_region(g, W, q, theta)), as_set(whitney_region(g, W, q, theta + 1))));
}

TEST(WhitneyRegion, EmptyBelowCutoff) {
  auto D = disk();
  auto g = build_grid(D, 8);
  auto W = build_whitney(D, std::ldexp(1.0, -3));
  auto R = whitney_region(g, W, g.leaves()[0], 1);
  EXPECT_TRUE(R.cubes.empty());
  EXPECT_TRUE(R.cutoff_hit);
}

TEST(CarlesonBox, EqualsUnionOfDescendantRegions) {
  auto D = four_corner(1);
  auto g = build_grid(D, 4);
  auto W = build_whitney(D, std::ldexp(1.0, -7));
  for (int q : {g.root(), g.by_gen[2][5]}) {
    std::set<int> brute;
    for (const auto& C : g.cubes)
      if (g.is_within(C.id, q))
        for (int i : whitney_region(g, W, C.id, 2).cubes) brute.insert(i);
    EXPECT_EQ(as_set(carleson_box(g, W, q, 2)), brute);
  }
}

TEST(CarlesonBox, MonotoneUnderInclusion) {
  auto D = disk();
  auto g = build_grid(D, 5);
  auto W = build_whitney(D, std::ldexp(1.0, -7));
  int q = g.by_gen[4][9];
  auto small = as_set(carleson_box(g, W, q, 2));
  for (int a = g.cube(q).parent; a >= 0; a = g.cube(a).parent) {
    auto big = as_set(carleson_box(g, W, a, 2));
    EXPECT_TRUE(subset(small, big));
    small = big;
  }
}

TEST(CarlesonBox, LeafMatchesOwnRegion) {
  auto D = disk();
  auto g = build_grid(D, 4);
  auto W = build_whitney(D, std::ldexp(1.0, -7));
  int q = g.leaves()[5];
  EXPECT_EQ(as_set(carleson_box(g, W, q, 2)), as_set(whitney_region(g, W, q, 2)));
}

TEST(CarlesonBox, KappaContainment) {
  auto D = disk();
  auto g = build_grid(D, 5);
  auto W = build_whitney(D, std::ldexp(1.0, -8));
  auto box = carleson_box(g, W, g.by_gen[2][0], 2);
  auto k = kappa_check(g, W, box);
  EXPECT_GT(k.kappa1, 0.0);
  EXPECT_GE(k.kappa0, k.kappa1);
  EXPECT_LT(k.kappa0, kInf);
}

TEST(Sawtooth, SetAlgebra) {
  auto D = disk();
  auto g = build_grid(D, 5);
  auto W = build_whitney(D, std::ldexp(1.0, -8));
  int q = g.by_gen[1][0];
  const int th = 2;
  EXPECT_EQ(as_set(sawtooth(g, W, {}, q, th)), as_set(carleson_box(g, W, q, th)));
  EXPECT_TRUE(sawtooth(g, W, {q}, q, th).cubes.empty());
  EXPECT_EQ(as_set(sawtooth(g, W, g.cube(q).children, q, th)), as_set(whitney_region(g, W, q, th)));
  const auto& kids = g.cube(q).children;
  std::vector<int> F{g.cube(g.cube(kids[0]).children[0]).children[1], g.cube(g.cube(kids[1]).children[1]).children[0]};
  EXPECT_TRUE(subset(as_set(sawtooth(g, W, F, q, th)), as_set(carleson_box(g, W, q, th))));
}

TEST(Sawtooth, RejectsOverlappingFamily) {
  auto D = disk();
  auto g = build_grid(D, 4);
  auto W = build_whitney(D, 0.125);
  int a = g.by_gen[2][0];
  int b = g.cube(a).children[0];
  EXPECT_EQ(code_of([&] { sawtooth(g, W, {a, b}, g.root(), 2); }), ErrorCode::FamilyNotDisjoint);
}

TEST(OverlapCertificate, HalfPlaneCorkscrewFamily) {
  auto D = half_plane();
  auto g = build_grid(D, 8);
  auto W = build_whitney(D, std::ldexp(1.0, -12));
  auto fam = lifted_family(g, 4);
  auto cert = overlap_certificate(g, W, fam, 0.25, 0.25);
  EXPECT_GT(cert.probes, 0u);
  EXPECT_LE(cert.theta, whitney_theta0(2));
  EXPECT_GE(cert.C, 1);
  EXPECT_LE(cert.C, 4);
  // brute-force overlap count on the same probe lattice
  int brute = 0;
  for (const auto& fp : fam) {
    double d = D.distance(fp.p);
    for (const Point& p : ball_probes(fp.p, d, 0.75 * d, 2)) {
      int n = 0;
      for (const auto& other : fam)
        if (dist(p, other.p) < 0.75 * D.distance(other.p)) ++n;
      brute = std::max(brute, n);
    }
  }
  EXPECT_EQ(cert.C, brute);
}

TEST(OverlapCertificate, SingleCubeHasOverlapOne) {
  auto D = disk();
  auto g = build_grid(D, 6);
  auto W = build_whitney(D, std::ldexp(1.0, -10));
  auto fam = lifted_family(g, 3);
  fam.resize(1);
  EXPECT_EQ(overlap_certificate(g, W, fam, 0.25, 0.25).C, 1);
}

TEST(OverlapCertificate, ThetaNonIncreasingInTau) {
  auto D = disk();
  auto g = build_grid(D, 6);
  auto W = build_whitney(D, std::ldexp(1.0, -11));
  auto fam = lifted_family(g, 3);
  int prev = std::numeric_limits<int>::max();
  for (double tau : {0.1, 0.25, 0.45}) {
    auto cert = overlap_certificate(g, W, fam, tau, 0.25);
    EXPECT_LE(cert.theta, prev);
    prev = cert.theta;
  }
}

TEST(OverlapCertificate, Preconditions) {
  auto D = disk();
  auto g = build_grid(D, 5);
  auto W = build_whitney(D, 0.01);
  auto fam = lifted_family(g, 2);
  EXPECT_EQ(code_of([&] { overlap_certificate(g, W, fam, 0.75, 0.25); }), ErrorCode::PreconditionViolated);
  fam[0].p = g.cube(fam[0].cube).center * 0.999;
  EXPECT_EQ(code_of([&] { overlap_certificate(g, W, fam, 0.25, 0.25); }), ErrorCode::PreconditionViolated);
}

TEST(RegionJson, Fields) {
  Region r;
  r.cubes = {1, 4};
  r.level = Fattening::DoubleStar;
  json j = region_to_json(r);
  EXPECT_EQ(j["level"], "I**");
  EXPECT_EQ(j["members"], json::array({1, 4}));
}
