#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "coronalab/corona.hpp"
#include "support.hpp"

using namespace coronalab;
using coronalab::testing::code_of;

namespace {

std::shared_ptr<const DyadicGrid> disk_grid(int depth) {
  ShapeSpec s;
  s.shape = "ball";
  if (depth > 8) s.resolution = std::ldexp(2.0, -depth - 2);
  return std::make_shared<const DyadicGrid>(build_grid(make_domain(s), depth));
}

CoronaOracles exact_oracles(std::shared_ptr<const DyadicGrid> g) {
  return {exact_omega_oracle(g),
          [g](const Point& X, const Point& Y) { return ValueEstimate{oracle::exact_green(g->domain, X, Y), 0}; }};
}

// Cube masses of the measure with density `lo` on the first half of the leaves and 1 elsewhere,
// scaled so that mu(Q) = sigma(Q) at the root.
std::vector<double> two_level_masses(const DyadicGrid& g, double lo) {
  DiscreteMeasure mu;
  for (int l = 0; l < g.leaf_count(); ++l) {
    double s = g.cube(g.leaf_cube(l)).sigma;
    mu.leaf_mass.push_back(l < g.leaf_count() / 2 ? lo * s : s);
  }
  auto m = cube_masses(g, mu);
  const double scale = g.cube(g.root()).sigma / m[g.root()];
  for (double& v : m) v *= scale;
  return m;
}

// Fewest coherent pieces partitioning a semi-coherent S, by enumerating top sets.
std::size_t brute_min_pieces(const DyadicGrid& g, const std::vector<int>& S, int top) {
  std::vector<int> others;
  for (int c : S)
    if (c != top) others.push_back(c);
  std::size_t best = S.size();
  for (std::uint32_t mask = 0; mask < (1u << others.size()); ++mask) {
    std::set<int> tops{top};
    for (std::size_t i = 0; i < others.size(); ++i)
      if (mask >> i & 1u) tops.insert(others[i]);
    if (tops.size() >= best) continue;
    std::map<int, std::vector<int>> pieces;
    for (int c : S) {
      int t = c;
      while (!tops.count(t)) t = g.cube(t).parent;
      pieces[t].push_back(c);
    }
    bool ok = true;
    for (auto& [t, p] : pieces) ok = ok && is_coherent(g, p, t);
    if (ok) best = tops.size();
  }
  return best;
}

// Random parent-closed subset of D_top.
std::vector<int> random_semicoherent(const DyadicGrid& g, int top, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(0.7);
  std::vector<int> out{top}, stack{top};
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    for (int ch : g.cube(c).children)
      if (keep(rng)) {
        out.push_back(ch);
        stack.push_back(ch);
      }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(StoppingTimeBasic, Postconditions) {
  auto g = disk_grid(10);
  BasicParams bp;
  auto o = stopping_time_basic(*g, g->root(), bp, exact_omega_oracle(g), corkscrew_provider(g));
  EXPECT_EQ(g->cube(o.q_tau).gen, bp.N_tau);
  EXPECT_TRUE(g->is_within(o.q_tau, o.q));
  EXPECT_EQ(o.nn_violations, 0u);
  EXPECT_GE(o.min_ratio, std::ldexp(1.0, -bp.N));
  EXPECT_LE(o.max_maximal, std::ldexp(1.0, 2 * bp.N));
  EXPECT_LE(o.fq2_constant, 4.0);
  EXPECT_TRUE(o.ambiguous.empty());
  EXPECT_TRUE(is_semi_coherent(*g, o.tree, o.q));
  std::set<int> tree(o.tree.begin(), o.tree.end());
  for (const auto* F : {&o.F_minus, &o.F_plus})
    for (int c : *F) {
      EXPECT_FALSE(tree.count(c));
      EXPECT_TRUE(tree.count(g->cube(c).parent));
    }
}

TEST(StoppingTimeBasic, Preconditions) {
  auto g = disk_grid(4);
  BasicParams bp;
  auto om = exact_omega_oracle(g);
  auto poles = corkscrew_provider(g);
  EXPECT_EQ(code_of([&] { stopping_time_basic(*g, g->root(), bp, om, poles); }), ErrorCode::DepthInsufficient);
  bp.N = 1;
  bp.N_tau = 0;
  EXPECT_EQ(code_of([&] { stopping_time_basic(*g, g->root(), bp, om, poles); }), ErrorCode::PreconditionViolated);
  bp.N = 6;
  auto wrong = [](const Point&) { return DiscreteMeasure{}; };
  EXPECT_EQ(code_of([&] { stopping_time_basic(*g, g->root(), bp, wrong, poles); }), ErrorCode::OracleFailure);
}

TEST(AinftyStopping, UniformMeasureNeverStops) {
  auto g = disk_grid(6);
  auto m = cube_masses(*g, sigma_measure(*g));
  auto o = ainfty_stopping(*g, g->root(), m, {});
  EXPECT_TRUE(o.F.empty());
  EXPECT_EQ(o.alpha, 0.0);
  EXPECT_EQ(o.tree.size(), g->cubes.size());
  EXPECT_TRUE(o.stop1);
  EXPECT_TRUE(o.stop2);
  EXPECT_TRUE(o.truncated);
  EXPECT_NEAR(o.ampleness, 0.5, 1e-12);
}

TEST(AinftyStopping, LowHalfStopsImmediately) {
  auto g = disk_grid(6);
  auto m = two_level_masses(*g, 0.1);
  AinftyParams ap;
  auto o = ainfty_stopping(*g, g->root(), m, ap);
  ASSERT_EQ(o.F.size(), 1u);
  EXPECT_EQ(g->cube(o.F[0]).gen, 1);
  EXPECT_DOUBLE_EQ(o.alpha, 0.5);
  EXPECT_NEAR(o.min_ratio, 1.0, 1e-12);
  EXPECT_TRUE(o.stop1);
  EXPECT_TRUE(o.stop2);
  EXPECT_NEAR(o.K2, 2 / 1.1, 1e-12);
  // the densest half of the leaves carries 1/1.1 of the mass
  EXPECT_NEAR(o.ampleness, 0.1 / 1.1, 1e-12);
}

TEST(AinftyStopping, Hypotheses) {
  auto g = disk_grid(4);
  auto m = cube_masses(*g, sigma_measure(*g));
  for (double& v : m) v *= 0.5;
  EXPECT_EQ(code_of([&] { ainfty_stopping(*g, g->root(), m, {}); }), ErrorCode::HypothesisViolated);
  AinftyParams bad;
  bad.beta = 1.5;
  EXPECT_EQ(code_of([&] { ainfty_stopping(*g, g->root(), m, bad); }), ErrorCode::PreconditionViolated);
}

TEST(IterateCorona, BasicRulePartitionsTheTree) {
  auto g = disk_grid(9);
  auto cd = iterate_corona(*g, g->root(), {}, corkscrew_provider(g), exact_omega_oracle(g));
  auto pc = check_partition(*g, cd);
  EXPECT_TRUE(pc.exact);
  EXPECT_EQ(cd.provenance["nn_violations"], 0);
  EXPECT_LE(cd.provenance["fq2_constant"].get<double>(), 4.0);
  for (const auto& S : cd.regimes) {
    EXPECT_TRUE(is_semi_coherent(*g, S.cubes, S.top));
    EXPECT_EQ(S.q_s, S.top);
    EXPECT_TRUE(g->domain.contains(S.x_s));
  }
  EXPECT_GE(cd.packing, 1.0);
  EXPECT_EQ(cd.level_sigma[0], g->cube(g->root()).sigma);
}

TEST(IterateCorona, SubtreeQ0StaysInside) {
  auto g = disk_grid(9);
  int q0 = g->by_gen[2][1];
  auto cd = iterate_corona(*g, q0, {}, corkscrew_provider(g), exact_omega_oracle(g));
  auto pc = check_partition(*g, cd);
  EXPECT_TRUE(pc.exact);
  EXPECT_EQ(pc.foreign, 0u);
  EXPECT_EQ(cd.regimes[0].top, q0);
}

TEST(IterateCorona, AinftyRuleLevelsShrink) {
  auto g = disk_grid(9);
  CoronaRule r;
  r.kind = CoronaRule::Kind::Ainfty;
  r.ainfty.beta = 0.7;
  int q0 = g->by_gen[2][0];
  auto cd = iterate_corona(*g, q0, r, corkscrew_provider(g), exact_omega_oracle(g));
  EXPECT_TRUE(check_partition(*g, cd).exact);
  EXPECT_TRUE(cd.provenance["stop_conditions_hold"].get<bool>());
  for (std::size_t k = 1; k < cd.level_sigma.size(); ++k) EXPECT_LT(cd.level_sigma[k], cd.level_sigma[k - 1]);
}

TEST(CheckPartition, DetectsDefects) {
  auto g = disk_grid(7);
  auto cd = iterate_corona(*g, g->root(), {}, corkscrew_provider(g), exact_omega_oracle(g));
  auto dup = cd;
  dup.bad.push_back(dup.regimes[0].cubes[0]);
  EXPECT_EQ(check_partition(*g, dup).duplicated, 1u);
  auto miss = cd;
  miss.regimes.pop_back();
  EXPECT_GT(check_partition(*g, miss).missing, 0u);
  auto sub = iterate_corona(*g, g->by_gen[1][0], {}, corkscrew_provider(g), exact_omega_oracle(g));
  sub.bad.push_back(g->by_gen[1][1]);
  EXPECT_EQ(check_partition(*g, sub).foreign, 1u);
}

TEST(Coherentize, MatchesBruteForceOnToyTrees) {
  auto g = disk_grid(3);
  std::mt19937_64 rng(21);
  for (int t = 0; t < 40; ++t) {
    int top = t % 2 ? g->root() : g->by_gen[1][t % 4 == 0 ? 0 : 1];
    CoronaDecomposition cd;
    cd.q0 = top;
    Regime S;
    S.top = S.q_s = top;
    S.cubes = random_semicoherent(*g, top, rng);
    cd.regimes.push_back(S);
    auto out = coherentize(*g, cd);
    EXPECT_TRUE(refines(out, cd));
    for (const auto& R : out.regimes) EXPECT_TRUE(is_coherent(*g, R.cubes, R.top));
    EXPECT_EQ(out.regimes.size(), brute_min_pieces(*g, S.cubes, top));
  }
}

TEST(Coherentize, HandBuiltRegime) {
  auto g = disk_grid(3);
  int r = g->root();
  int A = g->cube(r).children[0], B = g->cube(r).children[1];
  int a1 = g->cube(A).children[0];
  std::vector<int> S{r, A, B, a1};
  for (int c : g->cube(a1).children) S.push_back(c);
  std::sort(S.begin(), S.end());
  CoronaDecomposition cd;
  cd.regimes.push_back(Regime{S, r, r});
  auto out = coherentize(*g, cd);
  // a1 lost its sibling, so it starts a regime of its own
  ASSERT_EQ(out.regimes.size(), 2u);
  std::set<int> tops{out.regimes[0].top, out.regimes[1].top};
  EXPECT_EQ(tops, (std::set<int>{r, a1}));
  EXPECT_TRUE(out.provenance["coherentized"].get<bool>());
}

TEST(Coherentize, RejectsNonSemiCoherent) {
  auto g = disk_grid(3);
  int r = g->root();
  int grand = g->cube(g->cube(r).children[0]).children[0];
  CoronaDecomposition cd;
  cd.regimes.push_back(Regime{{r, grand}, r, r});
  EXPECT_EQ(code_of([&] { coherentize(*g, cd); }), ErrorCode::NotSemiCoherent);
}

TEST(Coherentize, IteratedCoronaRefines) {
  auto g = disk_grid(8);
  auto cd = iterate_corona(*g, g->root(), {}, corkscrew_provider(g), exact_omega_oracle(g));
  auto co = coherentize(*g, cd);
  EXPECT_TRUE(refines(co, cd));
  EXPECT_TRUE(refines(cd, cd));
  EXPECT_TRUE(check_partition(*g, co).exact);
  EXPECT_GE(co.regimes.size(), cd.regimes.size());
}

TEST(VerifyCorona, AverageAndStrongModes) {
  auto g = disk_grid(8);
  auto cd = iterate_corona(*g, g->root(), {}, corkscrew_provider(g), exact_omega_oracle(g));
  auto o = exact_oracles(g);
  VerifyParams vp;
  auto v = verify_corona(*g, cd, o, vp);
  EXPECT_TRUE(v.pass);
  EXPECT_GE(v.min_constant, 1.0 / 32);
  EXPECT_LE(v.max_constant, 32.0);
  EXPECT_EQ(v.regimes.size(), cd.regimes.size());
  vp.mode = "strong";
  auto s = verify_corona(*g, cd, o, vp);
  EXPECT_EQ(s.regimes.size(), cd.regimes.size());
  json j = verdict_to_json(v);
  EXPECT_EQ(j["mode"], "average");
}

TEST(VerifyCorona, GreenModeNeedsDeepPoles) {
  auto g = disk_grid(12);
  int q0 = g->by_gen[6][0];
  auto cd = iterate_corona(*g, q0, {}, corkscrew_provider(g), exact_omega_oracle(g));
  auto o = exact_oracles(g);
  VerifyParams vp;
  vp.mode = "green";
  EXPECT_EQ(code_of([&] { verify_corona(*g, cd, o, vp); }), ErrorCode::GeometryViolated);
  auto rp = repole_for_green(*g, cd);
  for (const auto& S : rp.regimes) EXPECT_GE(g->domain.distance(S.x_s), 4 * g->Xi * g->cube(S.q_s).len);
  auto v = verify_corona(*g, rp, o, vp);
  EXPECT_TRUE(v.pass) << v.min_constant << " " << v.max_constant;
  auto no_green = o;
  no_green.green = nullptr;
  EXPECT_EQ(code_of([&] { verify_corona(*g, rp, no_green, vp); }), ErrorCode::OracleFailure);
}

TEST(VerifyCorona, ParameterAndGeometryErrors) {
  auto g = disk_grid(6);
  auto cd = iterate_corona(*g, g->root(), {}, corkscrew_provider(g), exact_omega_oracle(g));
  auto o = exact_oracles(g);
  VerifyParams vp;
  vp.mode = "bogus";
  EXPECT_EQ(code_of([&] { verify_corona(*g, cd, o, vp); }), ErrorCode::ModeParamMismatch);
  vp.mode = "average";
  vp.tolerance = 0.5;
  EXPECT_EQ(code_of([&] { verify_corona(*g, cd, o, vp); }), ErrorCode::PreconditionViolated);
  vp.tolerance = 32;
  auto outside = cd;
  outside.regimes[0].x_s = Point{3, 0, 0};
  EXPECT_EQ(code_of([&] { verify_corona(*g, outside, o, vp); }), ErrorCode::GeometryViolated);
  auto wrong_top = cd;
  wrong_top.regimes.back().q_s = g->by_gen[g->depth].front() == wrong_top.regimes.back().top ? g->by_gen[g->depth].back()
                                                                                               : g->by_gen[g->depth].front();
  EXPECT_EQ(code_of([&] { verify_corona(*g, wrong_top, o, vp); }), ErrorCode::GeometryViolated);
}

TEST(VerifyCorona, TangentialPoleFails) {
  auto g = disk_grid(10);
  auto cd = iterate_corona(*g, g->by_gen[6][0], {}, corkscrew_provider(g), exact_omega_oracle(g));
  // pole placed on the far side of the disk, about 48 l(Q_S) away
  for (auto& S : cd.regimes) S.x_s = g->cube(S.q_s).center * -0.5;
  auto v = verify_corona(*g, cd, exact_oracles(g), {});
  EXPECT_FALSE(v.pass);
}

TEST(ProjectedMeasure, PreservesMassOnFamilyAndOutside) {
  auto g = disk_grid(5);
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> E(1.0);
  DiscreteMeasure mu;
  for (int l = 0; l < g->leaf_count(); ++l) mu.leaf_mass.push_back(E(rng));
  std::vector<int> F{g->by_gen[2][0], g->by_gen[3][5]};
  auto P = projected_measure(*g, F, mu);
  auto m = cube_masses(*g, mu), pm = cube_masses(*g, P);
  for (int f : F) EXPECT_NEAR(pm[f], m[f], 1e-12 * m[f]);
  EXPECT_NEAR(pm[g->root()], m[g->root()], 1e-12 * m[g->root()]);
  EXPECT_NEAR(project_measure(*g, F, mu, {g->root()}), m[g->root()], 1e-12 * m[g->root()]);
  // inside a family cube the projection is a multiple of sigma
  const auto& Q = g->cube(F[0]);
  for (int l = Q.leaf_begin; l < Q.leaf_end; ++l)
    EXPECT_NEAR(P.leaf_mass[l] / g->cube(g->leaf_cube(l)).sigma, m[F[0]] / Q.sigma, 1e-12);
  auto same = projected_measure(*g, {}, mu);
  EXPECT_EQ(same.leaf_mass, mu.leaf_mass);
  EXPECT_EQ(code_of([&] { projected_measure(*g, {F[0], g->cube(F[0]).children[0]}, mu); }), ErrorCode::FamilyNotDisjoint);
}

TEST(MonteCarloOracle, ReproducibleAcrossCalls) {
  auto g = disk_grid(4);
  McParams p;
  p.paths = 2000;
  auto om = monte_carlo_omega_oracle(g, p);
  Point X{0.3, 0.2, 0};
  auto a = om(X), b = om(X);
  EXPECT_EQ(a.leaf_mass, b.leaf_mass);
  EXPECT_NEAR(a.total(), 1.0, 1e-12);
}

TEST(CoronaJson, Fields) {
  auto g = disk_grid(6);
  auto cd = iterate_corona(*g, g->root(), {}, corkscrew_provider(g), exact_omega_oracle(g));
  json j = corona_to_json(*g, cd);
  EXPECT_EQ(j["regimes"].size(), cd.regimes.size());
  EXPECT_TRUE(j["packing"].contains("untruncated"));
  EXPECT_EQ(j["provenance"]["rule"], "basic");
  for (const char* k : {"top", "q_s", "x_s", "cubes", "truncated", "coherent", "level"})
    EXPECT_TRUE(j["regimes"][0].contains(k)) << k;
}
