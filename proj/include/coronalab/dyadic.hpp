#pragma once
#include <map>
#include <optional>
#include <string>

#include "geometry.hpp"
#include "kdtree.hpp"

namespace coronalab {

inline constexpr int kMaxGridDepth = 16;
inline constexpr double kMaxC1 = 8.0;

struct DyadicCube {
  int id = 0;
  int gen = 0;
  int parent = -1;
  std::vector<int> children;
  Point center;
  double len = 0;
  double sigma = 0;
  // Samples of the cube are [sample_begin, sample_end); leaves are [leaf_begin, leaf_end).
  int sample_begin = 0, sample_end = 0;
  int leaf_begin = 0, leaf_end = 0;
  int center_sample = 0;
  BoundaryCell cell;
  std::string path;
};

class DyadicGrid {
 public:
  Domain domain;
  int depth = 0;
  int sample_level = 0;
  double C1 = 0;
  double Xi = 0;
  std::vector<DyadicCube> cubes;
  std::vector<std::vector<int>> by_gen;
  std::vector<Point> samples;
  std::vector<double> weights;
  std::vector<int> sample_component;
  std::vector<int> sample_leaf;  // sample -> leaf ordinal
  KdTree tree;

  explicit DyadicGrid(Domain d) : domain(std::move(d)) {}

  int root() const { return 0; }
  const DyadicCube& cube(int id) const { return cubes[id]; }
  const std::vector<int>& leaves() const { return by_gen[depth]; }
  int leaf_count() const { return static_cast<int>(by_gen[depth].size()); }
  int dim() const { return domain.dim(); }
  double sample_spacing() const { return std::ldexp(domain.root_length(), -sample_level); }

  bool contains_sample(int q, int s) const { return s >= cubes[q].sample_begin && s < cubes[q].sample_end; }
  // True iff cube a is contained in cube b.
  bool is_within(int a, int b) const {
    return cubes[a].sample_begin >= cubes[b].sample_begin && cubes[a].sample_end <= cubes[b].sample_end &&
           cubes[a].gen >= cubes[b].gen;
  }
  int leaf_cube(int leaf) const { return by_gen[depth][leaf]; }
  // Cube of generation g containing sample s.
  int cube_at(int s, int g) const {
    int q = leaf_cube(sample_leaf[s]);
    while (cubes[q].gen > g) q = cubes[q].parent;
    return q;
  }
  // Leaf ordinal of the sample nearest to y, or -1 when y is off the sampled boundary.
  int locate_leaf(const Point& y) const {
    auto hit = tree.nearest(y);
    if (hit.index < 0) return -1;
    double leaf_len = std::ldexp(domain.root_length(), -depth);
    if (hit.distance > C1 * leaf_len) return -1;
    return sample_leaf[hit.index];
  }
};

inline DyadicGrid build_grid(const Domain& domain, int depth) {
  if (depth < 0 || depth > kMaxGridDepth) throw Error(ErrorCode::InvalidSpec, "grid depth must lie in [0, 16]");
  DyadicGrid g(domain);
  g.depth = depth;
  int hl = domain.level_for(domain.resolution());
  if (hl < depth + 2)
    throw Error(ErrorCode::ResolutionTooCoarse, "sampler resolution must be finer than 2^-(depth+2) of the root length");
  g.sample_level = depth + 2;
  g.by_gen.assign(depth + 1, {});
  const double root_len = domain.root_length();

  struct Frame {
    BoundaryCell cell;
    int gen;
    int parent;
    std::string path;
  };
  // Iterative DFS pre-order keeps every cube's samples and leaves contiguous.
  std::vector<Frame> stack{{domain.root_cell(), 0, -1, "0"}};
  std::vector<int> open;
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    DyadicCube q;
    q.id = static_cast<int>(g.cubes.size());
    q.gen = f.gen;
    q.parent = f.parent;
    q.len = std::ldexp(root_len, -f.gen);
    q.center = domain.cell_center(f.cell);
    q.cell = f.cell;
    q.path = f.path;
    q.sample_begin = static_cast<int>(g.samples.size());
    q.leaf_begin = static_cast<int>(g.by_gen[depth].size());
    if (f.parent >= 0) g.cubes[f.parent].children.push_back(q.id);
    g.by_gen[f.gen].push_back(q.id);
    g.cubes.push_back(q);
    if (f.gen == depth) {
      int leaf = static_cast<int>(g.by_gen[depth].size()) - 1;
      std::vector<std::pair<BoundaryCell, int>> sub{{f.cell, depth}};
      while (!sub.empty()) {
        auto [c, lv] = sub.back();
        sub.pop_back();
        if (lv == g.sample_level) {
          g.samples.push_back(domain.cell_center(c));
          g.weights.push_back(domain.cell_sigma(c));
          g.sample_component.push_back(domain.cell_component(c));
          g.sample_leaf.push_back(leaf);
          continue;
        }
        auto ch = domain.children(c);
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) sub.push_back({*it, lv + 1});
      }
    } else {
      auto ch = domain.children(f.cell);
      for (int i = static_cast<int>(ch.size()) - 1; i >= 0; --i)
        stack.push_back({ch[i], f.gen + 1, q.id, f.path + "." + std::to_string(i)});
    }
  }
  // Ranges and masses bottom-up: children were created after parents.
  for (auto& q : g.cubes) {
    q.sample_end = q.sample_begin;
    q.leaf_end = q.leaf_begin;
  }
  for (int id = static_cast<int>(g.cubes.size()) - 1; id >= 0; --id) {
    auto& q = g.cubes[id];
    if (q.children.empty()) {
      int s = q.sample_begin;
      double sum = 0;
      while (s < static_cast<int>(g.samples.size()) && g.sample_leaf[s] == q.leaf_begin) sum += g.weights[s++];
      q.sample_end = s;
      q.leaf_end = q.leaf_begin + 1;
      q.sigma = sum;
    } else {
      double sum = 0;
      for (int c : q.children) {
        sum += g.cubes[c].sigma;
        q.sample_end = std::max(q.sample_end, g.cubes[c].sample_end);
        q.leaf_end = std::max(q.leaf_end, g.cubes[c].leaf_end);
      }
      q.sigma = sum;
    }
  }
  g.tree = KdTree(g.samples, domain.dim());
  double c1 = 1.0;
  for (auto& q : g.cubes) {
    q.center_sample = g.tree.nearest(q.center, KdTree::Filter::Inside, q.sample_begin, q.sample_end).index;
    auto out = g.tree.nearest(q.center, KdTree::Filter::Outside, q.sample_begin, q.sample_end);
    if (out.index >= 0) c1 = std::max(c1, q.len / out.distance);
    double r_out = g.tree.farthest_inside(q.center, q.sample_begin, q.sample_end);
    c1 = std::max(c1, r_out / q.len);
  }
  g.C1 = c1;
  g.Xi = 2 * c1 * c1;
  if (c1 > kMaxC1) throw Error(ErrorCode::ContainmentViolated, "measured C1 exceeds 8");
  return g;
}

struct CubeBalls {
  Point x;
  double r = 0;        // r_Q = l(Q) / (2 C1)
  double r_tilde = 0;  // Xi r_Q
  int samples_in_inner = 0;
};

// B_Q = B(x_Q, r_Q), Delta_Q = B_Q on the boundary, B~_Q = B(x_Q, Xi r_Q).
inline CubeBalls cube_balls(const DyadicGrid& g, int q) {
  const auto& Q = g.cube(q);
  CubeBalls b;
  b.x = Q.center;
  b.r = Q.len / (2 * g.C1);
  b.r_tilde = g.Xi * b.r;
  auto out = g.tree.nearest(Q.center, KdTree::Filter::Outside, Q.sample_begin, Q.sample_end);
  if (out.index >= 0 && out.distance < 2 * b.r * (1 - 1e-12))
    throw Error(ErrorCode::ContainmentViolated, "Delta(x_Q, 2r_Q) leaves Q at cube " + Q.path);
  if (g.tree.farthest_inside(Q.center, Q.sample_begin, Q.sample_end) > b.r_tilde * (1 + 1e-12))
    throw Error(ErrorCode::ContainmentViolated, "Q leaves Delta(x_Q, Xi r_Q) at cube " + Q.path);
  for (int s = Q.sample_begin; s < Q.sample_end; ++s)
    if (dist(g.samples[s], Q.center) < 2 * b.r) ++b.samples_in_inner;
  return b;
}

inline int ancestor(const DyadicGrid& g, int q, int N) {
  if (N < 0 || N > g.cube(q).gen) throw Error(ErrorCode::AboveRoot, "ancestor above the root");
  for (int i = 0; i < N; ++i) q = g.cube(q).parent;
  return q;
}

struct StripEntry {
  double tau = 0;
  double max_fraction = 0;
  int cubes_used = 0;
};

struct GridReport {
  bool partition_ok = false;
  bool nesting_ok = false;
  bool ancestry_ok = false;
  bool containment_ok = false;
  bool sigma_additive = false;
  double C1 = 0;
  std::vector<StripEntry> strips;
  double gamma = 0;
  std::size_t cube_count = 0;
  std::size_t sample_count = 0;
};

inline GridReport verify_grid(const DyadicGrid& g, const std::vector<double>& taus) {
  GridReport rep;
  rep.C1 = g.C1;
  rep.cube_count = g.cubes.size();
  rep.sample_count = g.samples.size();
  const int n = static_cast<int>(g.samples.size());
  // (a) each generation partitions the samples.
  rep.partition_ok = true;
  for (int k = 0; k <= g.depth; ++k) {
    std::vector<int> owner(n, -1);
    for (int q : g.by_gen[k]) {
      for (int s = g.cube(q).sample_begin; s < g.cube(q).sample_end; ++s) {
        if (owner[s] != -1) rep.partition_ok = false;
        owner[s] = q;
      }
    }
    for (int s = 0; s < n; ++s)
      if (owner[s] == -1) rep.partition_ok = false;
  }
  // (b) nesting and (c) unique ancestry, plus exact sigma additivity.
  rep.nesting_ok = true;
  rep.ancestry_ok = true;
  rep.sigma_additive = true;
  for (const auto& Q : g.cubes) {
    double sum = 0;
    for (int c : Q.children) {
      const auto& C = g.cube(c);
      if (C.sample_begin < Q.sample_begin || C.sample_end > Q.sample_end || C.gen != Q.gen + 1) rep.nesting_ok = false;
      if (C.len != Q.len / 2) rep.nesting_ok = false;
      sum += C.sigma;
    }
    if (!Q.children.empty() && sum != Q.sigma) rep.sigma_additive = false;
    for (int m = 0; m < Q.gen; ++m) {
      int hits = 0;
      for (int a : g.by_gen[m])
        if (Q.sample_begin >= g.cube(a).sample_begin && Q.sample_end <= g.cube(a).sample_end) ++hits;
      if (hits != 1) rep.ancestry_ok = false;
    }
  }
  // (d) containment with the stored C1.
  rep.containment_ok = true;
  for (const auto& Q : g.cubes) {
    try {
      cube_balls(g, Q.id);
    } catch (const Error&) {
      rep.containment_ok = false;
    }
  }
  // (e) thin boundary strips, on cubes of generation >= 1 resolved by the samples.
  std::vector<std::vector<double>> d_out(g.depth + 1, std::vector<double>(n, kInf));
  for (int k = 1; k <= g.depth; ++k) {
    for (int s = 0; s < n; ++s) {
      int q = g.cube_at(s, k);
      d_out[k][s] = g.tree.nearest(g.samples[s], KdTree::Filter::Outside, g.cube(q).sample_begin, g.cube(q).sample_end).distance;
    }
  }
  const double hs = g.sample_spacing();
  std::vector<double> lx, ly;
  for (double tau : taus) {
    StripEntry e;
    e.tau = tau;
    for (int k = 1; k <= g.depth; ++k) {
      for (int q : g.by_gen[k]) {
        const auto& Q = g.cube(q);
        if (tau > 0 && tau * Q.len < 2 * hs) continue;
        double strip = 0;
        for (int s = Q.sample_begin; s < Q.sample_end; ++s)
          if (d_out[k][s] <= tau * Q.len) strip += g.weights[s];
        e.max_fraction = std::max(e.max_fraction, strip / Q.sigma);
        ++e.cubes_used;
      }
    }
    if (tau > 0 && e.max_fraction > 0) {
      lx.push_back(std::log(tau));
      ly.push_back(std::log(e.max_fraction));
    }
    rep.strips.push_back(e);
  }
  if (lx.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) { mx += lx[i]; my += ly[i]; }
    mx /= lx.size();
    my /= ly.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    rep.gamma = sxx > 0 ? sxy / sxx : 0;
  }
  return rep;
}

// A measure on the leaves of one grid. `leaf_ci` is filled for Monte Carlo estimates.
struct DiscreteMeasure {
  std::vector<double> leaf_mass;
  std::vector<double> leaf_ci;
  std::optional<Point> pole;
  std::uint64_t paths = 0;
  double lost = 0;
  double outside = 0;

  double total() const {
    double s = 0;
    for (double m : leaf_mass) s += m;
    return s;
  }
};

inline DiscreteMeasure sigma_measure(const DyadicGrid& g) {
  DiscreteMeasure m;
  for (int l : g.leaves()) m.leaf_mass.push_back(g.cube(l).sigma);
  return m;
}

// mu(Q) for every cube, accumulated bottom-up in child order.
inline std::vector<double> cube_masses(const DyadicGrid& g, const DiscreteMeasure& mu) {
  std::vector<double> m(g.cubes.size(), 0.0);
  for (int id = static_cast<int>(g.cubes.size()) - 1; id >= 0; --id) {
    const auto& Q = g.cube(id);
    if (Q.children.empty()) {
      m[id] = mu.leaf_mass[Q.leaf_begin];
    } else {
      double s = 0;
      for (int c : Q.children) s += m[c];
      m[id] = s;
    }
  }
  return m;
}

inline double dyadic_maximal(const DyadicGrid& g, const std::vector<double>& masses, int sample) {
  int q = g.leaf_cube(g.sample_leaf[sample]);
  double best = 0;
  for (; q >= 0; q = g.cube(q).parent) best = std::max(best, masses[q] / g.cube(q).sigma);
  return best;
}

inline double dyadic_maximal(const DyadicGrid& g, const DiscreteMeasure& mu, int sample) {
  return dyadic_maximal(g, cube_masses(g, mu), sample);
}

// M mu on each leaf (constant there), by a top-down pass.
inline std::vector<double> maximal_on_leaves(const DyadicGrid& g, const std::vector<double>& masses) {
  std::vector<double> down(g.cubes.size(), 0.0);
  for (const auto& Q : g.cubes) {
    double own = masses[Q.id] / Q.sigma;
    down[Q.id] = Q.parent >= 0 ? std::max(down[Q.parent], own) : own;
  }
  std::vector<double> out;
  for (int l : g.leaves()) out.push_back(down[l]);
  return out;
}

// (average over Q of (M mu)^{1/2})^2 for every cube.
inline std::vector<double> sqrt_maximal_average(const DyadicGrid& g, const std::vector<double>& masses) {
  auto M = maximal_on_leaves(g, masses);
  std::vector<double> acc(g.cubes.size(), 0.0);
  for (int id = static_cast<int>(g.cubes.size()) - 1; id >= 0; --id) {
    const auto& Q = g.cube(id);
    if (Q.children.empty()) {
      acc[id] = Q.sigma * std::sqrt(M[Q.leaf_begin]);
    } else {
      double s = 0;
      for (int c : Q.children) s += acc[c];
      acc[id] = s;
    }
  }
  for (const auto& Q : g.cubes) {
    double a = acc[Q.id] / Q.sigma;
    acc[Q.id] = a * a;
  }
  return acc;
}

// Minimum sample-pair distance between two cubes.
inline double cube_distance(const DyadicGrid& g, int a, int b) {
  const auto& A = g.cube(a);
  const auto& B = g.cube(b);
  if (A.sample_begin < B.sample_end && B.sample_begin < A.sample_end) return 0;
  const auto& S = (A.sample_end - A.sample_begin) <= (B.sample_end - B.sample_begin) ? A : B;
  const auto& T = (&S == &A) ? B : A;
  double best = kInf;
  for (int s = S.sample_begin; s < S.sample_end; ++s) {
    // Lower bound via the containment ball of T before the exact query.
    if (dist(g.samples[s], T.center) - g.C1 * T.len >= best) continue;
    best = std::min(best, g.tree.nearest(g.samples[s], KdTree::Filter::Inside, T.sample_begin, T.sample_end).distance);
  }
  return best;
}

inline bool are_n_close(const DyadicGrid& g, int a, int b, int N) {
  double la = g.cube(a).len, lb = g.cube(b).len;
  double f = std::ldexp(1.0, N);
  if (lb < la / f || lb > la * f) return false;
  double budget = f * (la + lb);
  double upper = dist(g.samples[g.cube(a).center_sample], g.samples[g.cube(b).center_sample]);
  if (upper <= budget) return true;
  if (dist(g.cube(a).center, g.cube(b).center) - g.C1 * (la + lb) > budget) return false;
  return cube_distance(g, a, b) <= budget;
}

inline json grid_to_json(const DyadicGrid& g) {
  json nodes = json::array();
  for (const auto& q : g.cubes) {
    nodes.push_back({{"id", q.path},
                     {"gen", q.gen},
                     {"center", point_to_json(q.center, g.dim())},
                     {"len", q.len},
                     {"sigma", q.sigma},
                     {"parent", q.parent >= 0 ? json(g.cube(q.parent).path) : json(nullptr)},
                     {"children", [&] {
                        json c = json::array();
                        for (int k : q.children) c.push_back(g.cube(k).path);
                        return c;
                      }()}});
  }
  return json{{"depth", g.depth}, {"C1", g.C1}, {"Xi", g.Xi}, {"nodes", nodes}};
}

}  // namespace coronalab
