#pragma once
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "dyadic.hpp"

namespace coronalab {

struct WhitneyKey {
  int level = 0;
  std::int64_t i = 0, j = 0, k = 0;
  friend bool operator==(const WhitneyKey&, const WhitneyKey&) = default;
};

struct WhitneyKeyHash {
  std::size_t operator()(const WhitneyKey& key) const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(key.level));
    h = mix64(h ^ static_cast<std::uint64_t>(key.i));
    h = mix64(h ^ static_cast<std::uint64_t>(key.j));
    return mix64(h ^ static_cast<std::uint64_t>(key.k));
  }
};

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Closed dyadic cube of side 2^-level with integer corner index.
struct WhitneyCube {
  WhitneyKey key;
  Point corner;
  double len = 0;
  Point center;
  double dist = 0;
  int component = -1;
};

class WhitneyDecomposition {
 public:
  int dim = 2;
  double lambda = 1.0 / 32;
  double min_len = 0;
  double finest_len = 0;  // smallest side the construction may produce
  bool cutoff_hit = false;
  int unanchored = 0;
  Box bbox;
  int min_level = 0, max_level = 0;
  std::vector<WhitneyCube> cubes;
  std::unordered_map<WhitneyKey, int, WhitneyKeyHash> index;

  Box box(int i, double scale = 1.0) const {
    Box b;
    b.dim = dim;
    b.lo = cubes[i].corner;
    b.hi = cubes[i].corner;
    for (int a = 0; a < dim; ++a) b.hi[a] += cubes[i].len;
    return scale == 1.0 ? b : b.scaled(scale);
  }
  Box fattened(int i, int stars = 1) const {
    double s = 1.0;
    for (int k = 0; k < stars; ++k) s *= (1 + lambda);
    return box(i, s);
  }
  static double side_of(int level) { return std::ldexp(1.0, -level); }

  int find(const WhitneyKey& k) const {
    auto it = index.find(k);
    return it == index.end() ? -1 : it->second;
  }
  // Whitney cube containing x, or -1 (outside the domain, or below the cutoff).
  int locate(const Point& x) const {
    for (int L = min_level; L <= max_level; ++L) {
      double s = side_of(L);
      WhitneyKey k{L, static_cast<std::int64_t>(std::floor(x.x / s)), static_cast<std::int64_t>(std::floor(x.y / s)),
                   dim == 3 ? static_cast<std::int64_t>(std::floor(x.z / s)) : 0};
      int id = find(k);
      if (id >= 0) return id;
    }
    return -1;
  }
  // Cubes of side in [len/4, 4 len] whose closures meet cube i.
  std::vector<int> neighbors(int i) const {
    std::vector<int> out;
    const auto& c = cubes[i];
    for (int L = c.key.level - 2; L <= c.key.level + 2; ++L) {
      for_each_touching_cell(c.key, L, [&](const WhitneyKey& k) {
        if (k == c.key) return;
        int id = find(k);
        if (id >= 0) out.push_back(id);
      });
    }
    return out;
  }
  // Calls fn on every level-L dyadic cell whose closure meets the closure of cell `key`.
  template <class Fn>
  void for_each_touching_cell(const WhitneyKey& key, int L, Fn fn) const {
    std::int64_t lo[3], hi[3];
    std::int64_t idx[3] = {key.i, key.j, key.k};
    for (int a = 0; a < 3; ++a) {
      if (a >= dim) {
        lo[a] = hi[a] = 0;
        continue;
      }
      if (L >= key.level) {
        std::int64_t f = std::int64_t{1} << (L - key.level);
        lo[a] = idx[a] * f - 1;
        hi[a] = (idx[a] + 1) * f;
      } else {
        std::int64_t f = std::int64_t{1} << (key.level - L);
        lo[a] = floor_div(idx[a] + f - 1, f) - 1;
        hi[a] = floor_div(idx[a] + 1, f);
      }
    }
    for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
      for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
        for (std::int64_t z = lo[2]; z <= hi[2]; ++z) fn(WhitneyKey{L, x, y, z});
  }
};

inline int whitney_theta0(int dim) { return static_cast<int>(std::ceil(6 + std::log2(static_cast<double>(dim)))) + 2; }

// Default bounding box: the domain bounds for bounded domains; for half-spaces and
// graphs the sampled window extended upward by the window width.
inline Box default_whitney_box(const Domain& domain) {
  Box b = domain.bounds();
  if (!domain.bounded()) {
    if (domain.mode() == DomainMode::Complement) return b.scaled(2.0);
    int d = domain.dim() - 1;
    b.hi[d] = b.lo[d] + b.max_side();
    b.lo[d] = std::min(b.lo[d], 0.0);
  }
  return b;
}

inline WhitneyDecomposition build_whitney(const Domain& domain, const Box& bbox_in, double min_len) {
  if (!(min_len > 0)) throw Error(ErrorCode::PreconditionViolated, "min_len must be positive");
  WhitneyDecomposition W;
  W.dim = domain.dim();
  W.min_len = min_len;
  W.bbox = bbox_in;
  W.bbox.dim = W.dim;
  const int d = W.dim;
  const double ext = W.bbox.max_side();
  const int L0 = -static_cast<int>(std::ceil(std::log2(ext)));
  int Lmin_allowed = 0;
  while (WhitneyDecomposition::side_of(Lmin_allowed) >= min_len) ++Lmin_allowed;
  --Lmin_allowed;
  W.finest_len = WhitneyDecomposition::side_of(Lmin_allowed);
  W.min_level = 1 << 20;
  W.max_level = -(1 << 20);
  const double s0 = WhitneyDecomposition::side_of(L0);
  std::int64_t lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
  for (int a = 0; a < d; ++a) {
    lo[a] = static_cast<std::int64_t>(std::floor(W.bbox.lo[a] / s0));
    hi[a] = std::max(lo[a], static_cast<std::int64_t>(std::ceil(W.bbox.hi[a] / s0)) - 1);
  }
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  std::vector<std::pair<WhitneyKey, bool>> stack;
  for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
    for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
      for (std::int64_t z = lo[2]; z <= hi[2]; ++z) stack.push_back({WhitneyKey{L0, x, y, z}, false});
  std::reverse(stack.begin(), stack.end());
  while (!stack.empty()) {
    auto [key, parent_failed] = stack.back();
    stack.pop_back();
    const double s = WhitneyDecomposition::side_of(key.level);
    Box I;
    I.dim = d;
    I.lo = {key.i * s, key.j * s, d == 3 ? key.k * s : 0.0};
    I.hi = I.lo;
    for (int a = 0; a < d; ++a) I.hi[a] += s;
    const double diam = s * sqrt_d;
    const double d4 = domain.box_distance(I.scaled(4.0));
    const Point c = I.center();
    if (4 * diam <= d4) {
      if (!domain.contains(c)) continue;
      if (!parent_failed) {
        ++W.unanchored;
        continue;
      }
      WhitneyCube w;
      w.key = key;
      w.corner = I.lo;
      w.len = s;
      w.center = c;
      w.dist = domain.box_distance(I);
      w.component = domain.component_of(c);
      W.index[key] = static_cast<int>(W.cubes.size());
      W.cubes.push_back(w);
      W.min_level = std::min(W.min_level, key.level);
      W.max_level = std::max(W.max_level, key.level);
      continue;
    }
    if (domain.box_distance(I) > 0 && !domain.contains(c)) continue;
    if (key.level + 1 > Lmin_allowed) {
      W.cutoff_hit = true;
      continue;
    }
    const int L = key.level + 1;
    std::vector<WhitneyKey> kids;
    for (int dx = 0; dx < 2; ++dx)
      for (int dy = 0; dy < 2; ++dy)
        for (int dz = 0; dz < (d == 3 ? 2 : 1); ++dz)
          kids.push_back({L, 2 * key.i + dx, 2 * key.j + dy, d == 3 ? 2 * key.k + dz : 0});
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back({*it, true});
  }
  if (W.cubes.empty()) {
    W.min_level = W.max_level = 0;
  }
  return W;
}

inline WhitneyDecomposition build_whitney(const Domain& domain, double min_len) {
  return build_whitney(domain, default_whitney_box(domain), min_len);
}

struct WhitneyCheck {
  std::size_t cubes = 0;
  std::size_t distance_violations = 0;
  std::size_t neighbor_violations = 0;
  std::size_t overlap_violations = 0;
  std::size_t touching_pairs = 0;
  bool ok() const { return distance_violations == 0 && neighbor_violations == 0 && overlap_violations == 0; }
};

// Exhaustive check of the 4/40 inequalities, interior disjointness, and the touching-size ratio.
inline WhitneyCheck verify_whitney(const Domain& domain, const WhitneyDecomposition& W) {
  WhitneyCheck chk;
  chk.cubes = W.cubes.size();
  const double sqrt_d = std::sqrt(static_cast<double>(W.dim));
  std::unordered_set<WhitneyKey, WhitneyKeyHash> ancestors;
  for (const auto& c : W.cubes) {
    WhitneyKey k = c.key;
    while (k.level > W.min_level - 1) {
      k = {k.level - 1, floor_div(k.i, 2), floor_div(k.j, 2), W.dim == 3 ? floor_div(k.k, 2) : 0};
      if (!ancestors.insert(k).second) break;
    }
  }
  for (std::size_t i = 0; i < W.cubes.size(); ++i) {
    const auto& c = W.cubes[i];
    const double diam = c.len * sqrt_d;
    const double d4 = domain.box_distance(W.box(static_cast<int>(i), 4.0));
    const double d1 = domain.box_distance(W.box(static_cast<int>(i)));
    if (!(4 * diam <= d4 && d4 <= d1 && d1 <= 40 * diam)) ++chk.distance_violations;
    if (ancestors.count(c.key)) ++chk.overlap_violations;
    // Any touching cube smaller than len/4 lies inside a touching cell of side len/8.
    W.for_each_touching_cell(c.key, c.key.level + 3, [&](const WhitneyKey& k) {
      if (W.find(k) >= 0 || ancestors.count(k)) ++chk.neighbor_violations;
    });
    chk.touching_pairs += W.neighbors(static_cast<int>(i)).size();
  }
  return chk;
}

enum class Fattening { I = 0, Star = 1, DoubleStar = 2, TripleStar = 3 };

struct Region {
  std::vector<int> cubes;
  Fattening level = Fattening::Star;
  int cube = -1;
  int theta = 0;
  bool cutoff_hit = false;
};

// dist(I, Q): Whitney cube hull to the samples of Q.
inline double whitney_cube_distance(const DyadicGrid& g, const WhitneyDecomposition& W, int I, int q) {
  return g.tree.nearest_to_box(W.box(I), KdTree::Filter::Inside, g.cube(q).sample_begin, g.cube(q).sample_end).distance;
}

// I in W_Q^theta, with cheap bounds before the exact sample query.
inline bool in_whitney_family(const DyadicGrid& g, const WhitneyDecomposition& W, int I, int q, int theta) {
  const double lq = g.cube(q).len, li = W.cubes[I].len;
  const double f = std::ldexp(1.0, theta);
  if (li < lq / f || li > lq * f) return false;
  const double budget = f * lq;
  Box b = W.box(I);
  if (b.distance(g.cube(q).center) - g.C1 * lq > budget) return false;
  if (b.distance(g.samples[g.cube(q).center_sample]) <= budget) return true;
  return whitney_cube_distance(g, W, I, q) <= budget;
}

inline Region whitney_region(const DyadicGrid& g, const WhitneyDecomposition& W, int q, int theta,
                             Fattening level = Fattening::Star) {
  Region r;
  r.level = level;
  r.cube = q;
  r.theta = theta;
  for (int i = 0; i < static_cast<int>(W.cubes.size()); ++i)
    if (in_whitney_family(g, W, i, q, theta)) r.cubes.push_back(i);
  r.cutoff_hit = W.cutoff_hit && std::ldexp(g.cube(q).len, -theta) < W.finest_len;
  return r;
}

// T_Q: union of W_{Q'} over descendants Q'. For each I only the coarsest admissible
// generation matters, since descendants of one generation partition Q.
inline Region carleson_box(const DyadicGrid& g, const WhitneyDecomposition& W, int q, int theta,
                           Fattening level = Fattening::Star) {
  Region r;
  r.level = level;
  r.cube = q;
  r.theta = theta;
  const auto& Q = g.cube(q);
  const double f = std::ldexp(1.0, theta);
  for (int i = 0; i < static_cast<int>(W.cubes.size()); ++i) {
    const double li = W.cubes[i].len;
    int gsel = -1;
    for (int gen = Q.gen; gen <= g.depth; ++gen) {
      double lg = std::ldexp(g.domain.root_length(), -gen);
      if (lg <= f * li) {
        if (lg >= li / f) gsel = gen;
        break;
      }
    }
    if (gsel < 0) continue;
    const double budget = f * std::ldexp(g.domain.root_length(), -gsel);
    Box b = W.box(i);
    if (b.distance(Q.center) - g.C1 * Q.len > budget) continue;
    double dq = g.tree.nearest_to_box(b, KdTree::Filter::Inside, Q.sample_begin, Q.sample_end).distance;
    if (dq <= budget) r.cubes.push_back(i);
  }
  r.cutoff_hit = W.cutoff_hit && std::ldexp(g.cube(g.by_gen[g.depth].front()).len, -theta) < W.finest_len;
  return r;
}

// D_{F,Q}: descendants of Q (inclusive) not inside any member of F; empty when Q is in F.
inline std::vector<int> tree_minus_family(const DyadicGrid& g, int q, const std::vector<int>& F) {
  std::set<int> stop(F.begin(), F.end());
  std::vector<int> out;
  std::vector<int> stack{q};
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    if (stop.count(c)) continue;
    out.push_back(c);
    const auto& ch = g.cube(c).children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

inline void check_disjoint_family(const DyadicGrid& g, const std::vector<int>& F) {
  std::vector<std::pair<int, int>> ranges;
  for (int f : F) ranges.push_back({g.cube(f).sample_begin, g.cube(f).sample_end});
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 0; i + 1 < ranges.size(); ++i)
    if (ranges[i].second > ranges[i + 1].first) throw Error(ErrorCode::FamilyNotDisjoint, "family members overlap");
}

inline Region sawtooth(const DyadicGrid& g, const WhitneyDecomposition& W, const std::vector<int>& F, int q, int theta,
                       Fattening level = Fattening::Star) {
  check_disjoint_family(g, F);
  for (int f : F)
    if (!g.is_within(f, q)) throw Error(ErrorCode::FamilyNotDisjoint, "family member outside D_Q");
  Region r;
  r.level = level;
  r.cube = q;
  r.theta = theta;
  auto tree = tree_minus_family(g, q, F);
  if (tree.empty()) return r;
  std::vector<std::vector<int>> by_gen(g.depth + 1);
  int deepest = 0;
  for (int c : tree) {
    by_gen[g.cube(c).gen].push_back(c);
    deepest = std::max(deepest, g.cube(c).gen);
  }
  const double f = std::ldexp(1.0, theta);
  for (int i = 0; i < static_cast<int>(W.cubes.size()); ++i) {
    const double li = W.cubes[i].len;
    bool hit = false;
    for (int gen = 0; gen <= g.depth && !hit; ++gen) {
      double lg = std::ldexp(g.domain.root_length(), -gen);
      if (lg > f * li || lg < li / f) continue;
      for (int c : by_gen[gen]) {
        if (in_whitney_family(g, W, i, c, theta)) {
          hit = true;
          break;
        }
      }
    }
    if (hit) r.cubes.push_back(i);
  }
  r.cutoff_hit = W.cutoff_hit && std::ldexp(std::ldexp(g.domain.root_length(), -deepest), -theta) < W.finest_len;
  return r;
}

struct KappaReport {
  double kappa0 = 0;
  double kappa1 = 0;
  std::size_t probes = 0;
};

// Measures kappa1 B_Q cap Omega subset of T_Q subset of kappa0 B_Q on a probe lattice.
inline KappaReport kappa_check(const DyadicGrid& g, const WhitneyDecomposition& W, const Region& box) {
  KappaReport rep;
  const auto& Q = g.cube(box.cube);
  const double rq = Q.len / (2 * g.C1);
  for (int i : box.cubes) rep.kappa0 = std::max(rep.kappa0, W.box(i).max_distance(Q.center) / rq);
  std::unordered_set<int> member(box.cubes.begin(), box.cubes.end());
  const double h = rq / 4;
  const int M = static_cast<int>(std::ceil(rep.kappa0 * rq / h));
  double uncovered = kInf;
  const int d = g.dim();
  for (int a = -M; a <= M; ++a)
    for (int b = -M; b <= M; ++b)
      for (int c = (d == 3 ? -M : 0); c <= (d == 3 ? M : 0); ++c) {
        Point p = Q.center + Point{a * h, b * h, c * h};
        double r = dist(p, Q.center);
        if (r > rep.kappa0 * rq || !g.domain.contains(p)) continue;
        int id = W.locate(p);
        if (id < 0) continue;
        ++rep.probes;
        if (!member.count(id)) uncovered = std::min(uncovered, r);
      }
  rep.kappa1 = (uncovered == kInf ? rep.kappa0 * rq : uncovered) / rq;
  return rep;
}

// Balls indexed by a k-d tree with per-node max radius.
class BallIndex {
 public:
  BallIndex(std::vector<Point> centers, std::vector<double> radii, int dim)
      : c_(std::move(centers)), r_(std::move(radii)), dim_(dim) {
    perm_.resize(c_.size());
    std::iota(perm_.begin(), perm_.end(), 0);
    if (!c_.empty()) build(0, static_cast<int>(c_.size()));
  }
  int count_containing(const Point& p) const {
    int n = 0;
    if (nodes_.empty()) return 0;
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const Node& nd = nodes_[stack.back()];
      stack.pop_back();
      if (nd.box.distance(p) >= nd.rmax) continue;
      if (nd.left < 0) {
        for (int i = nd.begin; i < nd.end; ++i)
          if (dist(c_[perm_[i]], p) < r_[perm_[i]]) ++n;
        continue;
      }
      stack.push_back(nd.left);
      stack.push_back(nd.right);
    }
    return n;
  }

 private:
  struct Node {
    Box box;
    double rmax;
    int begin, end, left = -1, right = -1;
  };
  int build(int b, int e) {
    Node n;
    n.begin = b;
    n.end = e;
    n.box = Box::empty(dim_);
    n.rmax = 0;
    for (int i = b; i < e; ++i) {
      n.box.expand(c_[perm_[i]]);
      n.rmax = std::max(n.rmax, r_[perm_[i]]);
    }
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    if (e - b > 8) {
      int axis = 0;
      for (int a = 1; a < dim_; ++a)
        if (n.box.side(a) > n.box.side(axis)) axis = a;
      int m = (b + e) / 2;
      std::nth_element(perm_.begin() + b, perm_.begin() + m, perm_.begin() + e,
                       [&](int x, int y) { return c_[x][axis] < c_[y][axis]; });
      int l = build(b, m), r = build(m, e);
      nodes_[id].left = l;
      nodes_[id].right = r;
    }
    return id;
  }
  std::vector<Point> c_;
  std::vector<double> r_;
  int dim_;
  std::vector<int> perm_;
  std::vector<Node> nodes_;
};

struct FamilyPoint {
  int cube;
  Point p;
};

// Probe points of the ball B(P, (1-tau) delta(P)): P itself plus the points of the
// origin-anchored lattice of spacing 2^floor(log2(delta(P)/8)) inside the ball.
// The lattice depends on delta(P) only, so probe sets shrink with the ball as tau grows.
inline std::vector<Point> ball_probes(const Point& P, double delta, double radius, int dim) {
  const double h = std::ldexp(1.0, static_cast<int>(std::floor(std::log2(delta / 8))));
  std::vector<Point> out{P};
  std::int64_t lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    if (a >= dim) {
      lo[a] = hi[a] = 0;
      continue;
    }
    lo[a] = static_cast<std::int64_t>(std::ceil((P[a] - radius) / h));
    hi[a] = static_cast<std::int64_t>(std::floor((P[a] + radius) / h));
  }
  for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
    for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
      for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
        Point q{x * h, y * h, z * h};
        if (dist(q, P) < radius && !(q == P)) out.push_back(q);
      }
  return out;
}

struct OverlapCertificate {
  int theta = 0;
  int C = 0;
  std::size_t probes = 0;
  std::size_t uncovered_probes = 0;  // probes below the Whitney cutoff
  bool cutoff_hit = false;
};

inline void check_family_points(const DyadicGrid& g, const std::vector<FamilyPoint>& family, double c) {
  for (const auto& fp : family) {
    const auto& Q = g.cube(fp.cube);
    if (!g.domain.contains(fp.p)) throw Error(ErrorCode::PreconditionViolated, "P_Q outside the domain");
    if (dist(fp.p, Q.center) >= 2 * g.C1 * Q.len) throw Error(ErrorCode::PreconditionViolated, "P_Q outside 2B~_Q");
    if (g.domain.distance(fp.p) < c * Q.len) throw Error(ErrorCode::PreconditionViolated, "delta(P_Q) < c l(Q)");
  }
}

inline OverlapCertificate overlap_certificate(const DyadicGrid& g, const WhitneyDecomposition& W,
                                              const std::vector<FamilyPoint>& family, double tau, double c) {
  if (!(tau > 0 && tau < 0.5 && c > 0 && c < 0.5))
    throw Error(ErrorCode::PreconditionViolated, "tau and c must lie in (0, 1/2)");
  check_family_points(g, family, c);
  OverlapCertificate cert;
  std::vector<Point> centers;
  std::vector<double> radii;
  for (const auto& fp : family) {
    centers.push_back(fp.p);
    radii.push_back((1 - tau) * g.domain.distance(fp.p));
  }
  BallIndex balls(centers, radii, g.dim());
  std::unordered_map<int, int> need_cache;
  auto required = [&](int I) {
    auto it = need_cache.find(I);
    if (it != need_cache.end()) return it->second;
    int best = std::numeric_limits<int>::max();
    for (const auto& fp : family) {
      const double lq = g.cube(fp.cube).len, li = W.cubes[I].len;
      int size_need = static_cast<int>(std::ceil(std::abs(std::log2(li / lq)) - 1e-12));
      if (size_need >= best) continue;
      double dq = whitney_cube_distance(g, W, I, fp.cube);
      int dist_need = dq <= lq ? 0 : static_cast<int>(std::ceil(std::log2(dq / lq) - 1e-12));
      best = std::min(best, std::max({0, size_need, dist_need}));
    }
    need_cache[I] = best;
    return best;
  };
  std::unordered_set<WhitneyKey, WhitneyKeyHash> seen;
  for (std::size_t k = 0; k < family.size(); ++k) {
    const double delta = g.domain.distance(family[k].p);
    for (const Point& p : ball_probes(family[k].p, delta, radii[k], g.dim())) {
      WhitneyKey pk{0, static_cast<std::int64_t>(std::llround(p.x * 1e9)), static_cast<std::int64_t>(std::llround(p.y * 1e9)),
                    static_cast<std::int64_t>(std::llround(p.z * 1e9))};
      if (!seen.insert(pk).second) continue;
      ++cert.probes;
      cert.C = std::max(cert.C, balls.count_containing(p));
      int I = W.locate(p);
      if (I < 0) {
        ++cert.uncovered_probes;
        continue;
      }
      cert.theta = std::max(cert.theta, required(I));
    }
  }
  cert.cutoff_hit = cert.uncovered_probes > 0;
  return cert;
}

inline void write_whitney_csv(std::ostream& os, const WhitneyDecomposition& W) {
  os << (W.dim == 2 ? "corner_x,corner_y" : "corner_x,corner_y,corner_z") << ",len,dist\n";
  os.precision(17);
  for (const auto& c : W.cubes) {
    for (int a = 0; a < W.dim; ++a) os << c.corner[a] << ",";
    os << c.len << "," << c.dist << "\n";
  }
}

inline json region_to_json(const Region& r) {
  static const char* names[] = {"I", "I*", "I**", "I***"};
  return json{{"cube", r.cube},
              {"theta", r.theta},
              {"level", names[static_cast<int>(r.level)]},
              {"cutoff_hit", r.cutoff_hit},
              {"members", r.cubes}};
}

}  // namespace coronalab
