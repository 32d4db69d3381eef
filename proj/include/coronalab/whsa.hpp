#pragma once
#include <optional>

#include "dyadic.hpp"
#include "rng.hpp"

namespace coronalab {

// H = {y : (y - plane_point) . unit_normal > 0}, P = boundary of H.
struct HalfSpaceWitness {
  Point plane_point;
  Point unit_normal;
  double epsilon = 0;
  double K0 = 1;
  int cube = -1;
  bool clipped = false;      // B** was cut by the clip box
  bool net_capped = false;   // plane net or direction net hit its cap
  double max_gap = 0;        // max dist(X, E) over the plane net, in units of l(Q)
  double plane_distance = 0; // dist(Q, P) / l(Q)
  double net_spacing = 0;    // plane-net step, in units of l(Q)
  int directions_tested = 0;
};

struct WhsaOptions {
  int max_directions_3d = 4096;
  int plane_net_per_axis = 400;
};

namespace detail {

// Clip region for B**: the domain bounds padded by half their largest side.
inline Box whsa_clip_box(const Domain& domain) {
  Box b = domain.bounds();
  double pad = 0.5 * b.max_side();
  for (int a = 0; a < domain.dim(); ++a) {
    b.lo[a] -= pad;
    b.hi[a] += pad;
  }
  return b;
}

inline std::vector<Point> whsa_directions(int dim, double eps, int cap3, bool* capped) {
  std::vector<Point> dirs;
  if (dim == 2) {
    int n = static_cast<int>(std::ceil(2 * kPi / (eps / 8)));
    for (int i = 0; i < n; ++i) {
      double t = 2 * kPi * i / n;
      dirs.push_back({std::cos(t), std::sin(t), 0});
    }
    return dirs;
  }
  double step = eps / 8;
  int want = static_cast<int>(std::ceil(4 * kPi / (step * step)));
  int n = std::min(want, cap3);
  if (capped && want > cap3) *capped = true;
  const double golden = kPi * (3 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1 - 2 * (i + 0.5) / n;
    double r = std::sqrt(std::max(0.0, 1 - z * z));
    dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
  }
  return dirs;
}

// Orthonormal basis of the hyperplane orthogonal to n.
inline std::pair<Point, Point> plane_basis(const Point& n) {
  Point a = std::abs(n.x) < 0.9 ? Point{1, 0, 0} : Point{0, 1, 0};
  Point u = cross(n, a);
  u = u / norm(u);
  Point v = cross(n, u);
  return {u, v};
}

// Points of P cap B(center, R) cap clip, P through `foot` with normal n.
inline std::vector<Point> plane_net(int dim, const Point& foot, const Point& n, double radius, double spacing,
                                    int cap, const Box& clip, bool* capped, double* step = nullptr) {
  std::vector<Point> out;
  if (radius <= 0) return out;
  int m = static_cast<int>(std::ceil(radius / spacing));
  if (2 * m + 1 > cap) {
    m = (cap - 1) / 2;
    if (capped) *capped = true;
  }
  double h = m > 0 ? radius / m : 0;
  if (step) *step = h;
  if (dim == 2) {
    Point u{-n.y, n.x, 0};
    for (int i = -m; i <= m; ++i) {
      Point p = foot + u * (i * h);
      if (clip.contains(p)) out.push_back(p);
    }
    return out;
  }
  auto [u, v] = plane_basis(n);
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j) {
      double s = i * h, t = j * h;
      if (s * s + t * t > radius * radius) continue;
      Point p = foot + u * s + v * t;
      if (clip.contains(p)) out.push_back(p);
    }
  return out;
}

}  // namespace detail

inline std::optional<HalfSpaceWitness> whsa_feasibility(const DyadicGrid& g, int q, double eps, double K0,
                                                        const WhsaOptions& opt = {}) {
  if (!(eps > 0 && eps < 1) || !(K0 >= 1))
    throw Error(ErrorCode::PreconditionViolated, "whsa requires 0 < eps < 1 and K0 >= 1");
  const auto& Q = g.cube(q);
  const int dim = g.dim();
  const double l = Q.len;
  const double R = l / (eps * eps);
  const Box clip = detail::whsa_clip_box(g.domain);
  bool clipped = false;
  for (int a = 0; a < dim; ++a)
    if (Q.center[a] - R < clip.lo[a] || Q.center[a] + R > clip.hi[a]) clipped = true;

  std::vector<int> in_ball;
  for (int s = 0; s < static_cast<int>(g.samples.size()); ++s)
    if (dist(g.samples[s], Q.center) < R && clip.contains(g.samples[s])) in_ball.push_back(s);

  bool capped = false;
  // Exact normals at the cube's own samples are tried before the direction net.
  std::vector<Point> dirs;
  {
    int stride = std::max(1, (Q.sample_end - Q.sample_begin) / 16);
    std::vector<int> picks{Q.center_sample};
    for (int s = Q.sample_begin; s < Q.sample_end; s += stride) picks.push_back(s);
    for (int s : picks) {
      Point n = g.domain.outward_normal(g.samples[s]);
      if (norm(n) > 0) {
        dirs.push_back(n / norm(n));
        dirs.push_back(n / -norm(n));
      }
    }
    auto net = detail::whsa_directions(dim, eps, opt.max_directions_3d, &capped);
    dirs.insert(dirs.end(), net.begin(), net.end());
  }
  const double budget = eps * l;
  const double spacing = budget / 4;
  const double bound_b = std::pow(K0, 1.5) * l;

  HalfSpaceWitness w;
  w.epsilon = eps;
  w.K0 = K0;
  w.cube = q;
  w.clipped = clipped;
  int tested = 0;
  for (const Point& n : dirs) {
    ++tested;
    double tmax = -kInf;
    for (int s : in_ball) tmax = std::max(tmax, dot(g.samples[s], n));
    if (tmax == -kInf) tmax = dot(Q.center, n);
    for (int k = 0; k < 3; ++k) {
      const double t = tmax + k * budget / 2;
      double dqp = kInf;
      for (int s = Q.sample_begin; s < Q.sample_end; ++s) dqp = std::min(dqp, std::abs(dot(g.samples[s], n) - t));
      if (dqp > bound_b) break;
      const double off = dot(Q.center, n) - t;
      if (std::abs(off) >= R) break;
      const Point foot = Q.center - n * off;
      const double rad = std::sqrt(R * R - off * off);
      bool cap_here = false;
      double step = 0;
      auto net = detail::plane_net(dim, foot, n, rad, spacing, opt.plane_net_per_axis, clip, &cap_here, &step);
      double gap = 0;
      bool ok = true;
      for (int pass = 0; pass < 2 && ok; ++pass) {
        for (std::size_t i = pass == 0 ? 0 : 1; i < net.size(); i += (pass == 0 ? 8 : 1)) {
          if (pass == 1 && i % 8 == 0) continue;
          double d = g.domain.distance(net[i]);
          gap = std::max(gap, d);
          if (d > budget) {
            ok = false;
            break;
          }
        }
      }
      if (!ok) continue;
      w.plane_point = foot;
      w.unit_normal = n;
      w.max_gap = gap / l;
      w.plane_distance = dqp / l;
      w.net_spacing = step / l;
      w.net_capped = capped || cap_here;
      w.directions_tested = tested;
      return w;
    }
  }
  return std::nullopt;
}

struct WhsaVerdict {
  bool a = false, b = false, c = false;
  double max_gap = 0;
  double plane_distance = 0;
  std::size_t probes = 0;
  bool ok() const { return a && b && c; }
};

// Re-checks (a)(b)(c) with random plane probes and every sample, independent of the search net.
inline WhsaVerdict verify_whsa(const DyadicGrid& g, const HalfSpaceWitness& w, int probes = 4000,
                               std::uint64_t seed = 7) {
  WhsaVerdict v;
  const auto& Q = g.cube(w.cube);
  const double l = Q.len;
  const double R = l / (w.epsilon * w.epsilon);
  const Box clip = detail::whsa_clip_box(g.domain);
  const Point& n = w.unit_normal;
  const double off = dot(Q.center - w.plane_point, n);
  const Point foot = Q.center - n * off;
  const double rad = std::sqrt(std::max(0.0, R * R - off * off));
  CounterRng rng(seed, static_cast<std::uint64_t>(w.cube));
  Point u{-n.y, n.x, 0}, v2;
  if (g.dim() == 3) std::tie(u, v2) = detail::plane_basis(n);
  for (int i = 0; i < probes; ++i) {
    Point p = foot;
    if (g.dim() == 2) {
      p = p + u * ((2 * rng.uniform() - 1) * rad);
    } else {
      double r = rad * std::sqrt(rng.uniform()), th = 2 * kPi * rng.uniform();
      p = p + u * (r * std::cos(th)) + v2 * (r * std::sin(th));
    }
    if (!clip.contains(p) || dist(p, Q.center) >= R) continue;
    ++v.probes;
    v.max_gap = std::max(v.max_gap, g.domain.distance(p) / l);
  }
  // delta is 1-Lipschitz, so off-net points exceed the net bound by at most the net covering radius.
  v.a = v.max_gap <= w.epsilon + w.net_spacing * std::sqrt(g.dim() - 1.0) / 2 + 1e-12;
  double dqp = kInf;
  for (int s = Q.sample_begin; s < Q.sample_end; ++s)
    dqp = std::min(dqp, std::abs(dot(g.samples[s] - w.plane_point, n)));
  v.plane_distance = dqp / l;
  v.b = dqp <= std::pow(w.K0, 1.5) * l * (1 + 1e-12);
  v.c = true;
  const double tol = 1e-12 * std::max(1.0, g.domain.diam_boundary());
  for (std::size_t s = 0; s < g.samples.size(); ++s) {
    if (dist(g.samples[s], Q.center) >= R || !clip.contains(g.samples[s])) continue;
    if (dot(g.samples[s] - w.plane_point, n) > tol) {
      v.c = false;
      break;
    }
  }
  return v;
}

inline json witness_to_json(const HalfSpaceWitness& w, int dim) {
  return json{{"cube", w.cube},
              {"plane_point", point_to_json(w.plane_point, dim)},
              {"unit_normal", point_to_json(w.unit_normal, dim)},
              {"epsilon", w.epsilon},
              {"K0", w.K0},
              {"clipped", w.clipped},
              {"net_capped", w.net_capped},
              {"max_gap", w.max_gap},
              {"plane_distance", w.plane_distance},
              {"directions_tested", w.directions_tested}};
}

}  // namespace coronalab
