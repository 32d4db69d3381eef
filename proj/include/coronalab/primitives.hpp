#pragma once
#include <memory>
#include <unordered_map>
#include <vector>

#include "core.hpp"

namespace coronalab {

enum class CellKind : std::uint8_t { Group, Interval, Rect, SurfaceRoot, Cluster, HalfCluster };

// A node of a primitive's natural boundary hierarchy. Intervals parametrize
// curves, Rects parametrize surface faces, Clusters are four-corner blocks.
struct BoundaryCell {
  CellKind kind = CellKind::Interval;
  int prim = -1;
  int face = 0;
  double a0 = 0, a1 = 0, b0 = 0, b1 = 0;
  Point origin;
  double size = 0;
  int half = 0;
};

namespace detail {

// Length of the part of segment [a, b] strictly inside B(c, r).
inline double segment_in_ball(const Point& a, const Point& b, const Point& c, double r) {
  Point d = b - a;
  double A = dot(d, d);
  if (A == 0) return 0;
  Point f = a - c;
  double B = 2 * dot(f, d);
  double C = dot(f, f) - r * r;
  double disc = B * B - 4 * A * C;
  if (disc <= 0) return 0;
  double sq = std::sqrt(disc);
  double t1 = std::max(0.0, (-B - sq) / (2 * A));
  double t2 = std::min(1.0, (-B + sq) / (2 * A));
  return t2 > t1 ? (t2 - t1) * std::sqrt(A) : 0.0;
}

// Area of [x0,x1]x[y0,y1] intersected with the disk of radius rho at (cx, cy).
inline double rect_disk_area(double x0, double x1, double y0, double y1, double cx, double cy, double rho) {
  if (rho <= 0) return 0;
  x0 -= cx; x1 -= cx; y0 -= cy; y1 -= cy;
  x0 = std::max(x0, -rho);
  x1 = std::min(x1, rho);
  if (x1 <= x0 || y1 <= y0) return 0;
  auto H = [rho](double x) { return std::sqrt(std::max(0.0, rho * rho - x * x)); };
  auto G = [rho, &H](double x) {
    double t = std::clamp(x / rho, -1.0, 1.0);
    return 0.5 * (x * H(x) + rho * rho * std::asin(t));
  };
  std::vector<double> cuts{x0, x1};
  for (double t : {y0, y1}) {
    if (std::abs(t) < rho) {
      double s = std::sqrt(rho * rho - t * t);
      for (double c : {-s, s})
        if (c > x0 && c < x1) cuts.push_back(c);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double area = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = cuts[i + 1];
    if (b <= a) continue;
    double h = H(0.5 * (a + b));
    bool top_is_h = h < y1;
    bool bottom_is_h = -h > y0;
    double top = top_is_h ? h : y1;
    double bottom = bottom_is_h ? -h : y0;
    if (top <= bottom) continue;
    double coef = (top_is_h ? 1.0 : 0.0) + (bottom_is_h ? 1.0 : 0.0);
    double cst = (top_is_h ? 0.0 : y1) - (bottom_is_h ? 0.0 : y0);
    area += cst * (b - a) + coef * (G(b) - G(a));
  }
  return area;
}

// Liang-Barsky test: does segment [a, b] meet the closed 2D box?
inline bool segment_hits_box2(const Point& a, const Point& b, const Box& box) {
  double t0 = 0, t1 = 1;
  Point d = b - a;
  for (int i = 0; i < 2; ++i) {
    if (d[i] == 0) {
      if (a[i] < box.lo[i] || a[i] > box.hi[i]) return false;
      continue;
    }
    double ta = (box.lo[i] - a[i]) / d[i], tb = (box.hi[i] - a[i]) / d[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

inline double segment_box_distance2(const Point& a, const Point& b, const Box& box) {
  if (segment_hits_box2(a, b, box)) return 0;
  double d = std::min(box.distance(a), box.distance(b));
  Point corners[4] = {{box.lo.x, box.lo.y, 0}, {box.hi.x, box.lo.y, 0}, {box.lo.x, box.hi.y, 0}, {box.hi.x, box.hi.y, 0}};
  for (const auto& c : corners) d = std::min(d, segment_distance(c, a, b));
  return d;
}

// Distance between a closed box B and the boundary of the closed box S.
inline double box_to_box_boundary(const Box& b, const Box& s) {
  if (!b.intersects(s)) return b.distance(s);
  double gap = kInf;
  for (int i = 0; i < s.dim; ++i) {
    gap = std::min(gap, b.lo[i] - s.lo[i]);
    gap = std::min(gap, s.hi[i] - b.hi[i]);
  }
  return gap > 0 ? gap : 0.0;
}

inline double box_boundary_distance(const Point& p, const Box& s) {
  if (!s.contains(p)) return s.distance(p);
  double d = kInf;
  for (int i = 0; i < s.dim; ++i) d = std::min({d, p[i] - s.lo[i], s.hi[i] - p[i]});
  return d;
}

inline Point box_boundary_nearest(const Point& p, const Box& s) {
  Point q = p;
  if (!s.contains(p) || s.dim == 0) {
    for (int i = 0; i < s.dim; ++i) q[i] = std::clamp(p[i], s.lo[i], s.hi[i]);
    return q;
  }
  int best = 0;
  bool upper = false;
  double d = kInf;
  for (int i = 0; i < s.dim; ++i) {
    if (p[i] - s.lo[i] < d) { d = p[i] - s.lo[i]; best = i; upper = false; }
    if (s.hi[i] - p[i] < d) { d = s.hi[i] - p[i]; best = i; upper = true; }
  }
  q[best] = upper ? s.hi[best] : s.lo[best];
  return q;
}

inline bool box_interior_contains(const Box& s, const Point& p) {
  for (int i = 0; i < s.dim; ++i)
    if (p[i] <= s.lo[i] || p[i] >= s.hi[i]) return false;
  return true;
}

// Face frames for cube-like surfaces: normal axis k = f/2, sign from parity.
struct FaceFrame {
  int k, e1, e2;
  double sign;
};
inline FaceFrame face_frame(int f) {
  int k = f / 2;
  return {k, (k + 1) % 3, (k + 2) % 3, (f % 2 == 0) ? 1.0 : -1.0};
}

// Area of a planar rectangle (origin o, unit axes u, v, extents [0,lu]x[0,lv])
// inside B(c, r).
inline double planar_rect_in_ball(const Point& o, const Point& u, const Point& v, double lu, double lv,
                                  const Point& c, double r) {
  Point n = cross(u, v);
  double h = dot(c - o, n);
  double rho2 = r * r - h * h;
  if (rho2 <= 0) return 0;
  double s = dot(c - o, u), t = dot(c - o, v);
  return rect_disk_area(0, lu, 0, lv, s, t, std::sqrt(rho2));
}

inline std::vector<BoundaryCell> split_interval(const BoundaryCell& c) {
  BoundaryCell l = c, r = c;
  double m = 0.5 * (c.a0 + c.a1);
  l.a1 = m;
  r.a0 = m;
  return {l, r};
}

inline std::vector<BoundaryCell> split_rect(const BoundaryCell& c) {
  double ma = 0.5 * (c.a0 + c.a1), mb = 0.5 * (c.b0 + c.b1);
  std::vector<BoundaryCell> out(4, c);
  out[0].a1 = ma; out[0].b1 = mb;
  out[1].a0 = ma; out[1].b1 = mb;
  out[2].a1 = ma; out[2].b0 = mb;
  out[3].a0 = ma; out[3].b0 = mb;
  return out;
}

// Point on the perimeter of the square [p, p+s]^2 at arclength t (counterclockwise from p).
inline Point square_perimeter_point(const Point& p, double s, double t) {
  if (t <= s) return p + Point{t, 0, 0};
  if (t <= 2 * s) return p + Point{s, t - s, 0};
  if (t <= 3 * s) return p + Point{3 * s - t, s, 0};
  return p + Point{0, 4 * s - t, 0};
}

}  // namespace detail

class Primitive {
 public:
  virtual ~Primitive() = default;
  virtual int dim() const = 0;
  virtual std::string name() const = 0;
  virtual double distance(const Point& x) const = 0;
  // Open interior of the primitive (the side that belongs to a union domain).
  virtual bool inside(const Point& x) const = 0;
  virtual Point nearest(const Point& x) const = 0;
  virtual double box_distance(const Box& b) const = 0;
  virtual double surface_measure(const Point& x, double r) const = 0;
  virtual double boundary_measure() const = 0;
  // Bounding box of the sampled boundary piece.
  virtual Box bounds() const = 0;
  virtual bool bounded_interior() const { return true; }
  virtual int component_count() const { return 1; }
  virtual int component_of(const Point&) const { return 0; }

  virtual double root_length() const = 0;
  virtual BoundaryCell root_cell() const = 0;
  virtual std::vector<BoundaryCell> children(const BoundaryCell& c) const = 0;
  virtual Point cell_center(const BoundaryCell& c) const = 0;
  virtual double cell_sigma(const BoundaryCell& c) const = 0;
  virtual int cell_component(const BoundaryCell&) const { return 0; }
  // Outward unit normal (pointing away from the primitive's interior) at a boundary point.
  virtual Point outward_normal(const Point& y) const = 0;
};

class BallPrimitive final : public Primitive {
 public:
  BallPrimitive(int dim, const Point& center, double radius) : dim_(dim), c_(center), r_(radius) {}

  int dim() const override { return dim_; }
  std::string name() const override { return "ball"; }
  const Point& center() const { return c_; }
  double radius() const { return r_; }
  double distance(const Point& x) const override { return std::abs(dist(x, c_) - r_); }
  bool inside(const Point& x) const override { return dist(x, c_) < r_; }
  Point nearest(const Point& x) const override {
    Point d = x - c_;
    double n = norm(d);
    if (n == 0) return c_ + Point{r_, 0, 0};
    return c_ + d * (r_ / n);
  }
  double box_distance(const Box& b) const override {
    double dmin = b.distance(c_), dmax = b.max_distance(c_);
    if (r_ < dmin) return dmin - r_;
    if (r_ > dmax) return r_ - dmax;
    return 0;
  }
  double surface_measure(const Point& x, double r) const override {
    double d = dist(x, c_);
    double t;
    if (d == 0) {
      t = r > r_ ? -1.0 : 1.0;
    } else {
      t = std::clamp((r_ * r_ + d * d - r * r) / (2 * r_ * d), -1.0, 1.0);
    }
    if (dim_ == 2) return 2 * r_ * std::acos(t);
    return 2 * kPi * r_ * r_ * (1 - t);
  }
  double boundary_measure() const override { return dim_ == 2 ? 2 * kPi * r_ : 4 * kPi * r_ * r_; }
  Box bounds() const override { return Box::around(c_, r_, dim_); }
  double root_length() const override { return 2 * r_; }
  BoundaryCell root_cell() const override {
    BoundaryCell c;
    if (dim_ == 2) {
      c.kind = CellKind::Interval;
      c.a0 = 0;
      c.a1 = 2 * kPi;
    } else {
      c.kind = CellKind::SurfaceRoot;
    }
    return c;
  }
  std::vector<BoundaryCell> children(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return detail::split_interval(c);
    if (c.kind == CellKind::SurfaceRoot) {
      std::vector<BoundaryCell> out;
      for (int f = 0; f < 6; ++f) {
        BoundaryCell r = c;
        r.kind = CellKind::Rect;
        r.face = f;
        r.a0 = r.b0 = -kPi / 4;
        r.a1 = r.b1 = kPi / 4;
        out.push_back(r);
      }
      return out;
    }
    return detail::split_rect(c);
  }
  Point sphere_point(int face, double alpha, double beta) const {
    auto fr = detail::face_frame(face);
    Point d;
    d[fr.k] = fr.sign;
    d[fr.e1] = std::tan(alpha);
    d[fr.e2] = std::tan(beta);
    return c_ + d * (r_ / norm(d));
  }
  Point cell_center(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) {
      double m = 0.5 * (c.a0 + c.a1);
      return c_ + Point{r_ * std::cos(m), r_ * std::sin(m), 0};
    }
    if (c.kind == CellKind::SurfaceRoot) return sphere_point(0, 0, 0);
    return sphere_point(c.face, 0.5 * (c.a0 + c.a1), 0.5 * (c.b0 + c.b1));
  }
  double cell_sigma(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return r_ * (c.a1 - c.a0);
    if (c.kind == CellKind::SurfaceRoot) return boundary_measure();
    auto F = [](double x, double y) { return std::atan(x * y / std::sqrt(1 + x * x + y * y)); };
    double x0 = std::tan(c.a0), x1 = std::tan(c.a1), y0 = std::tan(c.b0), y1 = std::tan(c.b1);
    return r_ * r_ * (F(x1, y1) - F(x0, y1) - F(x1, y0) + F(x0, y0));
  }
  Point outward_normal(const Point& y) const override {
    Point d = y - c_;
    return d / norm(d);
  }

 private:
  int dim_;
  Point c_;
  double r_;
};

// Axis-aligned square (d=2) or cube (d=3) [corner, corner + side]^d.
class BoxPrimitive final : public Primitive {
 public:
  BoxPrimitive(int dim, const Point& corner, double side) : dim_(dim), p_(corner), s_(side) {
    box_.dim = dim;
    box_.lo = corner;
    box_.hi = corner;
    for (int i = 0; i < dim; ++i) box_.hi[i] += side;
  }

  int dim() const override { return dim_; }
  std::string name() const override { return "box"; }
  const Box& box() const { return box_; }
  const Point& corner() const { return p_; }
  double side() const { return s_; }
  double distance(const Point& x) const override { return detail::box_boundary_distance(x, box_); }
  bool inside(const Point& x) const override { return detail::box_interior_contains(box_, x); }
  Point nearest(const Point& x) const override { return detail::box_boundary_nearest(x, box_); }
  double box_distance(const Box& b) const override { return detail::box_to_box_boundary(b, box_); }
  double surface_measure(const Point& x, double r) const override {
    if (box_.distance(x) >= r) return 0;
    double total = 0;
    if (dim_ == 2) {
      for (int e = 0; e < 4; ++e) {
        Point a = detail::square_perimeter_point(p_, s_, e * s_);
        Point b = detail::square_perimeter_point(p_, s_, (e + 1) * s_);
        total += detail::segment_in_ball(a, b, x, r);
      }
      return total;
    }
    for (int f = 0; f < 6; ++f) {
      auto fr = detail::face_frame(f);
      Point o = p_;
      if (fr.sign > 0) o[fr.k] += s_;
      Point u, v;
      u[fr.e1] = 1;
      v[fr.e2] = 1;
      total += detail::planar_rect_in_ball(o, u, v, s_, s_, x, r);
    }
    return total;
  }
  double boundary_measure() const override { return dim_ == 2 ? 4 * s_ : 6 * s_ * s_; }
  Box bounds() const override { return box_; }
  double root_length() const override { return dim_ == 2 ? s_ : 2 * s_; }
  BoundaryCell root_cell() const override {
    BoundaryCell c;
    if (dim_ == 2) {
      c.kind = CellKind::Interval;
      c.a0 = 0;
      c.a1 = 4 * s_;
      c.origin = p_;
      c.size = s_;
    } else {
      c.kind = CellKind::SurfaceRoot;
    }
    return c;
  }
  std::vector<BoundaryCell> children(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return detail::split_interval(c);
    if (c.kind == CellKind::SurfaceRoot) {
      std::vector<BoundaryCell> out;
      for (int f = 0; f < 6; ++f) {
        BoundaryCell r = c;
        r.kind = CellKind::Rect;
        r.face = f;
        r.a0 = r.b0 = 0;
        r.a1 = r.b1 = s_;
        out.push_back(r);
      }
      return out;
    }
    return detail::split_rect(c);
  }
  Point face_point(int face, double a, double b) const {
    auto fr = detail::face_frame(face);
    Point q = p_;
    if (fr.sign > 0) q[fr.k] += s_;
    q[fr.e1] += a;
    q[fr.e2] += b;
    return q;
  }
  Point cell_center(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return detail::square_perimeter_point(p_, s_, 0.5 * (c.a0 + c.a1));
    if (c.kind == CellKind::SurfaceRoot) return face_point(0, 0.5 * s_, 0.5 * s_);
    return face_point(c.face, 0.5 * (c.a0 + c.a1), 0.5 * (c.b0 + c.b1));
  }
  double cell_sigma(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return c.a1 - c.a0;
    if (c.kind == CellKind::SurfaceRoot) return boundary_measure();
    return (c.a1 - c.a0) * (c.b1 - c.b0);
  }
  Point outward_normal(const Point& y) const override {
    Point n;
    double best = kInf;
    for (int i = 0; i < dim_; ++i) {
      if (std::abs(y[i] - box_.lo[i]) < best) { best = std::abs(y[i] - box_.lo[i]); n = Point{}; n[i] = -1; }
      if (std::abs(y[i] - box_.hi[i]) < best) { best = std::abs(y[i] - box_.hi[i]); n = Point{}; n[i] = 1; }
    }
    return n;
  }

 private:
  int dim_;
  Point p_;
  double s_;
  Box box_;
};

// Upper half-space {x_d > 0}; the boundary window [-W, W]^{d-1} is what gets sampled.
class HalfSpacePrimitive final : public Primitive {
 public:
  HalfSpacePrimitive(int dim, double window) : dim_(dim), w_(window) {}

  int dim() const override { return dim_; }
  std::string name() const override { return "half_space"; }
  double window() const { return w_; }
  double distance(const Point& x) const override { return std::abs(x[dim_ - 1]); }
  bool inside(const Point& x) const override { return x[dim_ - 1] > 0; }
  Point nearest(const Point& x) const override {
    Point q = x;
    q[dim_ - 1] = 0;
    return q;
  }
  double box_distance(const Box& b) const override {
    double lo = b.lo[dim_ - 1], hi = b.hi[dim_ - 1];
    if (lo <= 0 && hi >= 0) return 0;
    return std::min(std::abs(lo), std::abs(hi));
  }
  double surface_measure(const Point& x, double r) const override {
    if (dim_ == 2) return detail::segment_in_ball({-w_, 0, 0}, {w_, 0, 0}, x, r);
    double rho2 = r * r - x.z * x.z;
    if (rho2 <= 0) return 0;
    return detail::rect_disk_area(-w_, w_, -w_, w_, x.x, x.y, std::sqrt(rho2));
  }
  double boundary_measure() const override { return dim_ == 2 ? 2 * w_ : 4 * w_ * w_; }
  Box bounds() const override {
    Box b = Box::around({}, w_, dim_);
    b.lo[dim_ - 1] = 0;
    b.hi[dim_ - 1] = 0;
    return b;
  }
  bool bounded_interior() const override { return false; }
  double root_length() const override { return 2 * w_; }
  BoundaryCell root_cell() const override {
    BoundaryCell c;
    c.kind = dim_ == 2 ? CellKind::Interval : CellKind::Rect;
    c.a0 = c.b0 = -w_;
    c.a1 = c.b1 = w_;
    return c;
  }
  std::vector<BoundaryCell> children(const BoundaryCell& c) const override {
    return c.kind == CellKind::Interval ? detail::split_interval(c) : detail::split_rect(c);
  }
  Point cell_center(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return {0.5 * (c.a0 + c.a1), 0, 0};
    return {0.5 * (c.a0 + c.a1), 0.5 * (c.b0 + c.b1), 0};
  }
  double cell_sigma(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return c.a1 - c.a0;
    return (c.a1 - c.a0) * (c.b1 - c.b0);
  }
  Point outward_normal(const Point&) const override {
    Point n;
    n[dim_ - 1] = -1;
    return n;
  }

 private:
  int dim_;
  double w_;
};

// Supergraph {x_d > phi(x_1)} of a piecewise-linear phi, constant beyond its end
// nodes. In d=3 the graph is a ridge phi(x, y) = phi(x).
class LipschitzGraphPrimitive final : public Primitive {
 public:
  LipschitzGraphPrimitive(int dim, std::vector<std::array<double, 2>> nodes, double window)
      : dim_(dim), nodes_(std::move(nodes)), w_(window) {
    double far = 1e6 * (1 + w_ + std::abs(nodes_.front()[0]) + std::abs(nodes_.back()[0]));
    pts_.push_back({-far, nodes_.front()[1], 0});
    for (auto& n : nodes_) pts_.push_back({n[0], n[1], 0});
    pts_.push_back({far, nodes_.back()[1], 0});
    lmin_ = kInf;
    lmax_ = -kInf;
    for (auto& n : nodes_) {
      lmin_ = std::min(lmin_, n[1]);
      lmax_ = std::max(lmax_, n[1]);
    }
  }

  int dim() const override { return dim_; }
  std::string name() const override { return "lipschitz_graph"; }
  double window() const { return w_; }
  double lipschitz_constant() const {
    double L = 0;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i)
      L = std::max(L, std::abs(pts_[i + 1].y - pts_[i].y) / (pts_[i + 1].x - pts_[i].x));
    return L;
  }
  double phi(double x) const {
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      if (x <= pts_[i + 1].x) {
        double t = (x - pts_[i].x) / (pts_[i + 1].x - pts_[i].x);
        return pts_[i].y + t * (pts_[i + 1].y - pts_[i].y);
      }
    }
    return pts_.back().y;
  }
  Point planar(const Point& x) const { return {x.x, x[dim_ - 1], 0}; }
  double distance(const Point& x) const override {
    Point q = planar(x);
    double d = kInf;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) d = std::min(d, segment_distance(q, pts_[i], pts_[i + 1]));
    return d;
  }
  bool inside(const Point& x) const override { return x[dim_ - 1] > phi(x.x); }
  Point nearest(const Point& x) const override {
    Point q = planar(x), best_pt;
    double d = kInf;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      Point n;
      double di = segment_distance(q, pts_[i], pts_[i + 1], &n);
      if (di < d) { d = di; best_pt = n; }
    }
    Point out = x;
    out.x = best_pt.x;
    out[dim_ - 1] = best_pt.y;
    return out;
  }
  double box_distance(const Box& b) const override {
    Box p;
    p.dim = 2;
    p.lo = {b.lo.x, b.lo[dim_ - 1], 0};
    p.hi = {b.hi.x, b.hi[dim_ - 1], 0};
    double d = kInf;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) d = std::min(d, detail::segment_box_distance2(pts_[i], pts_[i + 1], p));
    return d;
  }
  // Window-clipped pieces of the polyline, as planar segments.
  std::vector<std::pair<Point, Point>> window_segments(double x0, double x1) const {
    std::vector<std::pair<Point, Point>> out;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      double a = std::max(x0, pts_[i].x), b = std::min(x1, pts_[i + 1].x);
      if (b <= a) continue;
      out.push_back({{a, phi(a), 0}, {b, phi(b), 0}});
    }
    return out;
  }
  double arclength(double x0, double x1) const {
    double s = 0;
    for (auto& [a, b] : window_segments(x0, x1)) s += dist(a, b);
    return s;
  }
  double surface_measure(const Point& x, double r) const override {
    double total = 0;
    if (dim_ == 2) {
      for (auto& [a, b] : window_segments(-w_, w_)) total += detail::segment_in_ball(a, b, x, r);
      return total;
    }
    for (auto& [a, b] : window_segments(-w_, w_)) {
      Point o{a.x, -w_, a.y};
      Point e{b.x - a.x, 0, b.y - a.y};
      double len = norm(e);
      total += detail::planar_rect_in_ball(o, e / len, {0, 1, 0}, len, 2 * w_, x, r);
    }
    return total;
  }
  double boundary_measure() const override {
    double l = arclength(-w_, w_);
    return dim_ == 2 ? l : l * 2 * w_;
  }
  Box bounds() const override {
    Box b = Box::around({}, w_, dim_);
    b.lo[dim_ - 1] = lmin_;
    b.hi[dim_ - 1] = lmax_;
    return b;
  }
  bool bounded_interior() const override { return false; }
  double root_length() const override { return 2 * w_; }
  BoundaryCell root_cell() const override {
    BoundaryCell c;
    c.kind = dim_ == 2 ? CellKind::Interval : CellKind::Rect;
    c.a0 = c.b0 = -w_;
    c.a1 = c.b1 = w_;
    return c;
  }
  std::vector<BoundaryCell> children(const BoundaryCell& c) const override {
    return c.kind == CellKind::Interval ? detail::split_interval(c) : detail::split_rect(c);
  }
  Point cell_center(const BoundaryCell& c) const override {
    double xm = 0.5 * (c.a0 + c.a1);
    if (c.kind == CellKind::Interval) return {xm, phi(xm), 0};
    return {xm, 0.5 * (c.b0 + c.b1), phi(xm)};
  }
  double cell_sigma(const BoundaryCell& c) const override {
    double l = arclength(c.a0, c.a1);
    return c.kind == CellKind::Interval ? l : l * (c.b1 - c.b0);
  }
  Point outward_normal(const Point& y) const override {
    double x = y.x;
    double slope = 0;
    for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
      if (x <= pts_[i + 1].x) {
        slope = (pts_[i + 1].y - pts_[i].y) / (pts_[i + 1].x - pts_[i].x);
        break;
      }
    }
    Point n;
    n.x = slope;
    n[dim_ - 1] = -1;
    return n / norm(n);
  }

 private:
  int dim_;
  std::vector<std::array<double, 2>> nodes_;
  std::vector<Point> pts_;
  double w_;
  double lmin_, lmax_;
};

// Stage k of the planar four-corner construction in [o, o+1]^2: 4^k squares of side 4^{-k}.
// Each square is its own component.
class FourCornerPrimitive final : public Primitive {
 public:
  FourCornerPrimitive(const Point& origin, int stage) : o_(origin), k_(stage), s_(std::ldexp(1.0, -2 * stage)) {
    collect(o_, 0);
    for (std::size_t i = 0; i < squares_.size(); ++i) index_[key(squares_[i])] = static_cast<int>(i);
  }

  int dim() const override { return 2; }
  std::string name() const override { return "four_corner"; }
  int stage() const { return k_; }
  double square_side() const { return s_; }
  const Point& origin() const { return o_; }
  const std::vector<Point>& squares() const { return squares_; }
  Box square_box(int i) const {
    Box b;
    b.dim = 2;
    b.lo = squares_[i];
    b.hi = squares_[i] + Point{s_, s_, 0};
    return b;
  }

  // Index of the closed square containing x, or -1.
  int locate_square(const Point& x) const {
    Point p = o_;
    for (int j = 0; j < k_; ++j) {
      double a = std::ldexp(1.0, -2 * j), q = 0.75 * a;
      double lx = x.x - p.x, ly = x.y - p.y;
      if (lx < 0 || ly < 0 || lx > a || ly > a) return -1;
      if (lx >= q) p.x += q;
      else if (lx > 0.25 * a) return -1;
      if (ly >= q) p.y += q;
      else if (ly > 0.25 * a) return -1;
    }
    if (x.x < p.x || x.y < p.y || x.x > p.x + s_ || x.y > p.y + s_) return -1;
    return index_.at(key(p));
  }

  double distance(const Point& x) const override {
    double best = kInf;
    nearest_rec(x, o_, 0, best, nullptr);
    return best;
  }
  bool inside(const Point& x) const override {
    int i = locate_square(x);
    return i >= 0 && detail::box_interior_contains(square_box(i), x);
  }
  Point nearest(const Point& x) const override {
    double best = kInf;
    int idx = -1;
    nearest_rec(x, o_, 0, best, &idx);
    return detail::box_boundary_nearest(x, square_box(idx));
  }
  double box_distance(const Box& b) const override {
    double best = kInf;
    box_rec(b, o_, 0, best);
    return best;
  }
  double surface_measure(const Point& x, double r) const override {
    double total = 0;
    measure_rec(x, r, o_, 0, total);
    return total;
  }
  double boundary_measure() const override { return 4.0; }
  Box bounds() const override { return cluster_box(o_, 0); }
  int component_count() const override { return static_cast<int>(squares_.size()); }
  int component_of(const Point& x) const override { return locate_square(x); }

  double root_length() const override { return 1.0; }
  BoundaryCell root_cell() const override {
    if (k_ == 0) return perimeter_cell(o_);
    BoundaryCell c;
    c.kind = CellKind::Cluster;
    c.origin = o_;
    c.size = 1.0;
    return c;
  }
  std::vector<BoundaryCell> children(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return detail::split_interval(c);
    if (c.kind == CellKind::Cluster) {
      BoundaryCell l = c, r = c;
      l.kind = r.kind = CellKind::HalfCluster;
      l.half = 0;
      r.half = 1;
      return {l, r};
    }
    double a = c.size, q = 0.75 * a;
    Point base = c.origin + Point{c.half == 1 ? q : 0.0, 0, 0};
    std::vector<BoundaryCell> out;
    for (Point p : {base, base + Point{0, q, 0}}) {
      if (0.25 * a <= s_ * 1.5) {
        out.push_back(perimeter_cell(p));
      } else {
        BoundaryCell sub;
        sub.kind = CellKind::Cluster;
        sub.prim = c.prim;
        sub.origin = p;
        sub.size = 0.25 * a;
        out.push_back(sub);
      }
    }
    for (auto& o : out) o.prim = c.prim;
    return out;
  }
  Point cell_center(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return detail::square_perimeter_point(c.origin, c.size, 0.5 * (c.a0 + c.a1));
    if (c.kind == CellKind::HalfCluster && c.half == 1) return c.origin + Point{0.75 * c.size, 0, 0};
    return c.origin;
  }
  double cell_sigma(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return c.a1 - c.a0;
    if (c.kind == CellKind::Cluster) return 4.0 * c.size;
    return 2.0 * c.size;
  }
  int cell_component(const BoundaryCell& c) const override {
    if (c.kind == CellKind::Interval) return index_.at(key(c.origin));
    return -1;
  }
  Point outward_normal(const Point& y) const override {
    int i = locate_square(y);
    if (i < 0) i = 0;
    Box b = square_box(i);
    Point n;
    double best = kInf;
    for (int d = 0; d < 2; ++d) {
      if (std::abs(y[d] - b.lo[d]) < best) { best = std::abs(y[d] - b.lo[d]); n = Point{}; n[d] = -1; }
      if (std::abs(y[d] - b.hi[d]) < best) { best = std::abs(y[d] - b.hi[d]); n = Point{}; n[d] = 1; }
    }
    return n;
  }

 private:
  std::int64_t key(const Point& p) const {
    auto ix = static_cast<std::int64_t>(std::llround((p.x - o_.x) / s_));
    auto iy = static_cast<std::int64_t>(std::llround((p.y - o_.y) / s_));
    return (ix << 32) ^ iy;
  }
  BoundaryCell perimeter_cell(const Point& p) const {
    BoundaryCell c;
    c.kind = CellKind::Interval;
    c.origin = p;
    c.size = s_;
    c.a0 = 0;
    c.a1 = 4 * s_;
    return c;
  }
  Box cluster_box(const Point& p, int j) const {
    Box b;
    b.dim = 2;
    b.lo = p;
    double a = std::ldexp(1.0, -2 * j);
    b.hi = p + Point{a, a, 0};
    return b;
  }
  std::array<Point, 4> subclusters(const Point& p, int j) const {
    double q = 0.75 * std::ldexp(1.0, -2 * j);
    return {p, p + Point{0, q, 0}, p + Point{q, 0, 0}, p + Point{q, q, 0}};
  }
  void collect(const Point& p, int j) {
    if (j == k_) {
      squares_.push_back(p);
      return;
    }
    for (const Point& c : subclusters(p, j)) collect(c, j + 1);
  }
  void nearest_rec(const Point& x, const Point& p, int j, double& best, int* idx) const {
    if (j == k_) {
      double d = detail::box_boundary_distance(x, cluster_box(p, j));
      if (d < best) {
        best = d;
        if (idx) *idx = index_.at(key(p));
      }
      return;
    }
    auto subs = subclusters(p, j);
    std::array<std::pair<double, int>, 4> order;
    for (int i = 0; i < 4; ++i) order[i] = {cluster_box(subs[i], j + 1).distance(x), i};
    std::sort(order.begin(), order.end());
    for (auto [lb, i] : order) {
      if (lb >= best) break;
      nearest_rec(x, subs[i], j + 1, best, idx);
    }
  }
  void box_rec(const Box& b, const Point& p, int j, double& best) const {
    Box cb = cluster_box(p, j);
    if (cb.distance(b) >= best) return;
    if (j == k_) {
      best = std::min(best, detail::box_to_box_boundary(b, cb));
      return;
    }
    for (const Point& c : subclusters(p, j)) box_rec(b, c, j + 1, best);
  }
  void measure_rec(const Point& x, double r, const Point& p, int j, double& total) const {
    Box cb = cluster_box(p, j);
    if (cb.distance(x) >= r) return;
    if (j == k_) {
      BoxPrimitive sq(2, p, s_);
      total += sq.surface_measure(x, r);
      return;
    }
    for (const Point& c : subclusters(p, j)) measure_rec(x, r, c, j + 1, total);
  }

  Point o_;
  int k_;
  double s_;
  std::vector<Point> squares_;
  std::unordered_map<std::int64_t, int> index_;
};

}  // namespace coronalab
