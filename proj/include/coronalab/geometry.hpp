#pragma once
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "primitives.hpp"

namespace coronalab {

using json = nlohmann::json;

inline constexpr int kMaxFourCornerStage = 8;

struct ShapeSpec {
  std::string shape = "ball";  // ball | box | half_space | lipschitz_graph | four_corner | cantor_complement
  int dim = 2;
  Point center;
  double radius = 1.0;
  std::vector<std::pair<Point, double>> boxes;  // (corner, side)
  double window = 1.0;
  std::vector<std::array<double, 2>> nodes;
  int stages = 0;
  double resolution = 0.0;  // boundary sampler spacing; 0 picks a default
};

inline Point point_from_json(const json& j) {
  Point p;
  for (std::size_t i = 0; i < j.size() && i < 3; ++i) p[static_cast<int>(i)] = j.at(i).get<double>();
  return p;
}

inline json point_to_json(const Point& p, int dim) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(p[i]);
  return a;
}

inline void to_json(json& j, const ShapeSpec& s) {
  j = json{{"shape", s.shape}, {"dim", s.dim}};
  if (s.shape == "ball") {
    j["center"] = point_to_json(s.center, s.dim);
    j["radius"] = s.radius;
  } else if (s.shape == "box") {
    json arr = json::array();
    for (auto& [c, side] : s.boxes) arr.push_back({{"corner", point_to_json(c, s.dim)}, {"side", side}});
    j["boxes"] = arr;
  } else if (s.shape == "half_space") {
    j["window"] = s.window;
  } else if (s.shape == "lipschitz_graph") {
    j["window"] = s.window;
    j["nodes"] = s.nodes;
  } else {
    j["stages"] = s.stages;
  }
  if (s.resolution > 0) j["resolution"] = s.resolution;
}

inline void from_json(const json& j, ShapeSpec& s) {
  s = ShapeSpec{};
  s.shape = j.at("shape").get<std::string>();
  s.dim = j.value("dim", 2);
  if (j.contains("center")) s.center = point_from_json(j.at("center"));
  s.radius = j.value("radius", 1.0);
  if (j.contains("boxes"))
    for (auto& b : j.at("boxes")) s.boxes.push_back({point_from_json(b.at("corner")), b.at("side").get<double>()});
  s.window = j.value("window", 1.0);
  if (j.contains("nodes")) s.nodes = j.at("nodes").get<std::vector<std::array<double, 2>>>();
  s.stages = j.value("stages", 0);
  s.resolution = j.value("resolution", 0.0);
}

struct BoundarySample {
  Point p;
  double weight = 0;
  int component = 0;
};

enum class DomainMode { Union, Complement };

// An open set given as a disjoint union of primitive interiors, or as the
// complement of a closed four-corner stage.
class Domain {
 public:
  Domain(int dim, DomainMode mode, std::vector<std::shared_ptr<const Primitive>> prims, ShapeSpec spec)
      : dim_(dim), mode_(mode), prims_(std::move(prims)), spec_(std::move(spec)) {
    int off = 0;
    for (auto& p : prims_) {
      offsets_.push_back(off);
      off += p->component_count();
    }
    components_ = mode_ == DomainMode::Complement ? 1 : off;
    bounds_ = Box::empty(dim_);
    for (auto& p : prims_) bounds_.expand(p->bounds());
    Point c = bounds_.center();
    far_center_ = c;
    far_radius_ = 2.0 * bounds_.max_distance(c);
  }

  int dim() const { return dim_; }
  DomainMode mode() const { return mode_; }
  const ShapeSpec& spec() const { return spec_; }
  const std::vector<std::shared_ptr<const Primitive>>& primitives() const { return prims_; }
  int component_count() const { return components_; }
  Box bounds() const { return bounds_; }
  double diam_boundary() const { return bounds_.diameter(); }
  bool bounded() const {
    if (mode_ == DomainMode::Complement) return false;
    for (auto& p : prims_)
      if (!p->bounded_interior()) return false;
    return true;
  }
  // Circle outside of which an exterior walk may jump straight back (complement mode).
  const Point& far_center() const { return far_center_; }
  double far_radius() const { return far_radius_; }

  double distance(const Point& x) const {
    double d = kInf;
    for (auto& p : prims_) d = std::min(d, p->distance(x));
    return d;
  }
  bool contains(const Point& x) const {
    if (mode_ == DomainMode::Complement) {
      if (distance(x) == 0) return false;
      for (auto& p : prims_)
        if (p->inside(x)) return false;
      return true;
    }
    for (auto& p : prims_)
      if (p->inside(x)) return true;
    return false;
  }
  Point nearest_boundary_point(const Point& x) const {
    double best = kInf;
    Point q;
    for (auto& p : prims_) {
      double d = p->distance(x);
      if (d < best) {
        best = d;
        q = p->nearest(x);
      }
    }
    return q;
  }
  double box_distance(const Box& b) const {
    double d = kInf;
    for (auto& p : prims_) d = std::min(d, p->box_distance(b));
    return d;
  }
  double surface_ball_measure(const Point& x, double r) const {
    double s = 0;
    for (auto& p : prims_) s += p->surface_measure(x, r);
    return s;
  }
  double boundary_measure() const {
    double s = 0;
    for (auto& p : prims_) s += p->boundary_measure();
    return s;
  }
  // Component label of an interior point, or -1 outside the domain.
  int component_of(const Point& x) const {
    if (!contains(x)) return -1;
    if (mode_ == DomainMode::Complement) return 0;
    for (std::size_t i = 0; i < prims_.size(); ++i)
      if (prims_[i]->inside(x)) return offsets_[i] + prims_[i]->component_of(x);
    return -1;
  }
  // Outward normal of the domain at a boundary point.
  Point outward_normal(const Point& y) const {
    double best = kInf;
    std::size_t k = 0;
    for (std::size_t i = 0; i < prims_.size(); ++i) {
      double d = prims_[i]->distance(y);
      if (d < best) {
        best = d;
        k = i;
      }
    }
    Point n = prims_[k]->outward_normal(y);
    return mode_ == DomainMode::Complement ? -n : n;
  }

  double root_length() const {
    double l = prims_.front()->root_length();
    return prims_.size() == 1 ? l : 2 * l;
  }
  BoundaryCell root_cell() const {
    if (prims_.size() == 1) {
      BoundaryCell c = prims_.front()->root_cell();
      c.prim = 0;
      return c;
    }
    BoundaryCell c;
    c.kind = CellKind::Group;
    return c;
  }
  std::vector<BoundaryCell> children(const BoundaryCell& c) const {
    if (c.kind == CellKind::Group) {
      std::vector<BoundaryCell> out;
      for (std::size_t i = 0; i < prims_.size(); ++i) {
        BoundaryCell r = prims_[i]->root_cell();
        r.prim = static_cast<int>(i);
        out.push_back(r);
      }
      return out;
    }
    return prims_[c.prim]->children(c);
  }
  Point cell_center(const BoundaryCell& c) const {
    if (c.kind != CellKind::Group) return prims_[c.prim]->cell_center(c);
    Point mid = bounds_.center();
    Point best;
    double bd = kInf;
    for (auto& p : prims_) {
      Point q = p->cell_center(p->root_cell());
      if (dist(q, mid) < bd) {
        bd = dist(q, mid);
        best = q;
      }
    }
    return best;
  }
  double cell_sigma(const BoundaryCell& c) const {
    if (c.kind == CellKind::Group) return boundary_measure();
    return prims_[c.prim]->cell_sigma(c);
  }
  int cell_component(const BoundaryCell& c) const {
    if (c.kind == CellKind::Group) return -1;
    if (mode_ == DomainMode::Complement) return 0;
    int local = prims_[c.prim]->cell_component(c);
    return local < 0 ? -1 : offsets_[c.prim] + local;
  }

  // Default sampler spacing: 2^-12 of the root length in d=2, 2^-8 in d=3.
  double resolution() const {
    if (spec_.resolution > 0) return spec_.resolution;
    return root_length() * std::ldexp(1.0, dim_ == 2 ? -12 : -8);
  }

  // Number of halvings of the root length needed to reach spacing h.
  int level_for(double h) const {
    int L = 0;
    while (std::ldexp(root_length(), -L) > h * (1 + 1e-12)) ++L;
    return L;
  }

  std::vector<BoundarySample> sample_level(int L) const {
    std::vector<BoundarySample> out;
    std::vector<std::pair<BoundaryCell, int>> stack{{root_cell(), 0}};
    while (!stack.empty()) {
      auto [c, g] = stack.back();
      stack.pop_back();
      if (g == L) {
        out.push_back({cell_center(c), cell_sigma(c), cell_component(c)});
        continue;
      }
      auto ch = children(c);
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back({*it, g + 1});
    }
    return out;
  }

  std::vector<BoundarySample> sample_boundary(double h = 0) const {
    return sample_level(level_for(h > 0 ? h : resolution()));
  }

 private:
  int dim_;
  DomainMode mode_;
  std::vector<std::shared_ptr<const Primitive>> prims_;
  ShapeSpec spec_;
  std::vector<int> offsets_;
  int components_ = 1;
  Box bounds_;
  Point far_center_;
  double far_radius_ = 0;
};

inline Domain make_domain(const ShapeSpec& spec) {
  const int d = spec.dim;
  if (d != 2 && d != 3) throw Error(ErrorCode::InvalidSpec, "dimension must be 2 or 3");
  std::vector<std::shared_ptr<const Primitive>> prims;
  DomainMode mode = DomainMode::Union;
  if (spec.shape == "ball") {
    if (!(spec.radius > 0)) throw Error(ErrorCode::InvalidSpec, "radius must be positive");
    prims.push_back(std::make_shared<BallPrimitive>(d, spec.center, spec.radius));
  } else if (spec.shape == "box") {
    if (spec.boxes.empty()) throw Error(ErrorCode::InvalidSpec, "box shape needs at least one box");
    for (auto& [c, s] : spec.boxes) {
      if (!(s > 0)) throw Error(ErrorCode::InvalidSpec, "box side must be positive");
      prims.push_back(std::make_shared<BoxPrimitive>(d, c, s));
    }
  } else if (spec.shape == "half_space") {
    if (!(spec.window > 0)) throw Error(ErrorCode::InvalidSpec, "window must be positive");
    prims.push_back(std::make_shared<HalfSpacePrimitive>(d, spec.window));
  } else if (spec.shape == "lipschitz_graph") {
    if (!(spec.window > 0)) throw Error(ErrorCode::InvalidSpec, "window must be positive");
    if (spec.nodes.size() < 2) throw Error(ErrorCode::InvalidSpec, "graph needs at least two nodes");
    for (std::size_t i = 0; i + 1 < spec.nodes.size(); ++i)
      if (!(spec.nodes[i + 1][0] > spec.nodes[i][0])) throw Error(ErrorCode::InvalidSpec, "graph nodes must increase in x");
    prims.push_back(std::make_shared<LipschitzGraphPrimitive>(d, spec.nodes, spec.window));
  } else if (spec.shape == "four_corner" || spec.shape == "cantor_complement") {
    if (d != 2) throw Error(ErrorCode::InvalidSpec, "four-corner shapes are planar");
    if (spec.stages < 0) throw Error(ErrorCode::InvalidSpec, "stage count must be nonnegative");
    if (spec.stages > kMaxFourCornerStage) throw Error(ErrorCode::InvalidSpec, "stage count exceeds hard cap 8");
    if (spec.shape == "four_corner") {
      for (int k = 0; k <= spec.stages; ++k)
        prims.push_back(std::make_shared<FourCornerPrimitive>(Point{2.0 * k, 0, 0}, k));
    } else {
      mode = DomainMode::Complement;
      prims.push_back(std::make_shared<FourCornerPrimitive>(Point{}, spec.stages));
    }
  } else {
    throw Error(ErrorCode::InvalidSpec, "unknown shape '" + spec.shape + "'");
  }
  if (!(spec.resolution >= 0)) throw Error(ErrorCode::InvalidSpec, "resolution must be nonnegative");
  for (std::size_t i = 0; i < prims.size(); ++i) {
    if (std::abs(prims[i]->root_length() - prims[0]->root_length()) > 1e-12 * prims[0]->root_length())
      throw Error(ErrorCode::InvalidSpec, "union members must share one root length");
    for (std::size_t j = i + 1; j < prims.size(); ++j)
      if (prims[i]->bounds().intersects(prims[j]->bounds()))
        throw Error(ErrorCode::InvalidSpec, "union members overlap");
  }
  return Domain(d, mode, std::move(prims), spec);
}

inline double boundary_distance(const Domain& domain, const Point& x) { return domain.distance(x); }

inline double surface_ball_measure(const Domain& domain, const Point& x, double r) {
  return domain.surface_ball_measure(x, r);
}

struct AdrEntry {
  Point center;
  double radius;
  double ratio;
};

struct AdrReport {
  std::vector<AdrEntry> ratios;
  double c_lower = 0;
  double C_upper = 0;
  int n = 1;
};

inline AdrReport adr_report(const Domain& domain, const std::vector<Point>& centers, const std::vector<double>& radii) {
  if (centers.empty() || radii.empty()) throw Error(ErrorCode::EmptyPlan, "adr_report needs centers and radii");
  AdrReport rep;
  rep.n = domain.dim() - 1;
  rep.c_lower = kInf;
  rep.C_upper = 0;
  for (const Point& x : centers) {
    for (double r : radii) {
      double ratio = domain.surface_ball_measure(x, r) / std::pow(r, rep.n);
      rep.ratios.push_back({x, r, ratio});
      rep.c_lower = std::min(rep.c_lower, ratio);
      rep.C_upper = std::max(rep.C_upper, ratio);
    }
  }
  return rep;
}

namespace detail {

// Unit directions used by local pattern searches.
inline std::vector<Point> search_directions(int dim) {
  std::vector<Point> dirs;
  if (dim == 2) {
    for (int i = 0; i < 64; ++i) {
      double t = 2 * kPi * i / 64;
      dirs.push_back({std::cos(t), std::sin(t), 0});
    }
    return dirs;
  }
  const int n = 98;
  const double golden = kPi * (3 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1 - 2 * (i + 0.5) / n;
    double r = std::sqrt(1 - z * z);
    dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
  }
  return dirs;
}

// Deterministic near-uniform points in the unit ball (Fibonacci shells).
inline std::vector<Point> unit_ball_net(int dim, int count) {
  std::vector<Point> pts{{0, 0, 0}};
  const double golden = kPi * (3 - std::sqrt(5.0));
  for (int i = 1; i < count; ++i) {
    double u = (i + 0.5) / count;
    if (dim == 2) {
      double r = std::sqrt(u);
      pts.push_back({r * std::cos(golden * i), r * std::sin(golden * i), 0});
    } else {
      double r = std::cbrt(u);
      double z = 1 - 2 * std::fmod(i * 0.6180339887498949, 1.0);
      double s = std::sqrt(std::max(0.0, 1 - z * z));
      pts.push_back({r * s * std::cos(golden * i), r * s * std::sin(golden * i), r * z});
    }
  }
  return pts;
}

}  // namespace detail

// Largest interior ball radius available at X within B(x, r), or -1 outside the domain.
inline double inscribed_radius(const Domain& domain, const Point& x, double r, const Point& X) {
  if (!domain.contains(X)) return -1;
  return std::min(domain.distance(X), r - dist(X, x));
}

inline std::optional<Point> corkscrew_point(const Domain& domain, const Point& x, double r, double c) {
  if (!(c > 0 && c < 1)) throw Error(ErrorCode::PreconditionViolated, "corkscrew constant must lie in (0,1)");
  const int d = domain.dim();
  const double g = c * r / 4;
  const int M = static_cast<int>(std::ceil(r / g));
  double best = -1;
  Point bestX;
  int idx[3] = {0, 0, 0};
  int hi[3] = {M, M, d == 3 ? M : 0};
  int lo[3] = {-M, -M, d == 3 ? -M : 0};
  for (idx[0] = lo[0]; idx[0] <= hi[0]; ++idx[0])
    for (idx[1] = lo[1]; idx[1] <= hi[1]; ++idx[1])
      for (idx[2] = lo[2]; idx[2] <= hi[2]; ++idx[2]) {
        Point X = x + Point{idx[0] * g, idx[1] * g, idx[2] * g};
        if (dist(X, x) >= r) continue;
        double rho = inscribed_radius(domain, x, r, X);
        if (rho > best) {
          best = rho;
          bestX = X;
        }
      }
  if (best < c * r) return std::nullopt;
  auto dirs = detail::search_directions(d);
  double step = g / 2;
  while (step > 1e-10 * r) {
    bool moved = false;
    for (const Point& u : dirs) {
      Point Y = bestX + u * step;
      double rho = inscribed_radius(domain, x, r, Y);
      if (rho > best) {
        best = rho;
        bestX = Y;
        moved = true;
      }
    }
    if (!moved) step *= 0.5;
  }
  return bestX;
}

// Checks B(X, c r) subset of B(x, r) and of the domain on a net of `probes` points.
inline bool verify_corkscrew(const Domain& domain, const Point& x, double r, const Point& X, double c,
                             int probes = 1000) {
  for (const Point& u : detail::unit_ball_net(domain.dim(), probes)) {
    Point p = X + u * (c * r);
    if (!domain.contains(p) || dist(p, x) > r) return false;
  }
  return true;
}

inline void write_boundary_csv(std::ostream& os, const std::vector<BoundarySample>& samples, int dim) {
  os << (dim == 2 ? "x,y" : "x,y,z") << ",weight,component_id\n";
  os.precision(17);
  for (auto& s : samples) {
    for (int i = 0; i < dim; ++i) os << s.p[i] << ",";
    os << s.weight << "," << s.component << "\n";
  }
}

}  // namespace coronalab
