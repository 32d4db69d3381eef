#pragma once
#include <complex>
#include <memory>
#include <unordered_map>

#include "oracles.hpp"
#include "rng.hpp"

namespace coronalab {

inline constexpr std::uint64_t kMaxWalkSteps = 1000000;

struct McParams {
  std::uint64_t paths = 100000;
  std::uint64_t seed = 1;
  double eps_stop = 0;  // 0 selects 1e-4 * diam of the boundary
};

inline double effective_eps(const Domain& d, const McParams& p) {
  return p.eps_stop > 0 ? p.eps_stop : 1e-4 * d.diam_boundary();
}

struct Exit {
  Point y;
  int component = -1;
  bool lost = false;
  std::uint32_t steps = 0;
};

namespace detail {

// Exit point on the circle |y - c| = rho of planar Brownian motion started outside it.
// Inversion fixes the circle and preserves planar harmonic measure, so this is the
// interior exit law from the inverted point, sampled by a disk automorphism of a uniform angle.
inline Point far_field_return(const Point& x, const Point& c, double rho, CounterRng& rng) {
  Point v = x - c;
  double n2 = dot(v, v);
  std::complex<double> a(v.x * rho / n2, v.y * rho / n2);
  std::complex<double> w = std::polar(1.0, 2 * kPi * rng.uniform());
  std::complex<double> y = (w + a) / (1.0 + std::conj(a) * w);
  return c + Point{rho * y.real(), rho * y.imag(), 0};
}

}  // namespace detail

// One walk on spheres from x, stopped in the eps shell and projected onto the boundary.
inline Exit walk_on_spheres(const Domain& D, Point x, double eps, CounterRng& rng) {
  Exit e;
  const int dim = D.dim();
  const bool exterior = D.mode() == DomainMode::Complement;
  const Point& fc = D.far_center();
  const double fr = D.far_radius();
  for (std::uint64_t step = 0; step < kMaxWalkSteps; ++step) {
    if (exterior && dist(x, fc) > fr) x = detail::far_field_return(x, fc, fr, rng);
    double r = D.distance(x);
    if (r < eps) {
      e.y = D.nearest_boundary_point(x);
      e.component = D.component_of(x);
      e.steps = static_cast<std::uint32_t>(step);
      return e;
    }
    x = x + rng.direction(dim) * r;
  }
  e.lost = true;
  e.steps = static_cast<std::uint32_t>(kMaxWalkSteps);
  return e;
}

inline void check_pole(const Domain& D, const Point& X, double eps) {
  if (!D.contains(X) || D.distance(X) == 0) throw Error(ErrorCode::PoleOnBoundary, "pole is not in the open set");
  if (!(eps < D.distance(X) / 4)) throw Error(ErrorCode::PreconditionViolated, "eps_stop must be below delta(X)/4");
}

// Exits of paths 0..paths-1; path i draws from stream i of the seed.
inline std::vector<Exit> sample_exits(const Domain& D, const Point& X, const McParams& p) {
  const double eps = effective_eps(D, p);
  check_pole(D, X, eps);
  std::vector<Exit> out(p.paths);
  parallel_for(p.paths, [&](std::size_t i) {
    CounterRng rng(p.seed, i);
    out[i] = walk_on_spheres(D, X, eps, rng);
  });
  return out;
}

// A Borel subset of the boundary, given by membership of an exit (point, component).
struct BoundaryTarget {
  std::string id;
  std::function<bool(const Point&, int)> contains;
  std::optional<std::pair<Point, double>> surface_ball;  // set when the target is Delta(x, r)
  bool known_empty = false;
};

inline BoundaryTarget surface_ball_target(std::string id, const Point& x, double r) {
  BoundaryTarget t{std::move(id), [x, r](const Point& y, int) { return dist(y, x) < r; }, std::make_pair(x, r)};
  return t;
}
inline BoundaryTarget halfspace_target(std::string id, const Point& n, double t) {
  return {std::move(id), [n, t](const Point& y, int) { return dot(y, n) > t; }, std::nullopt};
}
inline BoundaryTarget component_target(std::string id, int comp) {
  return {std::move(id), [comp](const Point&, int c) { return c == comp; }, std::nullopt};
}
inline BoundaryTarget whole_boundary_target(std::string id = "boundary") {
  return {std::move(id), [](const Point&, int) { return true; }, std::nullopt};
}
inline BoundaryTarget empty_target(std::string id = "empty") {
  BoundaryTarget t{std::move(id), [](const Point&, int) { return false; }, std::nullopt};
  t.known_empty = true;
  return t;
}
// Union of grid cubes; exits are assigned to the leaf of their nearest sample.
inline BoundaryTarget cube_union_target(std::shared_ptr<const DyadicGrid> g, std::vector<int> cubes, std::string id) {
  std::vector<char> leaf_in(g->leaf_count(), 0);
  for (int q : cubes)
    for (int l = g->cube(q).leaf_begin; l < g->cube(q).leaf_end; ++l) leaf_in[l] = 1;
  BoundaryTarget t{std::move(id),
                   [g, leaf_in](const Point& y, int) {
                     int l = g->locate_leaf(y);
                     return l >= 0 && leaf_in[l];
                   },
                   std::nullopt};
  t.known_empty = cubes.empty();
  return t;
}

struct TargetMass {
  std::string id;
  double mass = 0;
  double ci = 0;
  std::uint64_t hits = 0;
};

struct MeasureEstimate {
  Point pole;
  int dim = 2;
  std::vector<TargetMass> targets;
  std::uint64_t paths = 0;
  std::uint64_t seed = 0;
  double eps_stop = 0;
  std::uint64_t lost = 0;
  double lost_mass = 0;
  double mean_steps = 0;
};

inline double binomial_ci(std::uint64_t hits, std::uint64_t n) {
  if (n == 0) return 0;
  double p = static_cast<double>(hits) / n;
  return 1.96 * std::sqrt(p * (1 - p) / n);
}

inline MeasureEstimate harmonic_measure(const Domain& D, const Point& X, const std::vector<BoundaryTarget>& targets,
                                        const McParams& p) {
  auto exits = sample_exits(D, X, p);
  MeasureEstimate m;
  m.pole = X;
  m.dim = D.dim();
  m.paths = p.paths;
  m.seed = p.seed;
  m.eps_stop = effective_eps(D, p);
  std::vector<std::uint64_t> hits(targets.size(), 0);
  double steps = 0;
  for (const auto& e : exits) {
    steps += e.steps;
    if (e.lost) {
      ++m.lost;
      continue;
    }
    for (std::size_t t = 0; t < targets.size(); ++t)
      if (targets[t].contains(e.y, e.component)) ++hits[t];
  }
  for (std::size_t t = 0; t < targets.size(); ++t)
    m.targets.push_back({targets[t].id, static_cast<double>(hits[t]) / p.paths, binomial_ci(hits[t], p.paths), hits[t]});
  m.lost_mass = static_cast<double>(m.lost) / p.paths;
  m.mean_steps = steps / std::max<std::uint64_t>(1, p.paths);
  return m;
}

// Monte Carlo omega^X on the grid leaves. Exits off the sampled boundary go to `outside`.
inline DiscreteMeasure harmonic_measure_on_grid(const DyadicGrid& g, const Point& X, const McParams& p) {
  auto exits = sample_exits(g.domain, X, p);
  std::vector<std::uint64_t> hits(g.leaf_count(), 0);
  std::uint64_t lost = 0, outside = 0;
  for (const auto& e : exits) {
    if (e.lost) {
      ++lost;
      continue;
    }
    int l = g.locate_leaf(e.y);
    if (l < 0)
      ++outside;
    else
      ++hits[l];
  }
  DiscreteMeasure m;
  m.pole = X;
  m.paths = p.paths;
  for (auto h : hits) {
    m.leaf_mass.push_back(static_cast<double>(h) / p.paths);
    m.leaf_ci.push_back(binomial_ci(h, p.paths));
  }
  m.lost = static_cast<double>(lost) / p.paths;
  m.outside = static_cast<double>(outside) / p.paths;
  return m;
}

struct GreenSample {
  Point X, Y;
  double value = 0;  // clamped at 0
  double raw = 0;
  double ci = 0;
  std::uint64_t lost = 0;
};

// G(X, Y) = Phi(X - Y) - E[Phi(exit - Y)], walks started at X.
inline GreenSample green_value(const Domain& D, const Point& X, const Point& Y, const McParams& p) {
  if (D.mode() == DomainMode::Complement)
    throw Error(ErrorCode::InvalidSpec, "Green function is not available on exterior domains");
  if (dist(X, Y) <= 1e-14 * std::max(1.0, D.diam_boundary()))
    throw Error(ErrorCode::CoincidentPoints, "X and Y coincide");
  if (!D.contains(Y)) throw Error(ErrorCode::PoleOnBoundary, "Y is not in the open set");
  auto exits = sample_exits(D, X, p);
  const int dim = D.dim();
  const std::size_t chunk = 4096;
  const std::size_t chunks = (exits.size() + chunk - 1) / chunk;
  std::vector<double> s1(chunks, 0), s2(chunks, 0);
  std::vector<std::uint64_t> cnt(chunks, 0);
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t i = c * chunk; i < std::min(exits.size(), (c + 1) * chunk); ++i) {
      if (exits[i].lost) continue;
      double f = oracle::fundamental(exits[i].y - Y, dim);
      s1[c] += f;
      s2[c] += f * f;
      ++cnt[c];
    }
  double S1 = 0, S2 = 0;
  std::uint64_t n = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    S1 += s1[c];
    S2 += s2[c];
    n += cnt[c];
  }
  GreenSample g;
  g.X = X;
  g.Y = Y;
  g.lost = p.paths - n;
  double mean = n ? S1 / n : 0;
  double var = n > 1 ? std::max(0.0, (S2 - n * mean * mean) / (n - 1)) : 0;
  g.raw = oracle::fundamental(X - Y, dim) - mean;
  g.value = std::max(0.0, g.raw);
  g.ci = n ? 1.96 * std::sqrt(var / n) : kInf;
  return g;
}

struct ValueEstimate {
  double value = 0;
  double ci = 0;
};

struct GradientEstimate {
  Point grad;
  double err = 0;  // norm of the per-component 95% half-widths
};

// A bounded solution u with 0 <= u <= 1 and sup bound 1, with value and gradient samplers.
struct SolutionField {
  std::function<ValueEstimate(const Point&)> value;
  std::function<GradientEstimate(const Point&)> gradient;
  std::string description;
  bool exact = false;
  bool empty_target = false;
};

inline SolutionField analytic_field(std::string description, std::function<double(const Point&)> u,
                                    std::function<Point(const Point&)> grad) {
  SolutionField f;
  f.description = std::move(description);
  f.exact = true;
  f.value = [u](const Point& X) { return ValueEstimate{u(X), 0.0}; };
  f.gradient = [grad](const Point& X) { return GradientEstimate{grad(X), 0.0}; };
  return f;
}

inline SolutionField zero_field(std::string description) {
  auto f = analytic_field(std::move(description), [](const Point&) { return 0.0; }, [](const Point&) { return Point{}; });
  f.empty_target = true;
  return f;
}

// u(X) = omega^X(E) by walk on spheres. Values use common random numbers across X;
// gradients use the sphere identity grad u(X) = (d/r) avg_{|nu|=1} u(X + r nu) nu with
// r = delta(X)/2 and antithetic pairs (nu, -nu), one walk per sphere point.
inline SolutionField boundary_solution(const Domain& domain, const BoundaryTarget& E, const McParams& p,
                                       std::uint64_t gradient_pairs = 0) {
  if (E.known_empty) return zero_field("empty target " + E.id);
  auto D = std::make_shared<const Domain>(domain);
  SolutionField f;
  f.description = "harmonic measure of " + E.id;
  f.value = [D, E, p](const Point& X) {
    auto m = harmonic_measure(*D, X, {E}, p);
    return ValueEstimate{m.targets[0].mass, m.targets[0].ci};
  };
  const std::uint64_t pairs = gradient_pairs ? gradient_pairs : std::max<std::uint64_t>(1, p.paths / 2);
  f.gradient = [D, E, p, pairs](const Point& X) {
    const int dim = D->dim();
    const double delta = D->distance(X);
    const double r = delta / 2;
    const double eps = std::min(effective_eps(*D, p), delta / 8);
    check_pole(*D, X, eps);
    const std::uint64_t seed = hash_point(X, p.seed);
    std::vector<Point> contrib(pairs);
    parallel_for(pairs, [&](std::size_t i) {
      CounterRng rng(seed, i);
      Point nu = rng.direction(dim);
      Exit a = walk_on_spheres(*D, X + nu * r, eps, rng);
      Exit b = walk_on_spheres(*D, X - nu * r, eps, rng);
      double ua = (!a.lost && E.contains(a.y, a.component)) ? 1.0 : 0.0;
      double ub = (!b.lost && E.contains(b.y, b.component)) ? 1.0 : 0.0;
      contrib[i] = nu * (dim / r * 0.5 * (ua - ub));
    });
    Point mean, sq;
    for (const auto& c : contrib) {
      mean = mean + c;
      sq = sq + Point{c.x * c.x, c.y * c.y, c.z * c.z};
    }
    const double n = static_cast<double>(pairs);
    mean = mean / n;
    double e2 = 0;
    for (int a = 0; a < dim; ++a) {
      double var = n > 1 ? std::max(0.0, (sq[a] - n * mean[a] * mean[a]) / (n - 1)) : 0;
      e2 += 1.96 * 1.96 * var / n;
    }
    return GradientEstimate{mean, std::sqrt(e2)};
  };
  return f;
}

// Exact fields for surface-ball targets on disks/balls/half-spaces and for the
// bottom side of a four-corner square.
inline SolutionField exact_arc_field(const Domain& domain, double a, double b) {
  auto* ball = oracle::as_ball(domain);
  if (!ball || domain.dim() != 2) throw Error(ErrorCode::OracleFailure, "arc field needs a disk");
  Point c = ball->center();
  double R = ball->radius();
  return analytic_field(
      "disk arc", [=](const Point& X) { return oracle::disk_arc(c, R, X, a, b); },
      [=](const Point& X) { return oracle::disk_arc_gradient(c, R, X, a, b); });
}

inline SolutionField exact_interval_field(double a, double b) {
  return analytic_field(
      "half-plane interval", [=](const Point& X) { return oracle::halfplane_interval(X, a, b); },
      [=](const Point& X) { return oracle::halfplane_interval_gradient(X, a, b); });
}

// Square containing X in a four-corner union, as (corner, side).
inline std::optional<std::pair<Point, double>> four_corner_square(const Domain& domain, const Point& X) {
  for (const auto& prim : domain.primitives()) {
    auto* fc = dynamic_cast<const FourCornerPrimitive*>(prim.get());
    if (!fc) continue;
    int i = fc->locate_square(X);
    if (i >= 0) return std::make_pair(fc->squares()[i], fc->square_side());
  }
  return std::nullopt;
}

// u = harmonic measure of the union of the bottom sides of all squares of a four-corner union.
inline SolutionField four_corner_bottom_field(const Domain& domain) {
  auto D = std::make_shared<const Domain>(domain);
  auto sq = std::make_shared<oracle::SquareBottomField>();
  return analytic_field(
      "four-corner bottom sides",
      [D, sq](const Point& X) {
        auto s = four_corner_square(*D, X);
        return s ? sq->value(s->first, s->second, X) : 0.0;
      },
      [D, sq](const Point& X) {
        auto s = four_corner_square(*D, X);
        return s ? sq->gradient(s->first, s->second, X) : Point{};
      });
}

inline BoundaryTarget four_corner_bottom_target(const Domain& domain) {
  auto D = std::make_shared<const Domain>(domain);
  return {"bottom sides",
          [D](const Point& y, int) {
            auto s = four_corner_square(*D, y);
            return s && std::abs(y.y - s->first.y) <= 1e-12 * std::max(1.0, s->second);
          },
          std::nullopt};
}

struct EnergyEstimate {
  double value = 0;
  double error = 0;  // |I_h - I_2h|
  double coarse = 0;
  double h = 0;
  std::size_t cells = 0;
};

namespace detail {

struct LatticeKey {
  std::int64_t i, j, k;
  bool operator==(const LatticeKey&) const = default;
};
struct LatticeKeyHash {
  std::size_t operator()(const LatticeKey& k) const {
    return mix64(mix64(static_cast<std::uint64_t>(k.i)) ^ static_cast<std::uint64_t>(k.j) * 0x9E3779B97F4A7C15ULL ^
                 static_cast<std::uint64_t>(k.k) * 0xC2B2AE3D27D4EB4FULL);
  }
};

// Midpoint rule over cells of side h centered at P + h (idx + 1/2); the gradient at a cell
// center is the central difference of u at the face centers (half-integer lattice, cached).
inline double lattice_energy(const Domain& D, const SolutionField& u, const Point& P, double s, double h,
                             std::size_t* cells) {
  const int dim = D.dim();
  const std::int64_t M = static_cast<std::int64_t>(std::ceil(s / h));
  std::unordered_map<LatticeKey, double, LatticeKeyHash> cache;
  // Face centers live on a lattice of spacing h/2 anchored at P.
  auto uval = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
    LatticeKey key{i, j, k};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    double v = u.value(P + Point{i * h / 2, j * h / 2, k * h / 2}).value;
    cache.emplace(key, v);
    return v;
  };
  double acc = 0;
  std::size_t n = 0;
  for (std::int64_t i = -M; i < M; ++i)
    for (std::int64_t j = -M; j < M; ++j)
      for (std::int64_t k = (dim == 3 ? -M : 0); k < (dim == 3 ? M : 1); ++k) {
        Point c = P + Point{(i + 0.5) * h, (j + 0.5) * h, dim == 3 ? (k + 0.5) * h : 0.0};
        if (dist(c, P) >= s) continue;
        std::int64_t I = 2 * i + 1, J = 2 * j + 1, K = dim == 3 ? 2 * k + 1 : 0;
        double gx = (uval(I + 1, J, K) - uval(I - 1, J, K)) / h;
        double gy = (uval(I, J + 1, K) - uval(I, J - 1, K)) / h;
        double gz = dim == 3 ? (uval(I, J, K + 1) - uval(I, J, K - 1)) / h : 0.0;
        acc += (gx * gx + gy * gy + gz * gz) * D.distance(c);
        ++n;
      }
  if (cells) *cells = n;
  return acc * std::pow(h, dim);
}

}  // namespace detail

// Integral of |grad u|^2 delta over B(P, s), with a two-level (h, 2h) error estimate.
inline EnergyEstimate gradient_energy(const Domain& D, const SolutionField& u, const Point& P, double s, double h) {
  const double margin = D.distance(P) - s;
  if (!(margin > 0) || !D.contains(P)) throw Error(ErrorCode::PreconditionViolated, "ball is not inside the domain");
  if (!(h > 0) || h > margin / 8) throw Error(ErrorCode::LatticeTooCoarse, "lattice spacing exceeds dist(V, boundary)/8");
  EnergyEstimate e;
  e.h = h;
  e.value = detail::lattice_energy(D, u, P, s, h, &e.cells);
  e.coarse = detail::lattice_energy(D, u, P, s, 2 * h, nullptr);
  e.error = std::abs(e.value - e.coarse);
  return e;
}

// Pluggable omega and Green estimators.
struct Estimators {
  std::function<ValueEstimate(const Point&, const BoundaryTarget&)> omega;
  std::function<ValueEstimate(const Point&, const Point&)> green;
  bool exact = false;
};

inline Estimators monte_carlo_estimators(const Domain& domain, const McParams& p) {
  auto D = std::make_shared<const Domain>(domain);
  Estimators e;
  e.omega = [D, p](const Point& X, const BoundaryTarget& t) {
    auto m = harmonic_measure(*D, X, {t}, p);
    return ValueEstimate{m.targets[0].mass, m.targets[0].ci};
  };
  e.green = [D, p](const Point& X, const Point& Y) {
    auto g = green_value(*D, X, Y, p);
    return ValueEstimate{g.value, g.ci};
  };
  return e;
}

namespace oracle {

// Harmonic measure of the flat disk {|y - x| < r, y_3 = 0} from X in the upper half-space.
inline double halfspace_disk(const Point& x, double r, const Point& X) {
  const double z = X.z;
  const double rho = std::hypot(X.x - x.x, X.y - x.y);
  auto integrand = [&](double t) {
    double A = z * z + rho * rho + t * t, B = 2 * rho * t;
    double inner;
    if (B < 1e-14 * A) {
      inner = 2 * kPi / std::pow(A, 1.5);
    } else {
      double k = std::sqrt(2 * B / (A + B));
      inner = 4 * boost::math::ellint_2(k) / ((A - B) * std::sqrt(A + B));
    }
    return inner * t;
  };
  double err = 0;
  double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, r, 15, 1e-13, &err);
  return z / (2 * kPi) * I;
}

// Exact omega^X(Delta(x, r)) on disks, balls and half-spaces.
inline double surface_ball_omega(const Domain& d, const Point& x, double r, const Point& X) {
  if (auto* b = as_ball(d)) {
    const double R = b->radius();
    if (r >= 2 * R) return 1.0;
    const double half = 2 * std::asin(r / (2 * R));
    if (d.dim() == 2) {
      double phi = std::atan2(x.y - b->center().y, x.x - b->center().x);
      return disk_arc(b->center(), R, X, phi - half, phi + half);
    }
    return ball_cap(b->center(), R, X, x - b->center(), half);
  }
  if (is_half_space(d)) {
    if (d.dim() == 2) return halfplane_interval(X, x.x - r, x.x + r);
    return halfspace_disk(x, r, X);
  }
  throw Error(ErrorCode::OracleFailure, "no closed-form harmonic measure for this domain");
}

}  // namespace oracle

inline Estimators exact_estimators(const Domain& domain) {
  if (!oracle::has_exact_omega(domain)) throw Error(ErrorCode::OracleFailure, "no closed-form oracle for this domain");
  auto D = std::make_shared<const Domain>(domain);
  Estimators e;
  e.exact = true;
  e.omega = [D](const Point& X, const BoundaryTarget& t) {
    if (!t.surface_ball) throw Error(ErrorCode::OracleFailure, "exact omega needs a surface-ball target");
    return ValueEstimate{oracle::surface_ball_omega(*D, t.surface_ball->first, t.surface_ball->second, X), 0.0};
  };
  e.green = [D](const Point& X, const Point& Y) { return ValueEstimate{oracle::exact_green(*D, X, Y), 0.0}; };
  return e;
}

struct DiagnosticParams {
  std::string mode;
  // bourgain, holder_decay: surface ball Delta(x, r)
  Point x;
  double r = 0;
  double C = 2;   // bourgain Y-net lies in B(x, r/C)
  int net = 16;   // bourgain net size
  int levels = 6; // holder_decay radii r 2^-1 .. r 2^-levels
  // cfms, green_symmetry
  std::vector<std::pair<Point, Point>> pairs;
};

struct DiagnosticReport {
  std::string mode;
  double value = 0;  // bourgain: min omega; cfms: max ratio; holder_decay: gamma; green_symmetry: max |dG|/CI
  double min_ratio = 0;
  std::vector<double> entries;
  std::vector<double> cis;
};

namespace detail {

inline std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) continue;
    double lx = std::log(x[i]), ly = std::log(y[i]);
    n += 1;
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  if (n < 2) return {0, 0};
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

}  // namespace detail

inline DiagnosticReport pde_diagnostics(const Domain& D, const Estimators& est, const DiagnosticParams& prm) {
  DiagnosticReport rep;
  rep.mode = prm.mode;
  const int dim = D.dim();
  if (prm.mode == "bourgain") {
    if (!(prm.r > 0) || !(prm.C >= 1) || prm.net < 1) throw Error(ErrorCode::ModeParamMismatch, "bourgain needs x, r, C");
    auto target = surface_ball_target("Delta", prm.x, prm.r);
    Point n = D.outward_normal(prm.x);
    double rad = prm.r / prm.C;
    double best = kInf;
    for (const Point& u : detail::unit_ball_net(dim, 4 * prm.net)) {
      Point Y = prm.x - n * (rad * 0.5) + u * (rad * 0.5);
      if (!D.contains(Y) || dist(Y, prm.x) >= rad) continue;
      if (D.distance(Y) < 8 * 1e-4 * D.diam_boundary()) continue;
      auto v = est.omega(Y, target);
      rep.entries.push_back(v.value);
      rep.cis.push_back(v.ci);
      best = std::min(best, v.value);
      if (static_cast<int>(rep.entries.size()) >= prm.net) break;
    }
    if (rep.entries.empty()) throw Error(ErrorCode::ModeParamMismatch, "no Y in B(x, r/C) inside the domain");
    rep.value = best;
    rep.min_ratio = best;
    return rep;
  }
  if (prm.mode == "cfms") {
    if (prm.pairs.empty()) throw Error(ErrorCode::ModeParamMismatch, "cfms needs pole pairs");
    double mx = 0, mn = kInf;
    for (auto [X, Y] : prm.pairs) {
      double dY = D.distance(Y);
      if (dist(X, Y) < dY / 2) throw Error(ErrorCode::ModeParamMismatch, "cfms pair has |X - Y| < delta(Y)/2");
      Point yh = D.nearest_boundary_point(Y);
      auto G = est.green(X, Y);
      auto w = est.omega(X, surface_ball_target("Delta", yh, 2 * dY));
      double s = D.surface_ball_measure(yh, 2 * dY);
      double ratio = (G.value / dY) / (w.value / s);
      rep.entries.push_back(ratio);
      mx = std::max(mx, ratio);
      mn = std::min(mn, ratio);
    }
    rep.value = mx;
    rep.min_ratio = mn;
    return rep;
  }
  if (prm.mode == "holder_decay") {
    if (!(prm.r > 0) || prm.levels < 2) throw Error(ErrorCode::ModeParamMismatch, "holder_decay needs x, r, levels");
    auto inner = surface_ball_target("Delta0", prm.x, prm.r);
    Point n = D.outward_normal(prm.x);
    std::vector<double> rho, val;
    for (int k = 1; k <= prm.levels; ++k) {
      double t = prm.r * std::ldexp(1.0, -k);
      Point X = prm.x - n * t;
      auto v = est.omega(X, inner);
      rho.push_back(t / prm.r);
      val.push_back(1 - v.value);
      rep.entries.push_back(1 - v.value);
      rep.cis.push_back(v.ci);
    }
    rep.value = detail::loglog_fit(rho, val).first;
    return rep;
  }
  if (prm.mode == "green_symmetry") {
    if (prm.pairs.empty()) throw Error(ErrorCode::ModeParamMismatch, "green_symmetry needs pairs");
    double worst = 0;
    for (auto [X, Y] : prm.pairs) {
      auto a = est.green(X, Y), b = est.green(Y, X);
      double ci = std::sqrt(a.ci * a.ci + b.ci * b.ci);
      double diff = std::abs(a.value - b.value);
      double r = ci > 0 ? diff / ci : (diff == 0 ? 0 : kInf);
      rep.entries.push_back(r);
      worst = std::max(worst, r);
    }
    rep.value = worst;
    return rep;
  }
  throw Error(ErrorCode::ModeParamMismatch, "unknown diagnostic mode " + prm.mode);
}

inline json estimate_to_json(const MeasureEstimate& m) {
  json t = json::array();
  for (const auto& x : m.targets) t.push_back({{"id", x.id}, {"mass", x.mass}, {"ci", x.ci}});
  return json{{"pole", point_to_json(m.pole, m.dim)}, {"targets", t},         {"paths", m.paths},
              {"seed", m.seed},                       {"eps_stop", m.eps_stop}, {"lost_mass", m.lost_mass}};
}

}  // namespace coronalab
