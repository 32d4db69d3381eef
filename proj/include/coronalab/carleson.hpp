#pragma once
#include <array>

#include "pde.hpp"
#include "whitney.hpp"

namespace coronalab {

// alpha_Q per cube id of one grid.
using DiscreteCarlesonMeasure = std::vector<double>;

struct PackingResult {
  double norm = 0;
  int argmax = -1;
  std::vector<double> tree_mass;  // m(D_Q) per cube
};

// sup over Q in the trees below `roots` of m(D_Q)/sigma(Q), by one bottom-up pass.
inline PackingResult packing_norm(const DyadicGrid& g, const DiscreteCarlesonMeasure& alpha,
                                  const std::vector<int>& roots = {}) {
  if (alpha.size() != g.cubes.size()) throw Error(ErrorCode::PreconditionViolated, "alpha size mismatch");
  PackingResult r;
  r.tree_mass.assign(g.cubes.size(), 0.0);
  for (int id = static_cast<int>(g.cubes.size()) - 1; id >= 0; --id) {
    double s = alpha[id];
    for (int c : g.cube(id).children) s += r.tree_mass[c];
    r.tree_mass[id] = s;
  }
  auto consider = [&](int id) {
    double v = r.tree_mass[id] / g.cube(id).sigma;
    if (r.argmax < 0 || v > r.norm) {
      r.norm = v;
      r.argmax = id;
    }
  };
  if (roots.empty()) {
    for (int id = 0; id < static_cast<int>(g.cubes.size()); ++id) consider(id);
  } else {
    std::vector<char> in(g.cubes.size(), 0);
    for (int root : roots) in[root] = 1;
    for (int id = 0; id < static_cast<int>(g.cubes.size()); ++id) {
      int p = g.cube(id).parent;
      if (p >= 0 && in[p]) in[id] = 1;
      if (in[id]) consider(id);
    }
  }
  return r;
}

struct WindowSpec {
  Point x;
  double r = 0;
  std::string id;
};

struct WindowValue {
  std::string id;
  Point x;
  double r = 0;
  int cube = -1;
  double value = 0;     // normalized
  double integral = 0;  // raw integral (or sup for linf_grad)
  double error = 0;
  bool cutoff_hit = false;
  std::size_t cells = 0;
};

struct CarlesonReport {
  std::string functional;
  int dim = 2;
  std::vector<WindowValue> windows;
  double sup = 0;
  int argmax = -1;
  double error = 0;  // error estimate at the argmax window

  void finalize() {
    sup = 0;
    argmax = -1;
    for (std::size_t i = 0; i < windows.size(); ++i)
      if (argmax < 0 || windows[i].value > sup) {
        sup = windows[i].value;
        argmax = static_cast<int>(i);
      }
    error = argmax >= 0 ? windows[argmax].error : 0;
  }
};

inline json report_to_json(const CarlesonReport& r) {
  json w = json::array();
  for (const auto& v : r.windows)
    w.push_back({{"id", v.id},
                 {"x", point_to_json(v.x, r.dim)},
                 {"r", v.r},
                 {"cube", v.cube},
                 {"value", v.value},
                 {"integral", v.integral},
                 {"error", v.error},
                 {"cutoff_hit", v.cutoff_hit}});
  return json{{"functional", r.functional}, {"sup", r.sup}, {"argmax", r.argmax}, {"error", r.error}, {"windows", w}};
}

inline void write_report_csv(std::ostream& os, const CarlesonReport& r) {
  os << "window_id,value\n";
  os.precision(17);
  for (const auto& v : r.windows) os << v.id << "," << v.value << "\n";
}

struct QuadratureOptions {
  int levels_below = 0;  // Whitney cutoff r 2^-levels_below; 0 selects 9 (d=2) or 6 (d=3)
  double rel_tol = 0.01;
  int max_sub = 16;
};

struct IntegralResult {
  double value = 0;
  double error = 0;
  double max_integrand = 0;
  bool cutoff_hit = false;
  std::size_t cells = 0;
};

// Integral of f(X, delta(X)) over B(x, r) cap Omega. Whitney cubes of a local decomposition
// are integrated by the midpoint rule on n^d subcells, n = 1, 2, 4, ..., until two
// consecutive levels differ by less than rel_tol.
template <class F>
IntegralResult window_integral(const Domain& D, const Point& x, double r, F&& f, const QuadratureOptions& opt = {}) {
  const int dim = D.dim();
  const int levels = opt.levels_below > 0 ? opt.levels_below : (dim == 2 ? 9 : 6);
  auto W = build_whitney(D, Box::around(x, r, dim), std::ldexp(r, -levels));
  IntegralResult res;
  res.cutoff_hit = W.cutoff_hit;
  std::vector<double> vals(W.cubes.size(), 0.0), errs(W.cubes.size(), 0.0), maxes(W.cubes.size(), 0.0);
  std::vector<std::size_t> cells(W.cubes.size(), 0);
  parallel_for(
      W.cubes.size(),
      [&](std::size_t i) {
        Box b = W.box(static_cast<int>(i));
        if (b.distance(x) >= r) return;
        const double s = W.cubes[i].len;
        auto level = [&](int n) {
          double acc = 0;
          double hn = s / n;
          for (int a = 0; a < n; ++a)
            for (int bb = 0; bb < n; ++bb)
              for (int c = 0; c < (dim == 3 ? n : 1); ++c) {
                Point p = b.lo + Point{(a + 0.5) * hn, (bb + 0.5) * hn, dim == 3 ? (c + 0.5) * hn : 0.0};
                if (dist(p, x) >= r) continue;
                double v = f(p, D.distance(p));
                maxes[i] = std::max(maxes[i], v);
                acc += v;
                ++cells[i];
              }
          return acc * std::pow(hn, dim);
        };
        double prev = level(1);
        double cur = prev;
        for (int n = 2; n <= opt.max_sub; n *= 2) {
          cur = level(n);
          double diff = std::abs(cur - prev);
          prev = cur;
          errs[i] = diff;
          if (diff <= opt.rel_tol * std::abs(cur) || (cur == 0 && diff == 0)) break;
        }
        vals[i] = cur;
      },
      16);
  for (std::size_t i = 0; i < W.cubes.size(); ++i) {
    res.value += vals[i];
    res.error += errs[i];
    res.max_integrand = std::max(res.max_integrand, maxes[i]);
    res.cells += cells[i];
  }
  return res;
}

inline double window_sigma(const Domain& D, const Point& x, double r) { return D.surface_ball_measure(x, r); }

// Windows at the centers of grid cubes of the given generations, radius factor * l(Q).
inline std::vector<WindowSpec> cube_windows(const DyadicGrid& g, const std::vector<int>& gens,
                                            const std::vector<double>& factors, std::size_t max_per_gen = 0) {
  std::vector<WindowSpec> out;
  for (int gen : gens) {
    if (gen < 0 || gen > g.depth) continue;
    const auto& cubes = g.by_gen[gen];
    std::size_t step = max_per_gen && cubes.size() > max_per_gen ? cubes.size() / max_per_gen : 1;
    for (std::size_t i = 0; i < cubes.size(); i += step)
      for (double f : factors)
        out.push_back({g.cube(cubes[i]).center, f * g.cube(cubes[i]).len,
                       "Q" + std::to_string(cubes[i]) + "_r" + std::to_string(f)});
  }
  return out;
}

// (1/r^n) integral of |grad u|^2 delta over B(x, r) cap Omega, n = d - 1.
inline CarlesonReport full_cme(const Domain& D, const SolutionField& u, const std::vector<WindowSpec>& windows,
                               const QuadratureOptions& opt = {}) {
  CarlesonReport rep;
  rep.functional = "full_cme";
  rep.dim = D.dim();
  for (const auto& w : windows) {
    auto res = window_integral(
        D, w.x, w.r,
        [&](const Point& X, double delta) {
          Point gr = u.gradient(X).grad;
          return dot(gr, gr) * delta;
        },
        opt);
    WindowValue v;
    v.id = w.id;
    v.x = w.x;
    v.r = w.r;
    v.integral = res.value;
    v.value = res.value / std::pow(w.r, D.dim() - 1);
    v.error = res.error / std::pow(w.r, D.dim() - 1);
    v.cutoff_hit = res.cutoff_hit;
    v.cells = res.cells;
    rep.windows.push_back(v);
  }
  rep.finalize();
  return rep;
}

// P_Q = x_Q moved inward along the normal by l(Q)/2 when that is a valid corkscrew point,
// otherwise the corkscrew search at scale l(Q) with c = 1/4. Cubes without either are skipped.
inline std::optional<Point> corkscrew_for_cube(const DyadicGrid& g, int q) {
  const auto& Q = g.cube(q);
  Point n = g.domain.outward_normal(Q.center);
  Point P = Q.center - n * (Q.len / 2);
  double d = g.domain.contains(P) ? g.domain.distance(P) : 0;
  if (d >= Q.len / 4 && d <= Q.len) return P;
  return corkscrew_point(g.domain, Q.center, Q.len, 0.25);
}

inline std::vector<FamilyPoint> corkscrew_family(const DyadicGrid& g, int max_gen = -1) {
  std::vector<FamilyPoint> out;
  for (const auto& Q : g.cubes) {
    if (max_gen >= 0 && Q.gen > max_gen) continue;
    if (auto P = corkscrew_for_cube(g, Q.id)) out.push_back({Q.id, *P});
  }
  return out;
}

struct PartialCmeOptions {
  double h_divisor = 1;  // h = (tau delta(P_Q) / 8) / h_divisor
};

// sup over Q0 of (1/sigma(Q0)) sum_{Q in family, Q in D_Q0} integral over B(P_Q, (1-tau) delta(P_Q)).
inline CarlesonReport partial_cme(const DyadicGrid& g, const SolutionField& u, const std::vector<FamilyPoint>& family,
                                  double tau, const std::vector<int>& Q0_sweep, const PartialCmeOptions& opt = {}) {
  if (!(tau > 0 && tau < 0.5)) throw Error(ErrorCode::PreconditionViolated, "tau must lie in (0, 1/2)");
  const Domain& D = g.domain;
  std::vector<double> energy(g.cubes.size(), 0.0), err(g.cubes.size(), 0.0);
  for (const auto& fp : family) {
    const auto& Q = g.cube(fp.cube);
    const double d = D.contains(fp.p) ? D.distance(fp.p) : 0;
    const double dq = g.tree.nearest(fp.p, KdTree::Filter::Inside, Q.sample_begin, Q.sample_end).distance;
    const double l = Q.len;
    if (!(d >= l / 4 && d <= 4 * l && dq >= l / 4 && dq <= 4 * l))
      throw Error(ErrorCode::BadCorkscrewFamily, "P_Q fails delta ~ l(Q) ~ dist(P_Q, Q) for cube " + std::to_string(Q.id));
  }
  for (const auto& fp : family) {
    const double d = D.distance(fp.p);
    const double s = (1 - tau) * d;
    const double h = (d - s) / 8 / opt.h_divisor;  // margin as gradient_energy computes it
    auto e = gradient_energy(D, u, fp.p, s, h);
    energy[fp.cube] += e.value;
    err[fp.cube] += e.error;
  }
  auto acc = packing_norm(g, energy);
  auto acc_err = packing_norm(g, err);
  CarlesonReport rep;
  rep.functional = "partial_cme";
  rep.dim = D.dim();
  std::vector<int> sweep = Q0_sweep;
  if (sweep.empty()) {
    sweep.resize(g.cubes.size());
    std::iota(sweep.begin(), sweep.end(), 0);
  }
  for (int q : sweep) {
    const auto& Q = g.cube(q);
    WindowValue v;
    v.id = "Q" + std::to_string(q);
    v.x = Q.center;
    v.r = Q.len;
    v.cube = q;
    v.integral = acc.tree_mass[q];
    v.value = acc.tree_mass[q] / Q.sigma;
    v.error = acc_err.tree_mass[q] / Q.sigma;
    rep.windows.push_back(v);
  }
  rep.finalize();
  return rep;
}

using Mat3 = std::array<double, 9>;  // row-major, entries (i, j) at 3 i + j

inline double frob(const Mat3& m, int dim) {
  double s = 0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) s += m[3 * i + j] * m[3 * i + j];
  return std::sqrt(s);
}
inline Mat3 sub(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 9; ++i) r[i] = a[i] - b[i];
  return r;
}
inline Mat3 transpose(const Mat3& a) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[3 * i + j] = a[3 * j + i];
  return r;
}
inline Mat3 identity3() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

struct CoefficientField {
  int dim = 2;
  std::function<Mat3(const Point&)> A;
  std::function<std::array<Mat3, 3>(const Point&)> dA;  // partials d_k A, optional
  double Lambda = 1;
};

inline CoefficientField constant_field(int dim, const Mat3& M) {
  CoefficientField f;
  f.dim = dim;
  f.A = [M](const Point&) { return M; };
  f.dA = [](const Point&) { return std::array<Mat3, 3>{}; };
  return f;
}

inline CoefficientField add_constant(const CoefficientField& f, const Mat3& M) {
  CoefficientField g = f;
  auto A = f.A;
  g.A = [A, M](const Point& X) {
    Mat3 r = A(X);
    for (int i = 0; i < 9; ++i) r[i] += M[i];
    return r;
  };
  return g;
}

// Largest Lambda with Lambda^-1 |xi|^2 <= A xi . xi and |A xi . eta| <= Lambda |xi||eta| over the probes.
inline double measured_ellipticity(const CoefficientField& f, const std::vector<Point>& probes) {
  double lam = 1;
  const int d = f.dim;
  for (const Point& X : probes) {
    Mat3 A = f.A(X);
    for (int k = 0; k < 64; ++k) {
      double t = 2 * kPi * k / 64;
      Point xi{std::cos(t), std::sin(t), 0};
      if (d == 3) xi = Point{std::cos(t) * std::sin(1 + k), std::sin(t) * std::sin(1 + k), std::cos(1 + k)};
      double q = 0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) q += A[3 * i + j] * xi[i] * xi[j];
      q /= dot(xi, xi);
      if (q <= 0) return kInf;
      lam = std::max(lam, 1 / q);
    }
    // Operator norm bounded by the Frobenius norm.
    lam = std::max(lam, frob(A, d));
  }
  return lam;
}

struct CoefficientOptions {
  bool allow_fd = true;
  int net_points = 32;
  bool refine_net = false;  // doubles the ball-sup net
  QuadratureOptions quad;
};

namespace detail {

inline std::array<Mat3, 3> partials(const CoefficientField& f, const Point& X, double delta, bool allow_fd) {
  if (f.dA) return f.dA(X);
  if (!allow_fd) throw Error(ErrorCode::MissingDerivative, "coefficient derivatives unavailable");
  std::array<Mat3, 3> out{};
  const double h = delta / 16;
  for (int k = 0; k < f.dim; ++k) {
    Point e;
    e[k] = h;
    Mat3 p = f.A(X + e), m = f.A(X - e);
    for (int i = 0; i < 9; ++i) out[k][i] = (p[i] - m[i]) / (2 * h);
  }
  return out;
}

inline double grad_norm(const std::array<Mat3, 3>& dA, int dim) {
  double s = 0;
  for (int k = 0; k < dim; ++k) {
    double fk = frob(dA[k], dim);
    s += fk * fk;
  }
  return std::sqrt(s);
}

}  // namespace detail

// Fixed functional ids: fkp | divC | gradL1 | osc | kp2 | linf_grad.
// fkp uses (A0, A1); divC uses A0 - A0^T, or A1 as the antisymmetric part when given.
inline CarlesonReport coefficient_carleson(const Domain& D, const CoefficientField& A0, const CoefficientField* A1,
                                           const std::string& functional, const std::vector<WindowSpec>& windows,
                                           const CoefficientOptions& opt = {}) {
  const int dim = D.dim();
  const int npts = opt.refine_net ? 2 * opt.net_points : opt.net_points;
  const auto net = detail::unit_ball_net(dim, npts);
  std::function<double(const Point&, double)> integrand;
  bool sup_mode = false;
  if (functional == "fkp") {
    if (!A1) throw Error(ErrorCode::PreconditionViolated, "fkp needs two coefficient fields");
    integrand = [&](const Point& X, double delta) {
      double rho = 0;
      for (const Point& u : net) {
        Point Y = X + u * (delta / 2);
        rho = std::max(rho, frob(sub(A0.A(Y), A1->A(Y)), dim));
      }
      return rho * rho / delta;
    };
  } else if (functional == "divC") {
    const bool explicit_part = A1 != nullptr;
    if (explicit_part) {
      for (const auto& w : windows)
        for (const Point& u : net) {
          Point X = w.x + u * w.r;
          if (!D.contains(X)) continue;
          Mat3 M = A1->A(X);
          double asym = frob(sub(M, transpose(M)), dim), sym = 0;
          for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) sym = std::max(sym, std::abs(M[3 * i + j] + M[3 * j + i]));
          if (sym > 1e-12 * std::max(1.0, asym)) throw Error(ErrorCode::NotAntisymmetric, "supplied part is not antisymmetric");
        }
    }
    const CoefficientField& F = explicit_part ? *A1 : A0;
    integrand = [&, explicit_part](const Point& X, double delta) {
      auto dA = detail::partials(F, X, delta, opt.allow_fd);
      double s = 0;
      for (int j = 0; j < dim; ++j) {
        double c = 0;
        for (int i = 0; i < dim; ++i) {
          double dij = dA[i][3 * i + j];
          c += explicit_part ? dij : dij - dA[i][3 * j + i];
        }
        s += c * c;
      }
      return s * delta;
    };
  } else if (functional == "gradL1") {
    integrand = [&](const Point& X, double delta) { return detail::grad_norm(detail::partials(A0, X, delta, opt.allow_fd), dim); };
  } else if (functional == "kp2") {
    integrand = [&](const Point& X, double delta) {
      double g = detail::grad_norm(detail::partials(A0, X, delta, opt.allow_fd), dim);
      return g * g * delta;
    };
  } else if (functional == "osc") {
    integrand = [&](const Point& X, double delta) {
      std::vector<Mat3> vals;
      for (const Point& u : net) vals.push_back(A0.A(X + u * (delta / 2)));
      double o = 0;
      for (std::size_t a = 0; a < vals.size(); ++a)
        for (std::size_t b = a + 1; b < vals.size(); ++b) o = std::max(o, frob(sub(vals[a], vals[b]), dim));
      return o / delta;
    };
  } else if (functional == "linf_grad") {
    sup_mode = true;
    integrand = [&](const Point& X, double delta) {
      return detail::grad_norm(detail::partials(A0, X, delta, opt.allow_fd), dim) * delta;
    };
  } else {
    throw Error(ErrorCode::PreconditionViolated, "unknown functional " + functional);
  }
  CarlesonReport rep;
  rep.functional = functional;
  rep.dim = dim;
  for (const auto& w : windows) {
    auto res = window_integral(D, w.x, w.r, integrand, opt.quad);
    WindowValue v;
    v.id = w.id;
    v.x = w.x;
    v.r = w.r;
    v.cutoff_hit = res.cutoff_hit;
    v.cells = res.cells;
    if (sup_mode) {
      v.integral = res.max_integrand;
      v.value = res.max_integrand;
    } else {
      double s = window_sigma(D, w.x, w.r);
      v.integral = res.value;
      v.value = s > 0 ? res.value / s : 0;
      v.error = s > 0 ? res.error / s : 0;
    }
    rep.windows.push_back(v);
  }
  rep.finalize();
  return rep;
}

struct ReverseHolder {
  double lhs = 0;
  double rhs = 0;
  double ratio = 0;
  std::size_t cubes = 0;
};

// lhs = sum over leaves with center in 2 Delta of (omega(Q)/sigma(Q))^q sigma(Q); rhs = sigma(Delta)^(1-q).
inline ReverseHolder reverse_holder(const DyadicGrid& g, const DiscreteMeasure& density, double q, const Point& x,
                                    double r) {
  if (!density.pole) throw Error(ErrorCode::PoleMissing, "density has no pole");
  if (!(q >= 1)) throw Error(ErrorCode::PreconditionViolated, "q must be at least 1");
  ReverseHolder rh;
  for (int l = 0; l < g.leaf_count(); ++l) {
    const auto& Q = g.cube(g.leaf_cube(l));
    if (dist(Q.center, x) >= 2 * r) continue;
    rh.lhs += std::pow(density.leaf_mass[l] / Q.sigma, q) * Q.sigma;
    ++rh.cubes;
  }
  rh.rhs = std::pow(g.domain.surface_ball_measure(x, r), 1 - q);
  rh.ratio = rh.lhs / rh.rhs;
  return rh;
}

}  // namespace coronalab
