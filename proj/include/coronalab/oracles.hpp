#pragma once
#include <complex>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/ellint_2.hpp>
#include <boost/math/special_functions/ellint_1.hpp>
#include <boost/math/special_functions/jacobi_elliptic.hpp>

#include "dyadic.hpp"

// Closed-form harmonic measures, Poisson kernels and Green functions.
namespace coronalab::oracle {

using cplx = std::complex<double>;

inline double sphere_area(int dim) { return dim == 2 ? 2 * kPi : 4 * kPi; }

// Fundamental solution of -Laplace.
inline double fundamental(const Point& x, int dim) {
  double r = norm(x);
  return dim == 2 ? -std::log(r) / (2 * kPi) : 1.0 / (4 * kPi * r);
}

// Harmonic measure of the arc {c + R e^{it} : a <= t <= b}, b - a in (0, 2 pi].
inline double disk_arc(const Point& c, double R, const Point& X, double a, double b) {
  if (b - a >= 2 * kPi) return 1.0;
  cplx z((X.x - c.x) / R, (X.y - c.y) / R);
  double ang = std::arg((std::polar(1.0, b) - z) / (std::polar(1.0, a) - z));
  if (ang < 0) ang += 2 * kPi;
  return ang / kPi - (b - a) / (2 * kPi);
}

inline Point disk_arc_gradient(const Point& c, double R, const Point& X, double a, double b) {
  if (b - a >= 2 * kPi) return {};
  cplx z((X.x - c.x) / R, (X.y - c.y) / R);
  cplx G = (-1.0 / (std::polar(1.0, b) - z) + 1.0 / (std::polar(1.0, a) - z)) / kPi;
  return Point{G.imag(), G.real(), 0} / R;
}

// Harmonic measure of [a, b] x {0} from X in the upper half-plane.
inline double halfplane_interval(const Point& X, double a, double b) {
  return (std::atan((b - X.x) / X.y) - std::atan((a - X.x) / X.y)) / kPi;
}

inline Point halfplane_interval_gradient(const Point& X, double a, double b) {
  double y = X.y, ua = a - X.x, ub = b - X.x;
  double da = ua * ua + y * y, db = ub * ub + y * y;
  return Point{(-y / db + y / da) / kPi, (-ub / db + ua / da) / kPi, 0};
}

// Harmonic measure of [a0, a1] x [b0, b1] x {0} from X in the upper half-space of R^3.
inline double halfspace_rect(const Point& X, double a0, double a1, double b0, double b1) {
  const double z = X.z;
  auto F = [&](double u, double v) { return std::atan(u * v / (z * std::sqrt(u * u + v * v + z * z))); };
  double u0 = a0 - X.x, u1 = a1 - X.x, v0 = b0 - X.y, v1 = b1 - X.y;
  return (F(u1, v1) - F(u0, v1) - F(u1, v0) + F(u0, v0)) / (2 * kPi);
}

// Poisson kernel of the ball B(c, R) in R^dim.
inline double ball_poisson(const Point& c, double R, const Point& X, const Point& y, int dim) {
  double x2 = dot(X - c, X - c);
  return (R * R - x2) / (sphere_area(dim) * R * std::pow(dist(X, y), dim));
}

// Poisson kernel of {x_dim > 0}.
inline double halfspace_poisson(const Point& X, const Point& y, int dim) {
  return 2 * X[dim - 1] / (sphere_area(dim) * std::pow(dist(X, y), dim));
}

// Harmonic measure of the spherical cap {y : (y - c) . axis >= R cos(theta_c)} of the
// ball B(c, R) in R^3. The azimuthal integral is closed-form (complete elliptic
// integral of the second kind); the polar integral is adaptive Gauss-Kronrod.
inline double ball_cap(const Point& c, double R, const Point& X, const Point& axis, double theta_c) {
  Point x = (X - c) / R;
  Point n = axis / norm(axis);
  const double xa = dot(x, n);
  const double xp = norm(x - n * xa);
  const double x2 = dot(x, x);
  auto integrand = [&](double th) {
    double A = 1 + x2 - 2 * xa * std::cos(th);
    double B = 2 * xp * std::sin(th);
    double inner;
    if (B < 1e-14 * A) {
      inner = 2 * kPi / std::pow(A, 1.5);
    } else {
      double k = std::sqrt(2 * B / (A + B));
      inner = 4 * boost::math::ellint_2(k) / ((A - B) * std::sqrt(A + B));
    }
    return inner * std::sin(th);
  };
  double err = 0;
  double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, theta_c, 15, 1e-13, &err);
  return (1 - x2) / (4 * kPi) * I;
}

// Green function with pole Y, evaluated at X.
inline double disk_green(const Point& c, double R, const Point& X, const Point& Y) {
  Point x = X - c, y = Y - c;
  double ny = norm(y);
  if (ny == 0) return std::log(R / norm(x)) / (2 * kPi);
  Point ys = y * (R * R / (ny * ny));
  return std::log(dist(x, ys) * ny / (R * dist(x, y))) / (2 * kPi);
}

inline double ball_green(const Point& c, double R, const Point& X, const Point& Y) {
  Point x = X - c, y = Y - c;
  double ny = norm(y);
  if (ny == 0) return (1 / norm(x) - 1 / R) / (4 * kPi);
  Point ys = y * (R * R / (ny * ny));
  return (1 / dist(x, y) - R / (ny * dist(x, ys))) / (4 * kPi);
}

inline double halfspace_green(const Point& X, const Point& Y, int dim) {
  Point Yr = Y;
  Yr[dim - 1] = -Y[dim - 1];
  return fundamental(X - Y, dim) - fundamental(X - Yr, dim);
}

// Complex Jacobi sn, cn, dn by the imaginary-argument addition formulas.
struct JacobiTriple {
  cplx sn, cn, dn;
};

inline JacobiTriple jacobi(cplx z, double k) {
  const double kp = std::sqrt(1 - k * k);
  double c, d, c1, d1;
  double s = boost::math::jacobi_elliptic(k, z.real(), &c, &d);
  double s1 = boost::math::jacobi_elliptic(kp, z.imag(), &c1, &d1);
  double D = c1 * c1 + k * k * s * s * s1 * s1;
  return {cplx(s * d1, c * d * s1 * c1) / D, cplx(c * c1, -s * d * s1 * d1) / D,
          cplx(d * c1 * d1, -k * k * s * c * s1) / D};
}

// Harmonic measure of the bottom side of the square [p, p + s]^2, evaluated through
// the map sending the square onto the upper half-plane with the bottom side onto [-1, 1].
class SquareBottomField {
 public:
  SquareBottomField() {
    k_ = 3 - 2 * std::sqrt(2.0);
    K_ = boost::math::ellint_1(k_);
  }
  double modulus() const { return k_; }
  double value(const Point& p, double s, const Point& X) const {
    cplx w = jacobi(xi(p, s, X), k_).sn;
    double u = (std::arg(w - 1.0) - std::arg(w + 1.0)) / kPi;
    return std::clamp(u, 0.0, 1.0);
  }
  Point gradient(const Point& p, double s, const Point& X) const {
    auto J = jacobi(xi(p, s, X), k_);
    cplx Gp = (1.0 / (J.sn - 1.0) - 1.0 / (J.sn + 1.0)) * J.cn * J.dn * (2 * K_ / s) / kPi;
    return {Gp.imag(), Gp.real(), 0};
  }

 private:
  cplx xi(const Point& p, double s, const Point& X) const {
    return cplx(-K_ + 2 * K_ * (X.x - p.x) / s, 2 * K_ * (X.y - p.y) / s);
  }
  double k_, K_;
};

inline const BallPrimitive* as_ball(const Domain& d) {
  if (d.primitives().size() != 1 || d.mode() != DomainMode::Union) return nullptr;
  return dynamic_cast<const BallPrimitive*>(d.primitives().front().get());
}

inline bool is_half_space(const Domain& d) {
  return d.primitives().size() == 1 && d.mode() == DomainMode::Union &&
         dynamic_cast<const HalfSpacePrimitive*>(d.primitives().front().get()) != nullptr;
}

inline bool has_exact_omega(const Domain& d) { return as_ball(d) != nullptr || is_half_space(d); }

// Exact harmonic measure of one boundary cell.
inline double cell_omega(const Domain& d, const BoundaryCell& cell, const Point& X) {
  if (auto* b = as_ball(d)) {
    if (d.dim() == 2) return disk_arc(b->center(), b->radius(), X, cell.a0, cell.a1);
    if (cell.kind == CellKind::SurfaceRoot) return 1.0;
    // Gauss-Legendre on the equiangular face parameters.
    static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                 0.9061798459386640};
    static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};
    const int m = 4;
    double acc = 0;
    const double da = (cell.a1 - cell.a0) / m, db = (cell.b1 - cell.b0) / m;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int p = 0; p < 5; ++p)
          for (int q = 0; q < 5; ++q) {
            double al = cell.a0 + da * (i + 0.5 + 0.5 * gx[p]);
            double be = cell.b0 + db * (j + 0.5 + 0.5 * gx[q]);
            double x = std::tan(al), y = std::tan(be);
            double jac = (1 + x * x) * (1 + y * y) / std::pow(1 + x * x + y * y, 1.5);
            Point yp = b->sphere_point(cell.face, al, be);
            acc += gw[p] * gw[q] * 0.25 * da * db * jac * b->radius() * b->radius() *
                   ball_poisson(b->center(), b->radius(), X, yp, 3);
          }
    return acc;
  }
  if (is_half_space(d)) {
    if (d.dim() == 2) return halfplane_interval(X, cell.a0, cell.a1);
    return halfspace_rect(X, cell.a0, cell.a1, cell.b0, cell.b1);
  }
  throw Error(ErrorCode::OracleFailure, "no closed-form harmonic measure for this domain");
}

// omega^X on the grid leaves, exact (ball, half-space).
inline DiscreteMeasure exact_omega(const DyadicGrid& g, const Point& X) {
  if (!has_exact_omega(g.domain)) throw Error(ErrorCode::OracleFailure, "no closed-form harmonic measure");
  if (!g.domain.contains(X)) throw Error(ErrorCode::PoleOnBoundary, "pole outside the domain");
  DiscreteMeasure m;
  m.pole = X;
  for (int l : g.leaves()) m.leaf_mass.push_back(cell_omega(g.domain, g.cube(l).cell, X));
  m.leaf_ci.assign(m.leaf_mass.size(), 0.0);
  return m;
}

inline bool has_exact_green(const Domain& d) { return has_exact_omega(d); }

inline double exact_green(const Domain& d, const Point& X, const Point& Y) {
  if (auto* b = as_ball(d)) {
    return d.dim() == 2 ? disk_green(b->center(), b->radius(), X, Y) : ball_green(b->center(), b->radius(), X, Y);
  }
  if (is_half_space(d)) return halfspace_green(X, Y, d.dim());
  throw Error(ErrorCode::OracleFailure, "no closed-form Green function for this domain");
}

}  // namespace coronalab::oracle
