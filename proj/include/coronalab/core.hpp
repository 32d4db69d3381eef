#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace coronalab {

enum class ErrorCode {
  InvalidSpec,
  EmptyPlan,
  ResolutionTooCoarse,
  ContainmentViolated,
  AboveRoot,
  FamilyNotDisjoint,
  PreconditionViolated,
  PoleOnBoundary,
  CoincidentPoints,
  LatticeTooCoarse,
  ModeParamMismatch,
  BadCorkscrewFamily,
  MissingDerivative,
  NotAntisymmetric,
  PoleMissing,
  DepthInsufficient,
  OracleFailure,
  HypothesisViolated,
  NonTermination,
  NotSemiCoherent,
  GeometryViolated,
  ConfigInvalid,
  StageFailed,
  IoError,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::EmptyPlan: return "EmptyPlan";
    case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorCode::ContainmentViolated: return "ContainmentViolated";
    case ErrorCode::AboveRoot: return "AboveRoot";
    case ErrorCode::FamilyNotDisjoint: return "FamilyNotDisjoint";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::PoleOnBoundary: return "PoleOnBoundary";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::LatticeTooCoarse: return "LatticeTooCoarse";
    case ErrorCode::ModeParamMismatch: return "ModeParamMismatch";
    case ErrorCode::BadCorkscrewFamily: return "BadCorkscrewFamily";
    case ErrorCode::MissingDerivative: return "MissingDerivative";
    case ErrorCode::NotAntisymmetric: return "NotAntisymmetric";
    case ErrorCode::PoleMissing: return "PoleMissing";
    case ErrorCode::DepthInsufficient: return "DepthInsufficient";
    case ErrorCode::OracleFailure: return "OracleFailure";
    case ErrorCode::HypothesisViolated: return "HypothesisViolated";
    case ErrorCode::NonTermination: return "NonTermination";
    case ErrorCode::NotSemiCoherent: return "NotSemiCoherent";
    case ErrorCode::GeometryViolated: return "GeometryViolated";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::StageFailed: return "StageFailed";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Points always carry three coordinates; planar domains keep z = 0.
struct Point {
  double x = 0, y = 0, z = 0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Point& operator+=(const Point& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Point& operator-=(const Point& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Point& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
  friend Point operator+(Point a, const Point& b) { return a += b; }
  friend Point operator-(Point a, const Point& b) { return a -= b; }
  friend Point operator-(const Point& a) { return {-a.x, -a.y, -a.z}; }
  friend Point operator*(Point a, double s) { return a *= s; }
  friend Point operator*(double s, Point a) { return a *= s; }
  friend Point operator/(Point a, double s) { return a *= (1.0 / s); }
  friend bool operator==(const Point&, const Point&) = default;
};

inline double dot(const Point& a, const Point& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }
inline double dist(const Point& a, const Point& b) { return norm(a - b); }
inline Point cross(const Point& a, const Point& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Closed axis-aligned box; coordinates beyond `dim` are ignored.
struct Box {
  Point lo, hi;
  int dim = 2;

  Point center() const { return (lo + hi) * 0.5; }
  double side(int i) const { return hi[i] - lo[i]; }
  double max_side() const {
    double s = 0;
    for (int i = 0; i < dim; ++i) s = std::max(s, side(i));
    return s;
  }
  double diameter() const {
    double s = 0;
    for (int i = 0; i < dim; ++i) s += side(i) * side(i);
    return std::sqrt(s);
  }
  bool contains(const Point& p) const {
    for (int i = 0; i < dim; ++i)
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
    return true;
  }
  double distance(const Point& p) const {
    double s = 0;
    for (int i = 0; i < dim; ++i) {
      double d = std::max({lo[i] - p[i], 0.0, p[i] - hi[i]});
      s += d * d;
    }
    return std::sqrt(s);
  }
  double max_distance(const Point& p) const {
    double s = 0;
    for (int i = 0; i < dim; ++i) {
      double d = std::max(std::abs(p[i] - lo[i]), std::abs(p[i] - hi[i]));
      s += d * d;
    }
    return std::sqrt(s);
  }
  double distance(const Box& b) const {
    double s = 0;
    for (int i = 0; i < dim; ++i) {
      double d = std::max({lo[i] - b.hi[i], 0.0, b.lo[i] - hi[i]});
      s += d * d;
    }
    return std::sqrt(s);
  }
  bool intersects(const Box& b) const {
    for (int i = 0; i < dim; ++i)
      if (hi[i] < b.lo[i] || b.hi[i] < lo[i]) return false;
    return true;
  }
  bool interiors_intersect(const Box& b) const {
    for (int i = 0; i < dim; ++i)
      if (hi[i] <= b.lo[i] || b.hi[i] <= lo[i]) return false;
    return true;
  }
  void expand(const Point& p) {
    for (int i = 0; i < dim; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }
  void expand(const Box& b) {
    expand(b.lo);
    expand(b.hi);
  }
  Box scaled(double factor) const {
    Box b = *this;
    Point c = center();
    for (int i = 0; i < dim; ++i) {
      double h = 0.5 * side(i) * factor;
      b.lo[i] = c[i] - h;
      b.hi[i] = c[i] + h;
    }
    return b;
  }
  static Box around(const Point& c, double half, int dim) {
    Box b;
    b.dim = dim;
    for (int i = 0; i < dim; ++i) {
      b.lo[i] = c[i] - half;
      b.hi[i] = c[i] + half;
    }
    return b;
  }
  static Box empty(int dim) {
    Box b;
    b.dim = dim;
    for (int i = 0; i < dim; ++i) {
      b.lo[i] = kInf;
      b.hi[i] = -kInf;
    }
    return b;
  }
};

// Distance from p to the closed segment [a, b].
inline double segment_distance(const Point& p, const Point& a, const Point& b, Point* nearest = nullptr) {
  Point ab = b - a;
  double l2 = dot(ab, ab);
  double t = l2 > 0 ? std::clamp(dot(p - a, ab) / l2, 0.0, 1.0) : 0.0;
  Point q = a + ab * t;
  if (nearest) *nearest = q;
  return dist(p, q);
}

// Splitmix64 finalizer; used to derive stream keys, never as a generator.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_point(const Point& p, std::uint64_t seed) {
  auto bits = [](double v) {
    std::uint64_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, sizeof(u));
    return u;
  };
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ bits(p.x));
  h = mix64(h ^ bits(p.y));
  h = mix64(h ^ bits(p.z));
  return h;
}

}  // namespace coronalab
