#pragma once
#include <deque>
#include <map>

#include "carleson.hpp"

namespace coronalab {

struct Regime {
  std::vector<int> cubes;  // sorted cube ids
  int top = -1;
  int q_s = -1;
  Point x_s;
  bool coherent = false;
  bool truncated = false;  // reaches the grid floor
  int level = 0;           // iteration level of the stopping construction
};

struct CoronaDecomposition {
  int q0 = 0;
  std::vector<int> bad;
  std::vector<Regime> regimes;
  double packing = 0;              // all tops
  double packing_untruncated = 0;  // tops of non-truncated regimes only
  std::vector<int> floor_cubes;    // stopped cubes too close to the floor to stop again
  std::vector<double> level_sigma; // sigma of the union of level-k tops
  json provenance = json::object();
};

using OmegaOracle = std::function<DiscreteMeasure(const Point&)>;
using PoleProvider = std::function<std::optional<Point>(int)>;

inline OmegaOracle exact_omega_oracle(std::shared_ptr<const DyadicGrid> g) {
  return [g](const Point& X) { return oracle::exact_omega(*g, X); };
}

// Streams are keyed by the pole, so a rerun reproduces every estimate.
inline OmegaOracle monte_carlo_omega_oracle(std::shared_ptr<const DyadicGrid> g, McParams p) {
  return [g, p](const Point& X) {
    McParams q = p;
    q.seed = hash_point(X, p.seed);
    return harmonic_measure_on_grid(*g, X, q);
  };
}

inline PoleProvider corkscrew_provider(std::shared_ptr<const DyadicGrid> g) {
  return [g](int q) { return corkscrew_for_cube(*g, q); };
}

inline std::vector<double> cube_ci(const DyadicGrid& g, const DiscreteMeasure& mu, const std::vector<double>& masses) {
  std::vector<double> ci(g.cubes.size(), 0.0);
  if (mu.paths == 0) return ci;
  for (std::size_t i = 0; i < ci.size(); ++i) {
    double m = std::clamp(masses[i], 0.0, 1.0);
    ci[i] = 1.96 * std::sqrt(m * (1 - m) / static_cast<double>(mu.paths));
  }
  return ci;
}

inline bool is_semi_coherent(const DyadicGrid& g, const std::vector<int>& S, int top) {
  std::set<int> in(S.begin(), S.end());
  if (!in.count(top)) return false;
  for (int q : S) {
    if (q == top) continue;
    if (!g.is_within(q, top) || !in.count(g.cube(q).parent)) return false;
  }
  return true;
}

inline bool is_coherent(const DyadicGrid& g, const std::vector<int>& S, int top) {
  if (!is_semi_coherent(g, S, top)) return false;
  std::set<int> in(S.begin(), S.end());
  for (int q : S) {
    const auto& ch = g.cube(q).children;
    std::size_t k = 0;
    for (int c : ch) k += in.count(c);
    if (k != 0 && k != ch.size()) return false;
  }
  return true;
}

struct StoppingOutcome {
  int q = -1;
  int q_tau = -1;
  Point Y;
  std::vector<int> F_plus, F_minus;
  std::vector<int> tree;
  std::vector<int> ambiguous;  // Monte Carlo cubes whose CI straddles a threshold
  bool truncated = false;
  std::size_t nn_violations = 0;
  double min_ratio = kInf;      // min omega(Q')/sigma(Q') over the tree
  double max_maximal = 0;       // max (avg (M omega)^1/2)^2 over the tree
  double fq2_constant = 0;      // sigma(F_plus union) / (2^-N sigma(Q))
};

struct BasicParams {
  int N = 6;
  int N_tau = 3;
};

inline StoppingOutcome stopping_time_basic(const DyadicGrid& g, int q, const BasicParams& bp, const OmegaOracle& omega,
                                           const PoleProvider& poles) {
  if (bp.N < 2) throw Error(ErrorCode::PreconditionViolated, "N must be at least 2");
  if (bp.N_tau < 0) throw Error(ErrorCode::PreconditionViolated, "N_tau must be nonnegative");
  const auto& Q = g.cube(q);
  if (g.depth - Q.gen < bp.N_tau + 2) throw Error(ErrorCode::DepthInsufficient, "grid too shallow below cube " + Q.path);
  StoppingOutcome out;
  out.q = q;
  out.q_tau = g.cube_at(Q.center_sample, Q.gen + bp.N_tau);
  auto Y = poles(out.q_tau);
  if (!Y) throw Error(ErrorCode::OracleFailure, "no corkscrew point for cube " + g.cube(out.q_tau).path);
  out.Y = *Y;
  DiscreteMeasure mu = omega(out.Y);
  if (mu.leaf_mass.size() != static_cast<std::size_t>(g.leaf_count()))
    throw Error(ErrorCode::OracleFailure, "oracle returned the wrong number of leaves");
  // omega := sigma(Q) omega^Y
  std::vector<double> m = cube_masses(g, mu);
  std::vector<double> ci = cube_ci(g, mu, m);
  std::vector<double> lo(m.size()), hi(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    lo[i] = std::max(0.0, m[i] - ci[i]) * Q.sigma;
    hi[i] = (m[i] + ci[i]) * Q.sigma;
    m[i] *= Q.sigma;
  }
  const bool mc = mu.paths > 0;
  auto sq = sqrt_maximal_average(g, m);
  auto sq_lo = mc ? sqrt_maximal_average(g, lo) : sq;
  auto sq_hi = mc ? sqrt_maximal_average(g, hi) : sq;
  const double t1 = std::ldexp(1.0, -bp.N);
  const double t2 = std::ldexp(1.0, 2 * bp.N);

  std::vector<int> stack{q};
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    const auto& C = g.cube(c);
    if (c != q) {
      const double r_hi = hi[c] / C.sigma, r_lo = lo[c] / C.sigma;
      if (r_hi < t1) {
        out.F_minus.push_back(c);
        continue;
      }
      if (sq_lo[c] > t2) {
        out.F_plus.push_back(c);
        continue;
      }
      if (mc && (r_lo < t1 || sq_hi[c] > t2)) out.ambiguous.push_back(c);
    }
    out.tree.push_back(c);
    if (C.children.empty()) out.truncated = true;
    for (auto it = C.children.rbegin(); it != C.children.rend(); ++it) stack.push_back(*it);
  }
  std::sort(out.tree.begin(), out.tree.end());
  std::sort(out.F_plus.begin(), out.F_plus.end());
  std::sort(out.F_minus.begin(), out.F_minus.end());
  for (int c : out.tree) {
    const double r = (mc ? hi[c] : m[c]) / g.cube(c).sigma;
    const double s = mc ? sq_lo[c] : sq[c];
    out.min_ratio = std::min(out.min_ratio, m[c] / g.cube(c).sigma);
    out.max_maximal = std::max(out.max_maximal, sq[c]);
    if (r < t1 || s > t2) ++out.nn_violations;
  }
  double fp = 0;
  for (int c : out.F_plus) fp += g.cube(c).sigma;
  out.fq2_constant = fp / (t1 * Q.sigma);
  return out;
}

struct AinftyParams {
  double beta = 0.5;
  double eta = 0.5;
  double K1 = 4;
  double k_stop = 0;  // upper stop on (avg (M mu)^1/2)^2; 0 selects 16 K1
};

struct AinftyOutcome {
  std::vector<int> F;
  std::vector<int> tree;
  double alpha = 0;       // sigma(union F) / sigma(Q)
  double K2 = 0;          // max (avg (M mu)^1/2)^2 over kept cubes
  double min_ratio = kInf;
  double ampleness = 0;   // min mu(A)/mu(Q) over leaf unions A with sigma(A) >= (1 - eta) sigma(Q)
  bool truncated = false;
  bool stop1 = false;     // sigma(Q minus union F) >= (1 - alpha) sigma(Q) with alpha < 1
  bool stop2 = false;     // beta/2 <= mu(Q')/sigma(Q') <= K2 on every kept cube
};

// `cube_mass` holds mu(Q') for every cube of the grid.
inline AinftyOutcome ainfty_stopping(const DyadicGrid& g, int q, const std::vector<double>& cube_mass,
                                     const AinftyParams& ap) {
  if (!(ap.beta > 0 && ap.beta < 1) || !(ap.eta > 0 && ap.eta < 1) || !(ap.K1 >= 1))
    throw Error(ErrorCode::PreconditionViolated, "ainfty stopping requires beta, eta in (0,1) and K1 >= 1");
  const auto& Q = g.cube(q);
  const double rq = cube_mass[q] / Q.sigma;
  const double total = cube_mass[g.root()];
  const double rel = 1e-12;
  if (!(rq >= 1 - rel && rq <= total / Q.sigma * (1 + rel) && total / Q.sigma <= ap.K1 * (1 + rel)))
    throw Error(ErrorCode::HypothesisViolated, "need 1 <= mu(Q)/sigma(Q) <= mu(boundary)/sigma(Q) <= K1");
  const double k_stop = ap.k_stop > 0 ? ap.k_stop : 16 * ap.K1;
  auto sq = sqrt_maximal_average(g, cube_mass);
  AinftyOutcome out;
  std::vector<int> stack{q};
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    const auto& C = g.cube(c);
    const double r = cube_mass[c] / C.sigma;
    if (c != q && (r < ap.beta / 2 || sq[c] > k_stop)) {
      out.F.push_back(c);
      continue;
    }
    out.tree.push_back(c);
    out.K2 = std::max(out.K2, sq[c]);
    out.min_ratio = std::min(out.min_ratio, r);
    if (C.children.empty()) out.truncated = true;
    for (auto it = C.children.rbegin(); it != C.children.rend(); ++it) stack.push_back(*it);
  }
  std::sort(out.F.begin(), out.F.end());
  std::sort(out.tree.begin(), out.tree.end());
  double fs = 0;
  for (int c : out.F) fs += g.cube(c).sigma;
  out.alpha = fs / Q.sigma;
  out.stop1 = out.alpha < 1 && Q.sigma - fs >= (1 - out.alpha) * Q.sigma * (1 - rel);
  out.stop2 = true;
  for (int c : out.tree) {
    double r = cube_mass[c] / g.cube(c).sigma;
    if (r < ap.beta / 2 || r > out.K2 * (1 + rel) || sq[c] + rel * sq[c] < r) out.stop2 = false;
  }
  // Greedy removal of the densest leaves gives the least mu among leaf unions of the allowed size.
  std::vector<std::pair<double, int>> leaves;
  for (int l = Q.leaf_begin; l < Q.leaf_end; ++l) {
    int c = g.leaf_cube(l);
    leaves.push_back({cube_mass[c] / g.cube(c).sigma, c});
  }
  std::sort(leaves.begin(), leaves.end(), std::greater<>());
  double removed_sigma = 0, removed_mass = 0;
  for (auto& [dens, c] : leaves) {
    if (removed_sigma + g.cube(c).sigma > ap.eta * Q.sigma) break;
    removed_sigma += g.cube(c).sigma;
    removed_mass += cube_mass[c];
  }
  out.ampleness = cube_mass[q] > 0 ? (cube_mass[q] - removed_mass) / cube_mass[q] : 0;
  return out;
}

struct CoronaRule {
  enum class Kind { Basic, Ainfty } kind = Kind::Basic;
  BasicParams basic;
  AinftyParams ainfty;
  std::size_t max_iterations = 1000000;
};

inline json rule_to_json(const CoronaRule& r) {
  if (r.kind == CoronaRule::Kind::Basic) return json{{"rule", "basic"}, {"N", r.basic.N}, {"N_tau", r.basic.N_tau}};
  return json{{"rule", "ainfty"}, {"beta", r.ainfty.beta}, {"eta", r.ainfty.eta}, {"K1", r.ainfty.K1},
              {"k_stop", r.ainfty.k_stop > 0 ? r.ainfty.k_stop : 16 * r.ainfty.K1}};
}

inline std::vector<double> top_alpha(const DyadicGrid& g, const CoronaDecomposition& cd, bool include_truncated) {
  std::vector<double> a(g.cubes.size(), 0.0);
  for (int b : cd.bad) a[b] = g.cube(b).sigma;
  for (const auto& S : cd.regimes)
    if (include_truncated || !S.truncated) a[S.top] = g.cube(S.top).sigma;
  return a;
}

inline void update_packing(const DyadicGrid& g, CoronaDecomposition& cd) {
  cd.packing = packing_norm(g, top_alpha(g, cd, true), {cd.q0}).norm;
  cd.packing_untruncated = packing_norm(g, top_alpha(g, cd, false), {cd.q0}).norm;
}

inline std::vector<int> subtree(const DyadicGrid& g, int q) {
  std::vector<int> out;
  std::vector<int> stack{q};
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    out.push_back(c);
    for (int ch : g.cube(c).children) stack.push_back(ch);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Regimes S = D_{F_Q, Q} with Q_S = Top(S) = Q, iterated on every stopped cube.
inline CoronaDecomposition iterate_corona(const DyadicGrid& g, int q0, const CoronaRule& rule, const PoleProvider& poles,
                                          const OmegaOracle& omega) {
  CoronaDecomposition cd;
  cd.q0 = q0;
  cd.provenance = rule_to_json(rule);
  const int min_depth = rule.kind == CoronaRule::Kind::Basic ? rule.basic.N_tau + 2 : 1;
  std::deque<std::pair<int, int>> work{{q0, 0}};
  std::size_t iterations = 0;
  std::size_t nn_violations = 0, ambiguous = 0;
  double fq2_max = 0, ample_min = kInf;
  bool stop_ok = true;
  while (!work.empty()) {
    if (++iterations > rule.max_iterations) throw Error(ErrorCode::NonTermination, "corona iteration cap reached");
    auto [q, level] = work.front();
    work.pop_front();
    const auto& Q = g.cube(q);
    if (static_cast<int>(cd.level_sigma.size()) <= level) cd.level_sigma.resize(level + 1, 0.0);
    cd.level_sigma[level] += Q.sigma;
    Regime S;
    S.top = q;
    S.q_s = q;
    S.level = level;
    if (g.depth - Q.gen < min_depth) {
      auto X = poles(q);
      if (!X) throw Error(ErrorCode::OracleFailure, "no corkscrew point for cube " + Q.path);
      S.x_s = *X;
      S.cubes = subtree(g, q);
      S.truncated = true;
      S.coherent = true;
      cd.floor_cubes.push_back(q);
      cd.regimes.push_back(std::move(S));
      continue;
    }
    std::vector<int> stopped;
    if (rule.kind == CoronaRule::Kind::Basic) {
      auto o = stopping_time_basic(g, q, rule.basic, omega, poles);
      S.x_s = o.Y;
      S.cubes = o.tree;
      S.truncated = o.truncated;
      nn_violations += o.nn_violations;
      ambiguous += o.ambiguous.size();
      fq2_max = std::max(fq2_max, o.fq2_constant);
      stopped = o.F_minus;
      stopped.insert(stopped.end(), o.F_plus.begin(), o.F_plus.end());
    } else {
      auto X = poles(q);
      if (!X) throw Error(ErrorCode::OracleFailure, "no corkscrew point for cube " + Q.path);
      S.x_s = *X;
      DiscreteMeasure w = omega(*X);
      std::vector<double> m = cube_masses(g, w);
      if (!(m[q] > 0)) throw Error(ErrorCode::OracleFailure, "harmonic measure of the top cube vanishes");
      // mu := C1 sigma(Q) omega^{X_Q} with C1 = 1 / omega^{X_Q}(Q)
      const double scale = Q.sigma / m[q];
      for (double& v : m) v *= scale;
      auto o = ainfty_stopping(g, q, m, rule.ainfty);
      S.cubes = o.tree;
      S.truncated = o.truncated;
      stop_ok = stop_ok && o.stop1 && o.stop2;
      ample_min = std::min(ample_min, o.ampleness);
      stopped = o.F;
    }
    S.coherent = is_coherent(g, S.cubes, S.top);
    std::sort(stopped.begin(), stopped.end());
    for (int c : stopped) work.push_back({c, level + 1});
    cd.regimes.push_back(std::move(S));
  }
  update_packing(g, cd);
  cd.provenance["iterations"] = iterations;
  cd.provenance["floor_cubes"] = cd.floor_cubes.size();
  if (rule.kind == CoronaRule::Kind::Basic) {
    cd.provenance["nn_violations"] = nn_violations;
    cd.provenance["ambiguous"] = ambiguous;
    cd.provenance["fq2_constant"] = fq2_max;
  } else {
    cd.provenance["stop_conditions_hold"] = stop_ok;
    cd.provenance["ampleness"] = ample_min == kInf ? 1.0 : ample_min;
  }
  cd.provenance["level_sigma"] = cd.level_sigma;
  return cd;
}

struct PartitionCheck {
  bool exact = true;
  std::size_t missing = 0;
  std::size_t duplicated = 0;
  std::size_t foreign = 0;  // cubes outside D_{Q0}
};

inline PartitionCheck check_partition(const DyadicGrid& g, const CoronaDecomposition& cd) {
  std::vector<int> count(g.cubes.size(), 0);
  PartitionCheck pc;
  auto add = [&](int c) {
    if (!g.is_within(c, cd.q0)) ++pc.foreign;
    ++count[c];
  };
  for (int b : cd.bad) add(b);
  for (const auto& S : cd.regimes)
    for (int c : S.cubes) add(c);
  for (const auto& Q : g.cubes) {
    if (!g.is_within(Q.id, cd.q0)) continue;
    if (count[Q.id] == 0) ++pc.missing;
    if (count[Q.id] > 1) ++pc.duplicated;
  }
  pc.exact = pc.missing == 0 && pc.duplicated == 0 && pc.foreign == 0;
  return pc;
}

// Splits every regime into maximal coherent pieces. A member is a new top iff it is the
// old top, its parent lies outside the regime, or one of its siblings does.
inline CoronaDecomposition coherentize(const DyadicGrid& g, const CoronaDecomposition& in) {
  CoronaDecomposition out = in;
  out.regimes.clear();
  for (const auto& S : in.regimes) {
    if (!is_semi_coherent(g, S.cubes, S.top))
      throw Error(ErrorCode::NotSemiCoherent, "regime with top " + g.cube(S.top).path + " is not semi-coherent");
    std::set<int> members(S.cubes.begin(), S.cubes.end());
    auto is_new_top = [&](int c) {
      if (c == S.top) return true;
      int p = g.cube(c).parent;
      if (!members.count(p)) return true;
      for (int sib : g.cube(p).children)
        if (!members.count(sib)) return true;
      return false;
    };
    for (int t : S.cubes) {
      if (!is_new_top(t)) continue;
      Regime R;
      R.top = t;
      R.q_s = S.q_s;
      R.x_s = S.x_s;
      R.level = S.level;
      R.coherent = true;
      std::vector<int> stack{t};
      while (!stack.empty()) {
        int c = stack.back();
        stack.pop_back();
        R.cubes.push_back(c);
        if (g.cube(c).children.empty()) R.truncated = true;
        for (int ch : g.cube(c).children)
          if (members.count(ch) && !is_new_top(ch)) stack.push_back(ch);
      }
      std::sort(R.cubes.begin(), R.cubes.end());
      out.regimes.push_back(std::move(R));
    }
  }
  update_packing(g, out);
  out.provenance["coherentized"] = true;
  return out;
}

// Every output regime lies in exactly one input regime and the unions agree.
inline bool refines(const CoronaDecomposition& fine, const CoronaDecomposition& coarse) {
  std::map<int, int> owner;
  for (std::size_t i = 0; i < coarse.regimes.size(); ++i)
    for (int c : coarse.regimes[i].cubes) owner[c] = static_cast<int>(i);
  std::set<int> seen;
  for (const auto& R : fine.regimes) {
    if (R.cubes.empty()) return false;
    auto it = owner.find(R.cubes.front());
    if (it == owner.end()) return false;
    for (int c : R.cubes) {
      auto jt = owner.find(c);
      if (jt == owner.end() || jt->second != it->second || !seen.insert(c).second) return false;
    }
  }
  return seen.size() == owner.size();
}

struct CoronaOracles {
  OmegaOracle omega;
  std::function<ValueEstimate(const Point&, const Point&)> green;  // G(X_S, X)
};

struct VerifyParams {
  std::string mode = "average";  // strong | average | green
  double tolerance = 32;
  double c = 0.25;
  int net_divisor = 8;       // green-mode net spacing c l(Q) / net_divisor
  int max_net_per_axis = 96;
};

struct RegimeVerdict {
  int top = -1;
  double worst_low = kInf;  // min over members of the ratios that must be >= 1/C
  double worst_high = 0;    // max over members of the ratios that must be <= C
  double delta_ratio = 0;   // delta(X_S) / l(Q_S)
  double dist_ratio = 0;    // dist(X_S, Q_S) / l(Q_S)
  double net_stability = 0; // green mode: relative change of the sup under net refinement
  bool pass = true;
};

struct CoronaVerdict {
  std::string mode;
  std::vector<RegimeVerdict> regimes;
  double min_constant = kInf;
  double max_constant = 0;
  double packing = 0;
  bool pass = true;
};

inline json verdict_to_json(const CoronaVerdict& v) {
  json r = json::array();
  for (const auto& x : v.regimes)
    r.push_back({{"top", x.top},
                 {"worst_low", x.worst_low},
                 {"worst_high", x.worst_high},
                 {"delta_ratio", x.delta_ratio},
                 {"dist_ratio", x.dist_ratio},
                 {"net_stability", x.net_stability},
                 {"pass", x.pass}});
  return json{{"mode", v.mode},
              {"pass", v.pass},
              {"min_constant", v.min_constant == kInf ? 0.0 : v.min_constant},
              {"max_constant", v.max_constant},
              {"packing", v.packing},
              {"regimes", r}};
}

namespace detail {

inline double sample_distance_to_cube(const DyadicGrid& g, int q, const Point& X) {
  const auto& Q = g.cube(q);
  return g.tree.nearest(X, KdTree::Filter::Inside, Q.sample_begin, Q.sample_end).distance;
}

// omega(ball) and sigma(ball) summed over leaves whose centers lie in the ball.
inline std::pair<double, double> ball_masses(const DyadicGrid& g, const DiscreteMeasure& mu, const Point& x, double r) {
  double w = 0, s = 0;
  for (int l = 0; l < g.leaf_count(); ++l) {
    const auto& L = g.cube(g.leaf_cube(l));
    if (dist(L.center, x) < r) {
      w += mu.leaf_mass[l];
      s += L.sigma;
    }
  }
  return {w, s};
}

// max G(X_S, X) / delta(X) over a lattice of B(x, R) with delta(X) >= c l.
inline double green_net_sup(const DyadicGrid& g, const CoronaOracles& o, const Point& xs, const Point& x, double R,
                            double floor_delta, double spacing, int cap) {
  const int dim = g.dim();
  int m = static_cast<int>(std::ceil(R / spacing));
  if (2 * m + 1 > cap) m = (cap - 1) / 2;
  const double h = R / std::max(1, m);
  double best = 0;
  int idx[3] = {0, 0, 0};
  const int mz = dim == 3 ? m : 0;
  for (idx[0] = -m; idx[0] <= m; ++idx[0])
    for (idx[1] = -m; idx[1] <= m; ++idx[1])
      for (idx[2] = -mz; idx[2] <= mz; ++idx[2]) {
        Point X = x + Point{idx[0] * h, idx[1] * h, idx[2] * h};
        if (dist(X, x) >= R || !g.domain.contains(X)) continue;
        const double d = g.domain.distance(X);
        if (d < floor_delta || dist(X, xs) < 1e-12) continue;
        best = std::max(best, o.green(xs, X).value / d);
      }
  return best;
}

}  // namespace detail

inline CoronaVerdict verify_corona(const DyadicGrid& g, const CoronaDecomposition& cd, const CoronaOracles& o,
                                   const VerifyParams& vp) {
  if (vp.mode != "strong" && vp.mode != "average" && vp.mode != "green")
    throw Error(ErrorCode::ModeParamMismatch, "unknown verification mode " + vp.mode);
  if (!(vp.tolerance >= 1)) throw Error(ErrorCode::PreconditionViolated, "tolerance must be at least 1");
  if (vp.mode == "green" && !(vp.c > 0 && vp.c < 0.5)) throw Error(ErrorCode::PreconditionViolated, "c must lie in (0, 1/2)");
  CoronaVerdict v;
  v.mode = vp.mode;
  v.packing = cd.packing;
  // Geometric constraints come first.
  for (const auto& S : cd.regimes) {
    if (!g.is_within(S.top, S.q_s)) throw Error(ErrorCode::GeometryViolated, "Top(S) is not inside Q_S");
    if (!g.domain.contains(S.x_s)) throw Error(ErrorCode::GeometryViolated, "X_S is not in the domain");
    if (vp.mode == "green" && g.domain.distance(S.x_s) < 4 * g.Xi * g.cube(S.q_s).len)
      throw Error(ErrorCode::GeometryViolated, "delta(X_S) < 4 Xi l(Q_S) at regime " + g.cube(S.top).path);
  }
  if (vp.mode == "green" && !o.green) throw Error(ErrorCode::OracleFailure, "green mode needs a Green oracle");
  v.regimes.resize(cd.regimes.size());
  parallel_for(
      cd.regimes.size(),
      [&](std::size_t i) {
        const auto& S = cd.regimes[i];
        RegimeVerdict& rv = v.regimes[i];
        rv.top = S.top;
        const auto& QS = g.cube(S.q_s);
        rv.delta_ratio = g.domain.distance(S.x_s) / QS.len;
        rv.dist_ratio = detail::sample_distance_to_cube(g, S.q_s, S.x_s) / QS.len;
        DiscreteMeasure mu = o.omega(S.x_s);
        auto m = cube_masses(g, mu);
        const double base = m[S.q_s] / QS.sigma;
        if (!(base > 0)) {
          rv.pass = false;
          rv.worst_low = 0;
          return;
        }
        auto low = [&](double x) { rv.worst_low = std::min(rv.worst_low, x / base); };
        auto high = [&](double x) { rv.worst_high = std::max(rv.worst_high, x / base); };
        if (vp.mode == "strong" || vp.mode == "average") {
          // delta(X_S) ~ l(Q_S) ~ dist(X_S, Q_S)
          for (double r : {rv.delta_ratio, rv.dist_ratio}) {
            rv.worst_low = std::min(rv.worst_low, r);
            rv.worst_high = std::max(rv.worst_high, r);
          }
          std::vector<double> sq;
          if (vp.mode == "strong") sq = sqrt_maximal_average(g, m);
          for (int q : S.cubes) {
            const auto& Q = g.cube(q);
            const double own = m[q] / Q.sigma;
            low(own);
            if (vp.mode == "strong") {
              high(sq[q]);
              if (sq[q] < own * (1 - 1e-12)) rv.pass = false;
            } else {
              auto b = cube_balls(g, q);
              auto [w, s] = detail::ball_masses(g, mu, Q.center, 2 * b.r_tilde);
              const double avg = s > 0 ? w / s : 0;
              high(avg);
              if (avg > 0)
                rv.worst_high = std::max(rv.worst_high, own / avg);
              else
                rv.pass = false;
            }
          }
        } else {
          rv.worst_high = std::max(rv.worst_high, rv.dist_ratio / (4 * g.Xi));
          double stab = 0;
          for (int q : S.cubes) {
            const auto& Q = g.cube(q);
            const double R = 2 * g.Xi * (Q.len / (2 * g.C1));
            const double fl = vp.c * Q.len;
            const double sp = vp.c * Q.len / vp.net_divisor;
            double s1 = detail::green_net_sup(g, o, S.x_s, Q.center, R, fl, sp, vp.max_net_per_axis);
            low(s1);
            high(s1);
            if (q == S.top) {
              double s2 = detail::green_net_sup(g, o, S.x_s, Q.center, R, fl, sp / 2, 2 * vp.max_net_per_axis);
              if (s2 > 0) stab = std::max(stab, std::abs(s2 - s1) / s2);
            }
          }
          rv.net_stability = stab;
        }
        rv.pass = rv.pass && rv.worst_low >= 1 / vp.tolerance && rv.worst_high <= vp.tolerance;
      },
      1);
  for (const auto& rv : v.regimes) {
    v.min_constant = std::min(v.min_constant, rv.worst_low);
    v.max_constant = std::max(v.max_constant, rv.worst_high);
    v.pass = v.pass && rv.pass;
  }
  return v;
}

// X_S moved inward from x_{Q_S} to distance factor * 4 Xi l(Q_S), as the green mode requires.
inline CoronaDecomposition repole_for_green(const DyadicGrid& g, const CoronaDecomposition& cd, double factor = 1.25) {
  CoronaDecomposition out = cd;
  for (auto& S : out.regimes) {
    const auto& Q = g.cube(S.q_s);
    const double want = factor * 4 * g.Xi * Q.len;
    Point n = g.domain.outward_normal(Q.center);
    Point X = Q.center - n * want;
    if (!g.domain.contains(X) || g.domain.distance(X) < 4 * g.Xi * Q.len)
      throw Error(ErrorCode::GeometryViolated, "no pole at distance 4 Xi l(Q_S) for regime " + g.cube(S.top).path);
    S.x_s = X;
  }
  out.provenance["repoled"] = factor;
  return out;
}

// P_F mu on the leaves: mass outside F kept, mass of each Q_j spread sigma-uniformly on Q_j.
inline DiscreteMeasure projected_measure(const DyadicGrid& g, const std::vector<int>& F, const DiscreteMeasure& mu) {
  check_disjoint_family(g, F);
  DiscreteMeasure out = mu;
  auto m = cube_masses(g, mu);
  for (int f : F) {
    const auto& Qj = g.cube(f);
    for (int l = Qj.leaf_begin; l < Qj.leaf_end; ++l)
      out.leaf_mass[l] = g.cube(g.leaf_cube(l)).sigma / Qj.sigma * m[f];
  }
  return out;
}

// P_F mu(A) for A a union of grid cubes.
inline double project_measure(const DyadicGrid& g, const std::vector<int>& F, const DiscreteMeasure& mu,
                              const std::vector<int>& A) {
  auto P = projected_measure(g, F, mu);
  std::vector<char> in(g.leaf_count(), 0);
  for (int a : A)
    for (int l = g.cube(a).leaf_begin; l < g.cube(a).leaf_end; ++l) in[l] = 1;
  double s = 0;
  for (int l = 0; l < g.leaf_count(); ++l)
    if (in[l]) s += P.leaf_mass[l];
  return s;
}

inline json corona_to_json(const DyadicGrid& g, const CoronaDecomposition& cd) {
  json regs = json::array();
  for (const auto& S : cd.regimes)
    regs.push_back({{"top", S.top},
                    {"q_s", S.q_s},
                    {"x_s", point_to_json(S.x_s, g.dim())},
                    {"cubes", S.cubes},
                    {"truncated", S.truncated},
                    {"coherent", S.coherent},
                    {"level", S.level}});
  return json{{"bad", cd.bad},
              {"regimes", regs},
              {"packing", {{"all", cd.packing}, {"untruncated", cd.packing_untruncated}}},
              {"provenance", cd.provenance}};
}

}  // namespace coronalab
