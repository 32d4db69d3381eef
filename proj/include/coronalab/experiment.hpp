#pragma once
#include <chrono>
#include <filesystem>
#include <fstream>

#include "corona.hpp"

namespace coronalab {

inline constexpr const char* kVersion = "coronalab 0.1.0";

struct CoronaConfig {
  bool enabled = true;
  std::string rule = "basic";  // basic | ainfty
  int N = 6;
  int N_tau = 3;
  double beta = 0.5, eta = 0.5, K1 = 4;
  int q0_gen = 0;  // Q0 is the first cube of this generation
  std::vector<std::string> verify{"average"};
  double tolerance = 32;
  double c = 0.25;
  bool coherentize = true;
  std::vector<int> depth_sweep;  // packing vs depth table
};

struct FunctionalConfig {
  std::string id;
  double tau = 0.25;
  std::vector<double> taus;         // partial_cme sensitivity sweep
  std::vector<double> radius_factors{1.0, 4.0};
  int window_gen = 2;
  std::size_t max_windows = 10;
  double q = 2;                     // rh exponent
  std::string coefficients = "bump";  // bump | identity | rotation
};

struct ExperimentConfig {
  ShapeSpec domain;
  int depth = 6;
  double whitney_min_len = 0;  // 0 picks root_length 2^-(depth+1)
  bool whitney = true;
  std::uint64_t paths = 20000;
  std::uint64_t seed = 1;
  double eps_stop = 0;
  std::string omega = "auto";  // auto | exact | monte_carlo
  CoronaConfig corona;
  std::vector<FunctionalConfig> functionals;
  std::string output = "out";
};

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& v) {
  if (j.contains(key)) v = j.at(key).get<T>();
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::ConfigInvalid, msg);
}

}  // namespace detail

inline json config_to_json(const ExperimentConfig& c) {
  json fs = json::array();
  for (const auto& f : c.functionals)
    fs.push_back({{"id", f.id},
                  {"tau", f.tau},
                  {"taus", f.taus},
                  {"radius_factors", f.radius_factors},
                  {"window_gen", f.window_gen},
                  {"max_windows", f.max_windows},
                  {"q", f.q},
                  {"coefficients", f.coefficients}});
  const auto& k = c.corona;
  return json{{"domain", c.domain},
              {"grid", {{"depth", c.depth}}},
              {"whitney", {{"enabled", c.whitney}, {"min_len", c.whitney_min_len}}},
              {"monte_carlo", {{"paths", c.paths}, {"seed", c.seed}, {"eps_stop", c.eps_stop}}},
              {"omega", c.omega},
              {"corona",
               {{"enabled", k.enabled},
                {"rule", k.rule},
                {"N", k.N},
                {"N_tau", k.N_tau},
                {"beta", k.beta},
                {"eta", k.eta},
                {"K1", k.K1},
                {"q0_gen", k.q0_gen},
                {"verify", k.verify},
                {"tolerance", k.tolerance},
                {"c", k.c},
                {"coherentize", k.coherentize},
                {"depth_sweep", k.depth_sweep}}},
              {"functionals", fs},
              {"output", c.output}};
}

inline void validate_config(const ExperimentConfig& c) {
  using detail::require;
  require(c.depth >= 0 && c.depth <= kMaxGridDepth, "grid depth must lie in [0, 16]");
  require(c.whitney_min_len >= 0, "whitney min_len must be nonnegative");
  require(c.paths >= 1, "paths must be positive");
  require(c.eps_stop >= 0, "eps_stop must be nonnegative");
  require(c.omega == "auto" || c.omega == "exact" || c.omega == "monte_carlo", "omega must be auto|exact|monte_carlo");
  const auto& k = c.corona;
  require(k.rule == "basic" || k.rule == "ainfty", "corona rule must be basic|ainfty");
  require(k.N >= 2 && k.N_tau >= 0, "corona needs N >= 2 and N_tau >= 0");
  require(k.beta > 0 && k.beta < 1 && k.eta > 0 && k.eta < 1 && k.K1 >= 1, "ainfty parameters out of range");
  require(k.q0_gen >= 0 && k.q0_gen <= c.depth, "q0_gen must lie within the grid");
  require(k.tolerance >= 1 && k.c > 0 && k.c < 0.5, "verification tolerance >= 1 and c in (0, 1/2)");
  for (const auto& m : k.verify) require(m == "strong" || m == "average" || m == "green", "unknown verify mode " + m);
  for (int d : k.depth_sweep) require(d >= 0 && d <= kMaxGridDepth, "sweep depth must lie in [0, 16]");
  static const std::set<std::string> ids{"fkp", "divC", "gradL1", "osc", "kp2", "linf_grad",
                                         "partial_cme", "full_cme", "packing", "rh"};
  for (const auto& f : c.functionals) {
    require(ids.count(f.id) == 1, "unknown functional " + f.id);
    require(f.tau > 0 && f.tau < 0.5, "tau must lie in (0, 1/2)");
    for (double t : f.taus) require(t > 0 && t < 0.5, "tau must lie in (0, 1/2)");
    require(f.q >= 1, "rh exponent must be at least 1");
    require(f.window_gen >= 0 && f.window_gen <= c.depth, "window generation must lie within the grid");
    require(f.coefficients == "bump" || f.coefficients == "identity" || f.coefficients == "rotation",
            "coefficients must be bump|identity|rotation");
  }
}

inline ExperimentConfig config_from_json(const json& j) {
  using detail::read_opt;
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "config must be a JSON object");
    if (!j.contains("domain")) throw Error(ErrorCode::ConfigInvalid, "config needs a domain");
    c.domain = j.at("domain").get<ShapeSpec>();
    if (j.contains("grid")) read_opt(j["grid"], "depth", c.depth);
    if (j.contains("whitney")) {
      read_opt(j["whitney"], "enabled", c.whitney);
      read_opt(j["whitney"], "min_len", c.whitney_min_len);
    }
    if (j.contains("monte_carlo")) {
      const auto& m = j["monte_carlo"];
      read_opt(m, "paths", c.paths);
      read_opt(m, "seed", c.seed);
      read_opt(m, "eps_stop", c.eps_stop);
    }
    read_opt(j, "omega", c.omega);
    read_opt(j, "output", c.output);
    if (j.contains("corona")) {
      const auto& k = j["corona"];
      auto& o = c.corona;
      read_opt(k, "enabled", o.enabled);
      read_opt(k, "rule", o.rule);
      read_opt(k, "N", o.N);
      read_opt(k, "N_tau", o.N_tau);
      read_opt(k, "beta", o.beta);
      read_opt(k, "eta", o.eta);
      read_opt(k, "K1", o.K1);
      read_opt(k, "q0_gen", o.q0_gen);
      read_opt(k, "verify", o.verify);
      read_opt(k, "tolerance", o.tolerance);
      read_opt(k, "c", o.c);
      read_opt(k, "coherentize", o.coherentize);
      read_opt(k, "depth_sweep", o.depth_sweep);
    }
    if (j.contains("functionals")) {
      for (const auto& f : j["functionals"]) {
        FunctionalConfig fc;
        if (f.is_string()) {
          fc.id = f.get<std::string>();
        } else {
          read_opt(f, "id", fc.id);
          read_opt(f, "tau", fc.tau);
          read_opt(f, "taus", fc.taus);
          read_opt(f, "radius_factors", fc.radius_factors);
          read_opt(f, "window_gen", fc.window_gen);
          read_opt(f, "max_windows", fc.max_windows);
          read_opt(f, "q", fc.q);
          read_opt(f, "coefficients", fc.coefficients);
        }
        c.functionals.push_back(fc);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("malformed config: ") + e.what());
  }
  validate_config(c);
  return c;
}

// FNV-1a over the canonical serialization (sorted keys, no whitespace).
inline std::string config_hash(const ExperimentConfig& c) {
  std::string s = config_to_json(c).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

using Report = json;

namespace detail {

inline bool use_exact(const ExperimentConfig& c, const Domain& D) {
  if (c.omega == "exact") {
    if (!oracle::has_exact_omega(D)) throw Error(ErrorCode::OracleFailure, "no closed-form harmonic measure");
    return true;
  }
  return c.omega == "auto" && oracle::has_exact_omega(D);
}

inline McParams mc_params(const ExperimentConfig& c) { return McParams{c.paths, c.seed, c.eps_stop}; }

// Interior pole at the corkscrew point of the root cube.
inline Point default_pole(const DyadicGrid& g) {
  for (const auto& Q : g.cubes)
    if (auto P = corkscrew_for_cube(g, Q.id)) return *P;
  throw Error(ErrorCode::OracleFailure, "no corkscrew point on this grid");
}

inline SolutionField default_solution(const Domain& D, const McParams& p) {
  if (auto* b = oracle::as_ball(D); b && D.dim() == 2) return exact_arc_field(D, 0, kPi);
  if (oracle::is_half_space(D) && D.dim() == 2) {
    double w = D.spec().window;
    return exact_interval_field(-w / 4, w / 4);
  }
  if (D.spec().shape == "four_corner") return four_corner_bottom_field(D);
  Point n;
  n[D.dim() - 1] = 1;
  return boundary_solution(D, halfspace_target("upper", n, D.bounds().center()[D.dim() - 1]), p, 64);
}

inline CoefficientField coefficient_family(const std::string& kind, const Domain& D) {
  const int dim = D.dim();
  if (kind == "identity") return constant_field(dim, identity3());
  const Point c = D.bounded() ? D.bounds().center() : Point{};
  const double rho = 0.25 * D.bounds().max_side();
  Mat3 E{};
  if (kind == "bump") {
    E[1] = E[3] = 1;
  } else {
    E[1] = 1;
    E[3] = -1;
  }
  CoefficientField f;
  f.dim = dim;
  f.A = [c, rho, E](const Point& X) {
    double q = dot(X - c, X - c) / (rho * rho);
    double b = q < 1 ? (1 - q) * (1 - q) : 0;
    Mat3 m = identity3();
    for (int i = 0; i < 9; ++i) m[i] += b * E[i];
    return m;
  };
  f.dA = [c, rho, E, dim](const Point& X) {
    std::array<Mat3, 3> o{};
    double q = dot(X - c, X - c) / (rho * rho);
    if (q >= 1) return o;
    for (int k = 0; k < dim; ++k) {
      double db = -4 * (1 - q) * (X[k] - c[k]) / (rho * rho);
      for (int i = 0; i < 9; ++i) o[k][i] = db * E[i];
    }
    return o;
  };
  return f;
}

}  // namespace detail

// Runs domain -> grid -> whitney -> measures -> corona -> verify -> functionals. A failing
// stage is recorded with its error and every later stage is marked skipped.
inline Report run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  Report rep;
  rep["provenance"] = {{"config_hash", config_hash(cfg)},
                       {"seed", cfg.seed},
                       {"paths", cfg.paths},
                       {"version", kVersion},
                       {"config", config_to_json(cfg)}};
  rep["stages"] = json::array();
  rep["timing"] = json::object();
  bool failed = false;
  std::optional<Domain> D;
  std::shared_ptr<const DyadicGrid> g;
  std::optional<CoronaDecomposition> cd;
  std::optional<OmegaOracle> omega;
  const McParams mcp = detail::mc_params(cfg);

  auto stage = [&](const std::string& name, auto&& body) {
    json st{{"name", name}};
    if (failed) {
      st["status"] = "skipped";
      rep["stages"].push_back(st);
      return;
    }
    auto t0 = std::chrono::steady_clock::now();
    try {
      st["data"] = body();
      st["status"] = "ok";
    } catch (const Error& e) {
      st["status"] = "failed";
      st["error"] = {{"code", "StageFailed"}, {"stage", name}, {"cause", to_string(e.code())}, {"message", e.what()}};
      failed = true;
    } catch (const std::exception& e) {
      st["status"] = "failed";
      st["error"] = {{"code", "StageFailed"}, {"stage", name}, {"cause", "Internal"}, {"message", e.what()}};
      failed = true;
    }
    rep["timing"][name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep["stages"].push_back(st);
  };

  stage("domain", [&] {
    D.emplace(make_domain(cfg.domain));
    return json{{"dim", D->dim()},
                {"components", D->component_count()},
                {"bounded", D->bounded()},
                {"boundary_measure", D->boundary_measure()},
                {"root_length", D->root_length()}};
  });
  stage("grid", [&] {
    g = std::make_shared<const DyadicGrid>(build_grid(*D, cfg.depth));
    auto gr = verify_grid(*g, {0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625});
    json strips = json::array();
    for (const auto& s : gr.strips) strips.push_back({{"tau", s.tau}, {"max_fraction", s.max_fraction}});
    return json{{"cubes", gr.cube_count},
                {"samples", gr.sample_count},
                {"C1", gr.C1},
                {"Xi", g->Xi},
                {"partition", gr.partition_ok},
                {"nesting", gr.nesting_ok},
                {"ancestry", gr.ancestry_ok},
                {"containment", gr.containment_ok},
                {"gamma", gr.gamma},
                {"strips", strips}};
  });
  stage("whitney", [&] {
    if (!cfg.whitney) return json{{"enabled", false}};
    double ml = cfg.whitney_min_len > 0 ? cfg.whitney_min_len : std::ldexp(D->root_length(), -(cfg.depth + 1));
    auto W = build_whitney(*D, ml);
    auto chk = verify_whitney(*D, W);
    return json{{"enabled", true},
                {"cubes", W.cubes.size()},
                {"min_len", ml},
                {"cutoff_hit", W.cutoff_hit},
                {"unanchored", W.unanchored},
                {"violations", chk.distance_violations + chk.neighbor_violations + chk.overlap_violations}};
  });
  stage("measures", [&] {
    const bool exact = detail::use_exact(cfg, *D);
    omega = exact ? exact_omega_oracle(g) : monte_carlo_omega_oracle(g, mcp);
    Point X = detail::default_pole(*g);
    auto mu = (*omega)(X);
    double ci = 0;
    for (double c : mu.leaf_ci) ci = std::max(ci, c);
    json out{{"oracle", exact ? "exact" : "monte_carlo"},
             {"pole", point_to_json(X, D->dim())},
             {"total", mu.total()},
             {"max_leaf_ci", ci},
             {"lost", mu.lost},
             {"leaf_mass", mu.leaf_mass}};
    if (D->mode() == DomainMode::Union) {
      Point Y = X + (D->nearest_boundary_point(X) - X) * 0.5;
      if (exact) {
        out["green"] = {{"value", oracle::exact_green(*D, X, Y)}, {"ci", 0.0}};
      } else {
        auto gs = green_value(*D, X, Y, mcp);
        out["green"] = {{"value", gs.value}, {"raw", gs.raw}, {"ci", gs.ci}};
      }
    }
    return out;
  });
  stage("corona", [&] {
    if (!cfg.corona.enabled) return json{{"enabled", false}};
    CoronaRule rule;
    rule.kind = cfg.corona.rule == "basic" ? CoronaRule::Kind::Basic : CoronaRule::Kind::Ainfty;
    rule.basic = {cfg.corona.N, cfg.corona.N_tau};
    rule.ainfty = {cfg.corona.beta, cfg.corona.eta, cfg.corona.K1, 0};
    int q0 = g->by_gen[cfg.corona.q0_gen].front();
    cd = iterate_corona(*g, q0, rule, corkscrew_provider(g), *omega);
    auto pc = check_partition(*g, *cd);
    json out = corona_to_json(*g, *cd);
    out["partition_exact"] = pc.exact;
    if (cfg.corona.coherentize) {
      auto co = coherentize(*g, *cd);
      out["coherent"] = {{"regimes", co.regimes.size()}, {"packing", co.packing}, {"refines", refines(co, *cd)}};
    }
    json sweep = json::array();
    for (int d : cfg.corona.depth_sweep) {
      auto gs = std::make_shared<const DyadicGrid>(build_grid(*D, d));
      OmegaOracle om = detail::use_exact(cfg, *D) ? exact_omega_oracle(gs) : monte_carlo_omega_oracle(gs, mcp);
      auto c2 = iterate_corona(*gs, gs->by_gen[cfg.corona.q0_gen].front(), rule, corkscrew_provider(gs), om);
      sweep.push_back({{"depth", d}, {"packing", c2.packing}, {"regimes", c2.regimes.size()}});
    }
    out["depth_sweep"] = sweep;
    return out;
  });
  stage("verify", [&] {
    json out = json::array();
    if (!cd) return out;
    CoronaOracles o;
    o.omega = *omega;
    const Domain dom = *D;
    if (detail::use_exact(cfg, dom)) {
      o.green = [dom](const Point& X, const Point& Y) { return ValueEstimate{oracle::exact_green(dom, X, Y), 0.0}; };
    } else {
      o.green = [dom, mcp](const Point& X, const Point& Y) {
        auto s = green_value(dom, X, Y, mcp);
        return ValueEstimate{s.value, s.ci};
      };
    }
    for (const auto& mode : cfg.corona.verify) {
      VerifyParams vp;
      vp.mode = mode;
      vp.tolerance = cfg.corona.tolerance;
      vp.c = cfg.corona.c;
      CoronaVerdict v = mode == "green" ? verify_corona(*g, repole_for_green(*g, *cd), o, vp) : verify_corona(*g, *cd, o, vp);
      out.push_back(verdict_to_json(v));
    }
    return out;
  });
  stage("functionals", [&] {
    json out = json::array();
    for (const auto& f : cfg.functionals) {
      auto windows = cube_windows(*g, {f.window_gen}, f.radius_factors, f.max_windows);
      json r;
      if (f.id == "packing") {
        if (!cd) throw Error(ErrorCode::PreconditionViolated, "packing needs a corona");
        auto p = packing_norm(*g, top_alpha(*g, *cd, true), {cd->q0});
        r = {{"functional", "packing"}, {"sup", p.norm}, {"argmax", p.argmax}, {"error", 0.0}};
      } else if (f.id == "rh") {
        Point X = detail::default_pole(*g);
        auto mu = (*omega)(X);
        const auto& Q = g->cube(g->by_gen[f.window_gen].front());
        auto rh = reverse_holder(*g, mu, f.q, Q.center, Q.len);
        r = {{"functional", "rh"}, {"lhs", rh.lhs}, {"rhs", rh.rhs}, {"sup", rh.ratio}, {"error", 0.0}};
      } else if (f.id == "full_cme") {
        r = report_to_json(full_cme(*D, detail::default_solution(*D, mcp), windows));
      } else if (f.id == "partial_cme") {
        auto u = detail::default_solution(*D, mcp);
        auto fam = corkscrew_family(*g, std::min(g->depth, f.window_gen + 2));
        r = report_to_json(partial_cme(*g, u, fam, f.tau, {}));
        json sens = json::array();
        for (double t : f.taus) sens.push_back({{"tau", t}, {"sup", partial_cme(*g, u, fam, t, {}).sup}});
        r["tau_sweep"] = sens;
      } else {
        auto A = detail::coefficient_family(f.coefficients, *D);
        CoefficientField A1 = constant_field(D->dim(), identity3());
        const CoefficientField* second = f.id == "fkp" ? &A1 : nullptr;
        r = report_to_json(coefficient_carleson(*D, A, second, f.id, windows));
      }
      out.push_back(r);
    }
    return out;
  });
  rep["failed"] = failed;
  return rep;
}

// The report without wall-clock entries.
inline json numeric_payload(const Report& r) {
  json p = r;
  p.erase("timing");
  return p;
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream os(p);
  if (!os) throw Error(ErrorCode::IoError, "cannot open " + p.string());
  os << body;
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + p.string());
}

inline const json* stage_data(const Report& r, const std::string& name) {
  if (!r.contains("stages")) return nullptr;
  for (const auto& s : r["stages"])
    if (s.value("name", "") == name && s.value("status", "") == "ok" && s.contains("data")) return &s["data"];
  return nullptr;
}

}  // namespace detail

// format: json -> report.json; csv-bundle -> one table per file, each with a header row.
inline std::vector<std::filesystem::path> render_report(const Report& r, const std::string& format,
                                                        const std::filesystem::path& dir) {
  if (!r.is_object() || !r.contains("stages") || r["stages"].empty())
    throw Error(ErrorCode::IoError, "report is empty");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  std::vector<std::filesystem::path> out;
  if (format == "json") {
    out.push_back(dir / "report.json");
    detail::write_file(out.back(), r.dump(2));
    return out;
  }
  if (format != "csv-bundle") throw Error(ErrorCode::IoError, "unknown format " + format);
  auto table = [&](const std::string& name, const std::string& header, const std::vector<std::string>& rows) {
    std::string body = header + "\n";
    for (const auto& row : rows) body += row + "\n";
    out.push_back(dir / name);
    detail::write_file(out.back(), body);
  };
  auto num = [](double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return std::string(b);
  };
  std::vector<std::string> rows;
  rows.push_back("config_hash," + r["provenance"].value("config_hash", ""));
  rows.push_back("seed," + std::to_string(r["provenance"].value("seed", 0ULL)));
  table("provenance.csv", "key,value", rows);
  if (auto* gd = detail::stage_data(r, "grid")) {
    rows.clear();
    for (const auto& s : gd->at("strips")) rows.push_back(num(s["tau"]) + "," + num(s["max_fraction"]));
    table("strip_vs_tau.csv", "tau,max_fraction", rows);
  }
  if (auto* cdj = detail::stage_data(r, "corona"); cdj && cdj->contains("regimes")) {
    rows.clear();
    const auto& ls = cdj->at("provenance").at("level_sigma");
    for (std::size_t k = 0; k < ls.size(); ++k) rows.push_back(std::to_string(k) + "," + num(ls[k]));
    table("corona_levels.csv", "level,sigma", rows);
    rows.clear();
    for (const auto& s : cdj->at("depth_sweep")) rows.push_back(std::to_string(s["depth"].get<int>()) + "," + num(s["packing"]));
    table("packing_vs_depth.csv", "depth,packing", rows);
  }
  if (auto* fd = detail::stage_data(r, "functionals")) {
    for (const auto& f : *fd) {
      const std::string id = f.value("functional", "unknown");
      rows.clear();
      if (f.contains("windows"))
        for (const auto& w : f["windows"]) rows.push_back(w["id"].get<std::string>() + "," + num(w["value"]));
      else
        rows.push_back(id + "," + num(f["sup"]));
      table("carleson_" + id + ".csv", "window_id,value", rows);
      if (f.contains("tau_sweep")) {
        rows.clear();
        for (const auto& t : f["tau_sweep"]) rows.push_back(num(t["tau"]) + "," + num(t["sup"]));
        table("cme_vs_tau.csv", "tau,value", rows);
      }
    }
  }
  return out;
}

}  // namespace coronalab
