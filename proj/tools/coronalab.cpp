#include <CLI11.hpp>
#include <coronalab/experiment.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace coronalab;
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string shape;
  int dim = 0;
  double radius = 0;
  double window = 0;
  int stages = -1;
  double resolution = -1;
  int depth = -1;
  double min_len = -1;
  long long paths = -1;
  long long seed = -1;
  double eps_stop = -1;
  std::string out;
  std::string omega;
  std::vector<double> pole;
  std::vector<double> point;
  std::string mode = "average";
  std::string functional = "gradL1";
  std::string coefficients = "bump";
  std::string rule;
  int N = -1;
  std::string format = "json";
  std::string report;
};

Point to_point(const std::vector<double>& v) {
  Point p;
  for (std::size_t i = 0; i < v.size() && i < 3; ++i) p[static_cast<int>(i)] = v[i];
  return p;
}

ExperimentConfig make_config(const Flags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) {
    std::ifstream is(f.config);
    if (!is) throw Error(ErrorCode::ConfigInvalid, "cannot read config " + f.config);
    json j;
    try {
      is >> j;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, std::string("config is not JSON: ") + e.what());
    }
    c = config_from_json(j);
  }
  if (!f.shape.empty()) c.domain.shape = f.shape;
  if (f.dim > 0) c.domain.dim = f.dim;
  if (f.radius > 0) c.domain.radius = f.radius;
  if (f.window > 0) c.domain.window = f.window;
  if (f.stages >= 0) c.domain.stages = f.stages;
  if (f.resolution >= 0) c.domain.resolution = f.resolution;
  if (c.domain.shape == "box" && c.domain.boxes.empty()) c.domain.boxes.push_back({Point{}, 1.0});
  if (c.domain.shape == "lipschitz_graph" && c.domain.nodes.empty()) c.domain.nodes = {{-1, 0}, {0, 0.3}, {1, 0}};
  if (f.depth >= 0) c.depth = f.depth;
  if (f.min_len >= 0) c.whitney_min_len = f.min_len;
  if (f.paths >= 0) c.paths = static_cast<std::uint64_t>(f.paths);
  if (f.seed >= 0) c.seed = static_cast<std::uint64_t>(f.seed);
  if (f.eps_stop >= 0) c.eps_stop = f.eps_stop;
  if (!f.omega.empty()) c.omega = f.omega;
  if (!f.rule.empty()) c.corona.rule = f.rule;
  if (f.N >= 0) c.corona.N = f.N;
  if (!f.out.empty()) c.output = f.out;
  validate_config(c);
  return c;
}

void write_json(const fs::path& dir, const std::string& name, const json& j) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::ofstream os(dir / name);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
  os << j.dump(2) << "\n";
}

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::InvalidSpec:
      return 2;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harmonic measure, dyadic grid and corona decomposition laboratory"};
  app.require_subcommand(1);
  Flags f;

  auto geometry_flags = [&](CLI::App* s) {
    s->add_option("--config", f.config, "JSON experiment config");
    s->add_option("--shape", f.shape, "ball|box|half_space|lipschitz_graph|four_corner|cantor_complement");
    s->add_option("--dim", f.dim, "ambient dimension (2 or 3)");
    s->add_option("--radius", f.radius, "ball radius");
    s->add_option("--window", f.window, "half-space or graph window");
    s->add_option("--stages", f.stages, "four-corner stage count");
    s->add_option("--resolution", f.resolution, "boundary sampler spacing");
  };
  auto stochastic = [&](CLI::App* s, bool required) {
    auto* a = s->add_option("--seed", f.seed, "master seed");
    auto* b = s->add_option("--paths", f.paths, "Monte Carlo paths");
    auto* c = s->add_option("--depth", f.depth, "grid depth");
    auto* d = s->add_option("--out", f.out, "output directory");
    s->add_option("--eps-stop", f.eps_stop, "walk-on-spheres stopping shell");
    s->add_option("--omega", f.omega, "auto|exact|monte_carlo");
    if (required) {
      a->required();
      b->required();
      c->required();
      d->required();
    }
  };

  auto* domain = app.add_subcommand("domain", "build a domain and export boundary samples");
  geometry_flags(domain);
  domain->add_option("--out", f.out, "output directory")->required();

  auto* grid = app.add_subcommand("grid", "build and verify a dyadic grid");
  geometry_flags(grid);
  grid->add_option("--depth", f.depth, "grid depth")->required();
  grid->add_option("--out", f.out, "output directory")->required();

  auto* whitney = app.add_subcommand("whitney", "build and verify a Whitney decomposition");
  geometry_flags(whitney);
  whitney->add_option("--min-len", f.min_len, "smallest cube side")->required();
  whitney->add_option("--out", f.out, "output directory")->required();

  auto* hm = app.add_subcommand("hm", "harmonic measure of the grid leaves");
  geometry_flags(hm);
  stochastic(hm, true);
  hm->add_option("--pole", f.pole, "pole coordinates")->expected(2, 3);

  auto* green = app.add_subcommand("green", "Green function value");
  geometry_flags(green);
  stochastic(green, true);
  green->add_option("--pole", f.pole, "pole X")->expected(2, 3)->required();
  green->add_option("--point", f.point, "evaluation point Y")->expected(2, 3)->required();

  auto* corona = app.add_subcommand("corona", "iterated stopping-time corona decomposition");
  geometry_flags(corona);
  stochastic(corona, false);
  corona->add_option("--rule", f.rule, "basic|ainfty");
  corona->add_option("--N", f.N, "stopping exponent");

  auto* verify = app.add_subcommand("verify", "verify a corona decomposition");
  geometry_flags(verify);
  stochastic(verify, false);
  verify->add_option("--rule", f.rule, "basic|ainfty");
  verify->add_option("--mode", f.mode, "strong|average|green");

  auto* cme = app.add_subcommand("cme", "full Carleson measure estimate of the default solution");
  geometry_flags(cme);
  stochastic(cme, false);

  auto* coeff = app.add_subcommand("coeff", "coefficient Carleson functional");
  geometry_flags(coeff);
  stochastic(coeff, false);
  coeff->add_option("--functional", f.functional, "fkp|divC|gradL1|osc|kp2|linf_grad");
  coeff->add_option("--coefficients", f.coefficients, "bump|identity|rotation");

  auto* run = app.add_subcommand("run", "full pipeline");
  geometry_flags(run);
  stochastic(run, true);
  run->add_option("--format", f.format, "json|csv-bundle");

  auto* render = app.add_subcommand("render", "render a saved report");
  render->add_option("--report", f.report, "report.json")->required();
  render->add_option("--format", f.format, "json|csv-bundle");
  render->add_option("--out", f.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (render->parsed()) {
      std::ifstream is(f.report);
      if (!is) throw Error(ErrorCode::IoError, "cannot read " + f.report);
      json r;
      try {
        is >> r;
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("report is not JSON: ") + e.what());
      }
      for (const auto& p : render_report(r, f.format, f.out)) std::cout << p.string() << "\n";
      return 0;
    }

    ExperimentConfig cfg = make_config(f);
    const fs::path out = cfg.output;
    const McParams mcp{cfg.paths, cfg.seed, cfg.eps_stop};

    if (run->parsed()) {
      Report r = run_experiment(cfg);
      render_report(r, "json", out);
      if (f.format != "json") render_report(r, f.format, out);
      for (const auto& s : r["stages"]) std::cout << s["name"].get<std::string>() << ": " << s["status"].get<std::string>() << "\n";
      return r["failed"].get<bool>() ? 3 : 0;
    }

    Domain D = make_domain(cfg.domain);
    if (domain->parsed()) {
      write_json(out, "domain.json",
                 {{"spec", cfg.domain}, {"components", D.component_count()}, {"boundary_measure", D.boundary_measure()}});
      std::ofstream os(out / "boundary.csv");
      write_boundary_csv(os, D.sample_boundary(), D.dim());
      std::cout << "components " << D.component_count() << " boundary_measure " << D.boundary_measure() << "\n";
      return 0;
    }
    if (whitney->parsed()) {
      auto W = build_whitney(D, cfg.whitney_min_len);
      auto chk = verify_whitney(D, W);
      std::error_code ec;
      fs::create_directories(out, ec);
      std::ofstream os(out / "whitney.csv");
      write_whitney_csv(os, W);
      write_json(out, "whitney.json",
                 {{"cubes", W.cubes.size()}, {"cutoff_hit", W.cutoff_hit}, {"ok", chk.ok()}, {"unanchored", W.unanchored}});
      std::cout << "cubes " << W.cubes.size() << " ok " << chk.ok() << "\n";
      return chk.ok() ? 0 : 3;
    }

    auto g = std::make_shared<const DyadicGrid>(build_grid(D, cfg.depth));
    if (grid->parsed()) {
      auto gr = verify_grid(*g, {0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625});
      json j = grid_to_json(*g);
      j["gamma"] = gr.gamma;
      write_json(out, "grid.json", j);
      std::cout << "cubes " << gr.cube_count << " C1 " << gr.C1 << " gamma " << gr.gamma << "\n";
      return 0;
    }
    if (hm->parsed()) {
      Point X = f.pole.empty() ? detail::default_pole(*g) : to_point(f.pole);
      auto mu = harmonic_measure_on_grid(*g, X, mcp);
      json j{{"pole", point_to_json(X, D.dim())}, {"paths", mu.paths}, {"lost", mu.lost},
             {"leaf_mass", mu.leaf_mass}, {"leaf_ci", mu.leaf_ci}};
      if (oracle::has_exact_omega(D)) j["exact"] = oracle::exact_omega(*g, X).leaf_mass;
      write_json(out, "hm.json", j);
      std::cout << "total " << mu.total() << " lost " << mu.lost << "\n";
      return 0;
    }
    if (green->parsed()) {
      auto s = green_value(D, to_point(f.pole), to_point(f.point), mcp);
      json j{{"value", s.value}, {"raw", s.raw}, {"ci", s.ci}, {"lost", s.lost}};
      if (oracle::has_exact_green(D)) j["exact"] = oracle::exact_green(D, to_point(f.pole), to_point(f.point));
      write_json(out, "green.json", j);
      std::cout << "G " << s.value << " +- " << s.ci << "\n";
      return 0;
    }

    const bool exact = detail::use_exact(cfg, D);
    OmegaOracle omega = exact ? exact_omega_oracle(g) : monte_carlo_omega_oracle(g, mcp);
    if (corona->parsed() || verify->parsed()) {
      CoronaRule rule;
      rule.kind = cfg.corona.rule == "basic" ? CoronaRule::Kind::Basic : CoronaRule::Kind::Ainfty;
      rule.basic = {cfg.corona.N, cfg.corona.N_tau};
      rule.ainfty = {cfg.corona.beta, cfg.corona.eta, cfg.corona.K1, 0};
      auto cd = iterate_corona(*g, g->by_gen[cfg.corona.q0_gen].front(), rule, corkscrew_provider(g), omega);
      if (corona->parsed()) {
        write_json(out, "corona.json", corona_to_json(*g, cd));
        std::cout << "regimes " << cd.regimes.size() << " packing " << cd.packing << "\n";
        return 0;
      }
      CoronaOracles o{omega, [&](const Point& X, const Point& Y) {
                        if (exact) return ValueEstimate{oracle::exact_green(D, X, Y), 0.0};
                        auto s = green_value(D, X, Y, mcp);
                        return ValueEstimate{s.value, s.ci};
                      }};
      VerifyParams vp;
      vp.mode = f.mode;
      vp.tolerance = cfg.corona.tolerance;
      vp.c = cfg.corona.c;
      auto v = verify_corona(*g, vp.mode == "green" ? repole_for_green(*g, cd) : cd, o, vp);
      write_json(out, "verdict.json", verdict_to_json(v));
      std::cout << "mode " << v.mode << " pass " << v.pass << "\n";
      return v.pass ? 0 : 3;
    }
    if (cme->parsed() || coeff->parsed()) {
      auto windows = cube_windows(*g, {std::min(2, g->depth)}, {1.0, 4.0}, 10);
      CarlesonReport rep;
      if (cme->parsed()) {
        rep = full_cme(D, detail::default_solution(D, mcp), windows);
      } else {
        auto A = detail::coefficient_family(f.coefficients, D);
        CoefficientField A1 = constant_field(D.dim(), identity3());
        rep = coefficient_carleson(D, A, f.functional == "fkp" ? &A1 : nullptr, f.functional, windows);
      }
      write_json(out, rep.functional + ".json", report_to_json(rep));
      std::ofstream os(out / (rep.functional + ".csv"));
      write_report_csv(os, rep);
      std::cout << rep.functional << " sup " << rep.sup << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
