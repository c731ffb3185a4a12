// tegr: command-line driver for material-point runs, FE scenarios,
// density calibration and mesh inspection.
//
// Exit status: 0 success, 1 configuration error, 2 solver failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "tegr/calibrate.hpp"
#include "tegr/runner.hpp"

namespace fs = std::filesystem;
using namespace tegr;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;

struct GlobalOptions
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = ".";
  bool dry_run = false;
};

/// A name without an existing file resolves to configs/<name>.yaml in the
/// source tree.
fs::path resolve_config(const std::string& arg)
{
  if (arg.empty()) throw ConfigError("no config given (use --config <path>)");
  const fs::path p(arg);
  if (fs::exists(p)) return p;
  const fs::path bundled = fs::path(TEGR_CONFIG_DIR) / (arg + ".yaml");
  if (p.extension().empty() && fs::exists(bundled)) return bundled;
  throw ConfigError("config file not found: '" + arg + "'");
}

SimulationConfig load(const GlobalOptions& g)
{
  SimulationConfig c = load_config(resolve_config(g.config));
  if (g.seed) c.fiber.seed = *g.seed;
  if (g.threads)
  {
    if (*g.threads < 1) throw ConfigError("--threads must be at least 1");
    c.threads = *g.threads;
  }
  return c;
}

void print_parameters(const SimulationConfig& c, std::ostream& os)
{
  const MaterialParams& p = c.params;
  const std::pair<const char*, double> rows[] = {
      {"lambda", p.lambda}, {"mu", p.mu},         {"k1", p.k1},       {"k2", p.k2},
      {"kappa", p.kappa},   {"sigma_g0", p.sigma_g0}, {"r1", p.r1},   {"beta_g", p.beta_g},
      {"eta_g", p.eta_g},   {"eta_s", p.eta_s},   {"v_g", p.v_g},     {"a1", p.a1},
      {"tau", p.tau},       {"h", p.h},           {"a2", p.a2},       {"psi_crit", p.psi_crit},
      {"rho_th", p.rho_th}, {"rho_co_f", p.rho_co_f}, {"c_cell", p.c_cell},
      {"energy_per_mass_scale", p.energy_per_mass_scale}};
  os << "scenario  " << to_string(c.scenario) << "\nunits     " << to_string(c.units) << "\n";
  for (const auto& [name, v] : rows)
  {
    char line[64];
    std::snprintf(line, sizeof line, "%-22s %s", name, format_number(v, 9).c_str());
    os << line << "\n";
  }
  os << "pi_contraction         " << (p.pi_contraction == PiContraction::kDyadic ? "dyadic" : "sandwich") << "\n";
}

std::string snapshot_name(int index, double t)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "snapshot_%02d_t%06.2f.vtk", index, t);
  return buf;
}

int cmd_point_main(const GlobalOptions& g)
{
  SimulationConfig c = load(g);
  if (c.scenario != Scenario::kMaterialPoint) throw ConfigError("point needs scenario: material_point");
  c.validate();
  if (g.dry_run)
  {
    print_parameters(c, std::cout);
    return 0;
  }
  const auto rows = cmd_point(c);
  fs::create_directories(g.out);
  const fs::path path = fs::path(g.out) / "point.csv";
  write_point_csv(rows, path);
  std::cout << rows.size() << " rows -> " << path.string() << "\n";
  return 0;
}

int cmd_run_main(const GlobalOptions& g)
{
  const SimulationConfig c = load(g);
  c.validate();
  if (g.dry_run)
  {
    print_parameters(c, std::cout);
    return 0;
  }
  const fs::path out(g.out);
  const fs::path vtk_dir = out / c.outputs.vtk_dir;
  fs::create_directories(vtk_dir);
  {
    std::ofstream resolved(out / "resolved_config.yaml");
    resolved << serialize_config(c);
  }

  ScenarioModel sm = build_scenario(c);
  std::cout << "elements " << sm.model->mesh().elements.size() << ", qps " << sm.model->mesh().num_qp()
            << ", dofs " << sm.model->num_dofs() << "\n";
  int snapshots = 0;
  RunCallbacks cb;
  cb.on_step = [](const GlobalState&, const TimeSeriesRow& row, double dt) {
    char line[160];
    std::snprintf(line, sizeof line, "t=%9.4f  dt=%.4g  iters=%d  mean_rho=%.6g  mean_J=%.6f", row.time, dt,
                  row.newton_iterations, row.mean_rho_co0, row.mean_J);
    std::cout << line << std::endl;
  };
  cb.on_snapshot = [&](const GlobalState& s, double t) {
    write_vtk_snapshot(*sm.model, s, vtk_dir / snapshot_name(snapshots++, t));
  };
  const ScenarioResult res = run_scenario(c, sm, cb);
  write_timeseries_csv(res.rows, out / c.outputs.csv_path);
  std::cout << res.rows.size() << " steps, " << snapshots << " snapshots -> " << out.string() << "\n";
  if (c.perturbation && c.perturbation->mode == PerturbationMode::kLoad)
    std::cout << "perturbation arm displacement " << format_number(res.perturbation_displacement, 9) << "\n";
  return 0;
}

FreeParam parse_free(const std::string& spec)
{
  std::stringstream ss(spec);
  std::string name, lo, hi;
  if (!std::getline(ss, name, ':') || !std::getline(ss, lo, ':') || !std::getline(ss, hi) || name.empty())
    throw ConfigError("--free expects name:lower:upper, got '" + spec + "'");
  try
  {
    return {name, std::stod(lo), std::stod(hi)};
  }
  catch (const std::exception&)
  {
    throw ConfigError("--free expects numeric bounds, got '" + spec + "'");
  }
}

int cmd_calibrate_main(const GlobalOptions& g, const std::vector<std::string>& free_specs,
                       const std::string& dataset, int max_evals, bool full_mesh)
{
  const ExperimentalDataset data = load_experimental_dataset(dataset.empty() ? bundled_dataset_path() : fs::path(dataset));
  CalibrationProblem pb = CalibrationProblem::standard(data);
  if (!g.config.empty())
  {
    const SimulationConfig c = load(g);
    const StripGeometry coarse = pb.scenario.strip;
    pb.scenario = c;
    if (!full_mesh)
    {
      pb.scenario.strip.nx = coarse.nx;
      pb.scenario.strip.ny = coarse.ny;
      pb.scenario.strip.nz = coarse.nz;
    }
  }
  else if (g.threads)
    pb.scenario.threads = *g.threads;
  if (g.seed) pb.scenario.fiber.seed = *g.seed;
  if (!free_specs.empty())
  {
    pb.free.clear();
    for (const auto& s : free_specs) pb.free.push_back(parse_free(s));
  }
  pb.validate();
  pb.scenario.validate();

  std::vector<double> x0, lo, hi;
  for (const auto& f : pb.free)
  {
    MaterialParams p = pb.scenario.params;
    x0.push_back(std::clamp(param_ref(p, f.name), f.lower, f.upper));
    lo.push_back(f.lower);
    hi.push_back(f.upper);
  }
  if (g.dry_run)
  {
    print_parameters(pb.scenario, std::cout);
    for (const auto& f : pb.free)
      std::cout << "free " << f.name << " in [" << format_number(f.lower, 9) << ", " << format_number(f.upper, 9)
                << "]\n";
    return 0;
  }

  const fs::path out(g.out);
  fs::create_directories(out);
  std::ofstream report(out / "calibration.csv");
  report << "iteration";
  for (const auto& f : pb.free) report << "," << f.name;
  report << ",objective\n";

  int failures = 0;
  auto objective = [&](const std::vector<double>& x) {
    const ObjectiveValue v = calibration_objective(x, pb);
    if (v.failed)
    {
      ++failures;
      std::cerr << "warning: solver failure at";
      for (double xi : x) std::cerr << " " << format_number(xi, 9);
      std::cerr << ", penalty applied\n";
    }
    return v.value;
  };
  auto log = [&](int it, const std::vector<double>& x, double f) {
    report << it;
    for (double xi : x) report << "," << format_number(xi, 17);
    report << "," << format_number(f, 17) << std::endl;
    std::cout << "iteration " << it << "  objective " << format_number(f, 9) << std::endl;
  };
  log(0, x0, objective(x0));
  NelderMeadOptions opts;
  opts.max_evaluations = max_evals;
  const NelderMeadResult res = nelder_mead(objective, x0, lo, hi, opts, log);

  SimulationConfig fitted = pb.scenario;
  for (std::size_t i = 0; i < pb.free.size(); ++i) param_ref(fitted.params, pb.free[i].name) = res.x[i];
  std::ofstream(out / "calibrated.yaml") << serialize_config(fitted);
  std::cout << "best objective " << format_number(res.f, 9) << " after " << res.evaluations << " evaluations ("
            << failures << " solver failures)\n";
  for (std::size_t i = 0; i < pb.free.size(); ++i)
    std::cout << "  " << pb.free[i].name << " = " << format_number(res.x[i], 9) << "\n";
  return 0;
}

int cmd_mesh_main(const GlobalOptions& g)
{
  const SimulationConfig c = load(g);
  c.validate();
  const Mesh mesh = build_scenario_mesh(c);
  mesh.validate();
  std::cout << "nodes " << mesh.nodes.size() << "\nelements " << mesh.elements.size() << "\nvolume "
            << format_number(mesh.volume(), 9) << "\n";
  for (const auto& [name, ids] : mesh.node_sets)
    if (name.rfind("node_", 0) != 0) std::cout << "node set " << name << ": " << ids.size() << "\n";
  for (const auto& [name, ids] : mesh.element_sets) std::cout << "element set " << name << ": " << ids.size() << "\n";
  if (g.dry_run) return 0;
  const ScenarioModel sm = build_scenario(c);
  fs::create_directories(g.out);
  const fs::path path = fs::path(g.out) / "mesh.vtk";
  write_vtk_snapshot(*sm.model, sm.initial, path);
  std::cout << "-> " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Growth and remodeling simulations of engineered tissue"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  int threads = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Fiber field seed")->capture_default_str();
  auto* threads_opt = app.add_option("--threads", threads, "Assembly threads");
  app.add_option("--config", g.config, "Config file, or the name of a bundled config");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--dry-run", g.dry_run, "Validate and print the resolved parameters without solving");

  auto* point = app.add_subcommand("point", "Integrate a single material point");
  auto* run = app.add_subcommand("run", "Run an FE scenario");
  auto* calibrate = app.add_subcommand("calibrate", "Fit deposition parameters to the density dataset");
  auto* mesh = app.add_subcommand("mesh", "Build and export the scenario mesh");
  for (auto* sub : {point, run, calibrate, mesh})
  {
    sub->fallthrough();
    sub->add_option("config", g.config, "Config file or bundled config name");
  }
  std::vector<std::string> free_specs;
  std::string dataset;
  int max_evals = 200;
  bool full_mesh = false;
  calibrate->add_option("--free", free_specs, "Free parameter as name:lower:upper (repeatable)");
  calibrate->add_option("--dataset", dataset, "Experimental density CSV (default: bundled)");
  calibrate->add_option("--max-evals", max_evals, "Objective evaluation budget")->capture_default_str();
  calibrate->add_flag("--full-mesh", full_mesh, "Keep the config mesh instead of the 256-element strip");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (seed_opt->count()) g.seed = seed;
  if (threads_opt->count()) g.threads = threads;

  try
  {
    if (*point) return cmd_point_main(g);
    if (*run) return cmd_run_main(g);
    if (*calibrate) return cmd_calibrate_main(g, free_specs, dataset, max_evals, full_mesh);
    return cmd_mesh_main(g);
  }
  catch (const ConfigError& e)
  {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  catch (const StepRejected& e)
  {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  catch (const LocalSolveError& e)
  {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  catch (const std::invalid_argument& e)
  {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  catch (const std::exception& e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}
