#include "tegr/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "tegr/runner.hpp"

namespace tegr {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double spatial_angle_deg(const Ten2& F, const Vec3& a_ref)
{
  const Vec3 v = (F * a_ref).normalized();
  return kRadToDeg * std::atan2(v.cross(Vec3::UnitX()).norm(), v.x());
}

PointRow point_row(double t, const Ten2& F, const GaussPointState& s, const MaterialParams& p)
{
  const StressBundle b = evaluate_stress(F, s, p);
  PointRow r;
  r.t = t;
  r.rho_co0 = s.rho_co0;
  r.gamma_dot = s.gamma_dot;
  r.fiber_angle_deg = spatial_angle_deg(F, b.a_ref);
  r.psi_co = b.psi_co;
  r.tau_eig = sym_eig(b.tau_tilde).values;
  return r;
}

}  // namespace

std::vector<PointRow> cmd_point(const SimulationConfig& c)
{
  const MaterialParams& p = c.params;
  p.validate();
  const Vec3 fiber = init_fiber_field(build_scenario_mesh(c), c.fiber).front();
  GaussPointState s = GaussPointState::initial(fiber);
  LocalOptions opts;
  opts.compute_dissipation = true;

  std::vector<PointRow> rows{point_row(0.0, program_F(c.program, 0.0), s, p)};
  const double horizon = c.stepping.horizon;
  const double dt = c.stepping.dt_base;
  for (long k = 1; rows.back().t < horizon; ++k)
  {
    const double t_old = rows.back().t;
    const double t_new = std::min(horizon, std::round(k * dt * 1e9) / 1e9);
    const Ten2 F = program_F(c.program, t_new);
    StepResult r;
    try
    {
      r = integrate_point(F, t_new, t_new - t_old, s, p, opts);
    }
    catch (const LocalSolveError& e)
    {
      throw LocalSolveError("t = " + format_number(t_new, 9) + ": " + e.what(), e.residual_norm());
    }
    s = r.state_new;
    PointRow row = point_row(t_new, F, s, p);
    row.dissipation = r.dissipation;
    rows.push_back(row);
  }
  return rows;
}

void write_point_csv(const std::vector<PointRow>& rows, const std::filesystem::path& path)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "time_days,rho_co0,gamma_dot,fiber_angle_deg,psi_co,tau_1,tau_2,tau_3,"
         "d_growth_m,d_growth_co,d_remodel,d_density,d_total\n";
  for (const auto& r : rows)
  {
    const double v[] = {r.t,
                        r.rho_co0,
                        r.gamma_dot,
                        r.fiber_angle_deg,
                        r.psi_co,
                        r.tau_eig[0],
                        r.tau_eig[1],
                        r.tau_eig[2],
                        r.dissipation.term_growth_m,
                        r.dissipation.term_growth_co,
                        r.dissipation.term_remodel,
                        r.dissipation.term_density,
                        r.dissipation.total_mechanical};
    for (std::size_t i = 0; i < std::size(v); ++i) out << (i ? "," : "") << format_number(v[i], 17);
    out << "\n";
  }
}

// ------------------------------------------------------------- calibration

double& param_ref(MaterialParams& p, const std::string& name)
{
  if (name == "a1") return p.a1;
  if (name == "tau") return p.tau;
  if (name == "h") return p.h;
  if (name == "a2") return p.a2;
  if (name == "psi_crit") return p.psi_crit;
  if (name == "rho_th") return p.rho_th;
  throw ConfigError("unknown calibration parameter '" + name + "' (expected a1, tau, h, a2, psi_crit, rho_th)");
}

CalibrationProblem CalibrationProblem::standard(const ExperimentalDataset& data)
{
  CalibrationProblem pb;
  pb.scenario.scenario = Scenario::kStrip;
  pb.scenario.strip.nx = 32;
  pb.scenario.strip.ny = 4;
  pb.scenario.strip.nz = 2;
  pb.scenario.fiber.seed = 1;
  pb.scenario.outputs.snapshot_times.clear();
  pb.data = data;
  pb.free = {{"a1", 0.2e-3, 5e-3}, {"a2", 0.0, 2e-5}};
  return pb;
}

void CalibrationProblem::validate() const
{
  if (scenario.scenario != Scenario::kStrip) throw ConfigError("calibration needs the strip scenario");
  if (free.empty()) throw ConfigError("calibration: no free parameters");
  if (data.empty()) throw ConfigError("calibration: empty dataset");
  MaterialParams p = scenario.params;
  for (const auto& f : free)
  {
    param_ref(p, f.name);
    if (!(std::isfinite(f.lower) && std::isfinite(f.upper) && f.lower < f.upper))
      throw ConfigError("calibration: bounds of " + f.name + " must be finite with lower < upper");
  }
  for (const auto& r : data)
    if (!(r.high > r.low)) throw ConfigError("calibration: dataset row with zero-width range");
}

std::vector<double> simulated_density(const SimulationConfig& scenario, const std::vector<double>& days)
{
  SimulationConfig c = scenario;
  c.stepping.horizon = *std::max_element(days.begin(), days.end());
  c.stepping.event_times.insert(c.stepping.event_times.end(), days.begin(), days.end());
  c.outputs.snapshot_times.clear();
  ScenarioModel sm = build_scenario(c);
  std::vector<double> out(days.size(), std::nan(""));
  const double initial = sm.model->means(sm.initial).first;
  for (std::size_t i = 0; i < days.size(); ++i)
    if (days[i] <= 0.0) out[i] = initial;
  RunCallbacks cb;
  cb.on_step = [&](const GlobalState&, const TimeSeriesRow& row, double) {
    for (std::size_t i = 0; i < days.size(); ++i)
      if (std::abs(row.time - days[i]) < 1e-9) out[i] = row.mean_rho_co0;
  };
  run_scenario(c, sm, cb);
  return out;
}

ObjectiveValue calibration_objective(const std::vector<double>& x, const CalibrationProblem& problem)
{
  if (x.size() != problem.free.size()) throw std::invalid_argument("objective: wrong number of parameters");
  SimulationConfig c = problem.scenario;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    const FreeParam& f = problem.free[i];
    if (!(x[i] >= f.lower && x[i] <= f.upper))
      throw std::invalid_argument("objective: " + f.name + " = " + format_number(x[i], 9) + " outside [" +
                                  format_number(f.lower, 9) + ", " + format_number(f.upper, 9) + "]");
    param_ref(c.params, f.name) = x[i];
  }
  std::vector<double> days;
  for (const auto& r : problem.data) days.push_back(r.day);
  try
  {
    c.params.validate();
    const auto rho = simulated_density(c, days);
    double sse = 0.0;
    for (std::size_t i = 0; i < days.size(); ++i)
    {
      const auto& r = problem.data[i];
      const double w = 1.0 / ((r.high - r.low) * (r.high - r.low));
      sse += w * (rho[i] - r.mean) * (rho[i] - r.mean);
    }
    if (!std::isfinite(sse)) return {kObjectivePenalty, true};
    return {sse, false};
  }
  catch (const StepRejected&)
  {
    return {kObjectivePenalty, true};
  }
  catch (const LocalSolveError&)
  {
    return {kObjectivePenalty, true};
  }
  catch (const std::invalid_argument&)
  {
    return {kObjectivePenalty, true};
  }
}

// -------------------------------------------------------------- Nelder-Mead

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const std::vector<double>& lower, const std::vector<double>& upper,
                             const NelderMeadOptions& opts,
                             const std::function<void(int, const std::vector<double>&, double)>& on_iteration)
{
  const std::size_t n = x0.size();
  if (n == 0 || lower.size() != n || upper.size() != n) throw std::invalid_argument("nelder_mead: size mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (!(lower[i] <= upper[i])) throw std::invalid_argument("nelder_mead: lower > upper");

  using Point = std::vector<double>;
  auto project = [&](Point x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    return x;
  };
  NelderMeadResult res;
  auto eval = [&](const Point& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };

  std::vector<Point> simplex;
  std::vector<double> fv;
  auto build_simplex = [&](const Point& x0, double f0) {
    simplex.assign(1, x0);
    fv.assign(1, f0);
    for (std::size_t i = 0; i < n; ++i)
    {
      Point x = x0;
      const bool bounded = std::isfinite(lower[i]) && std::isfinite(upper[i]);
      const double step = opts.initial_step * (bounded ? upper[i] - lower[i] : std::max(1.0, std::abs(x0[i])));
      x[i] = x0[i] + step <= upper[i] ? x0[i] + step : x0[i] - step;
      simplex.push_back(project(std::move(x)));
      fv.push_back(eval(simplex.back()));
    }
  };
  x0 = project(std::move(x0));
  build_simplex(x0, eval(x0));

  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    std::vector<Point> s;
    std::vector<double> v;
    for (auto k : order)
    {
      s.push_back(simplex[k]);
      v.push_back(fv[k]);
    }
    simplex = std::move(s);
    fv = std::move(v);
  };
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t k = 1; k <= n; ++k)
    {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (simplex[k][i] - simplex[0][i]) * (simplex[k][i] - simplex[0][i]);
      d = std::max(d, std::sqrt(s));
    }
    double norm = 0.0;
    for (double v : simplex[0]) norm += v * v;
    return d / std::max(1.0, std::sqrt(norm));
  };
  auto combine = [&](const Point& c, const Point& w, double t) {
    Point x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = c[i] + t * (w[i] - c[i]);
    return project(std::move(x));
  };

  sort_simplex();
  for (int restart = 0;; ++restart)
  {
    const double f_start = fv[0];
    while (res.evaluations < opts.max_evaluations && diameter() >= opts.tolerance)
    {
      Point centroid(n, 0.0);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i] / static_cast<double>(n);
      const Point& worst = simplex[n];

      const Point xr = combine(centroid, worst, -1.0);
      const double fr = eval(xr);
      if (fr < fv[0])
      {
        const Point xe = combine(centroid, worst, -2.0);
        const double fe = eval(xe);
        if (fe < fr)
        {
          simplex[n] = xe;
          fv[n] = fe;
        }
        else
        {
          simplex[n] = xr;
          fv[n] = fr;
        }
      }
      else if (fr < fv[n - 1])
      {
        simplex[n] = xr;
        fv[n] = fr;
      }
      else
      {
        // Outside contraction when the reflection beats the worst vertex.
        const bool outside = fr < fv[n];
        const Point xc = outside ? combine(centroid, worst, -0.5) : combine(centroid, worst, 0.5);
        const double fc = eval(xc);
        if (fc < (outside ? fr : fv[n]))
        {
          simplex[n] = xc;
          fv[n] = fc;
        }
        else
        {
          for (std::size_t k = 1; k <= n; ++k)
          {
            simplex[k] = combine(simplex[0], simplex[k], 0.5);
            fv[k] = eval(simplex[k]);
          }
        }
      }
      sort_simplex();
      ++res.iterations;
      if (on_iteration) on_iteration(res.iterations, simplex[0], fv[0]);
    }
    // Projection can flatten the simplex onto a face; restart around the best
    // vertex until a restart no longer improves it.
    const bool improved = restart == 0 || fv[0] < f_start - opts.tolerance * (1.0 + std::abs(f_start));
    if (restart >= opts.max_restarts || !improved || res.evaluations + static_cast<int>(n) > opts.max_evaluations)
      break;
    build_simplex(simplex[0], fv[0]);
    sort_simplex();
  }
  res.x = simplex[0];
  res.f = fv[0];
  return res;
}

// --------------------------------------------------------------- histogram

OrientationHistogram direction_histogram(const std::vector<Vec3>& dirs, int axis_a, int axis_b, int bins)
{
  if (bins <= 0) throw std::invalid_argument("histogram: bins must be positive");
  if (axis_a < 0 || axis_a > 2 || axis_b < 0 || axis_b > 2 || axis_a == axis_b)
    throw std::invalid_argument("histogram: invalid plane axes");
  OrientationHistogram h;
  const double width = 90.0 / bins;
  for (int k = 0; k <= bins; ++k) h.bin_edges.push_back(k * width);
  h.percent.assign(bins, 0.0);
  std::size_t counted = 0;
  for (const Vec3& d : dirs)
  {
    const double a = std::abs(d[axis_a]), b = std::abs(d[axis_b]);
    if (a == 0.0 && b == 0.0) continue;  // normal to the plane
    const double theta = kRadToDeg * std::atan2(b, a);
    const int k = std::min(bins - 1, static_cast<int>(theta / width));
    h.percent[k] += 1.0;
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("histogram: no in-plane fiber directions");
  for (double& v : h.percent) v *= 100.0 / static_cast<double>(counted);
  return h;
}

OrientationHistogram fiber_histogram(const Model& model, const GlobalState& state, const std::string& region,
                                     int axis_a, int axis_b, int bins)
{
  const Mesh& mesh = model.mesh();
  std::vector<int> elements;
  if (region.empty() || region == "all")
  {
    elements.resize(mesh.elements.size());
    std::iota(elements.begin(), elements.end(), 0);
  }
  else
  {
    const auto it = mesh.element_sets.find(region);
    if (it == mesh.element_sets.end()) throw std::invalid_argument("histogram: unknown region '" + region + "'");
    elements = it->second;
  }
  if (elements.empty()) throw std::invalid_argument("histogram: region '" + region + "' is empty");

  const MaterialParams& p = model.params();
  std::vector<Vec3> dirs;
  for (int e : elements)
  {
    std::array<Vec3, 8> X, u;
    for (int a = 0; a < 8; ++a)
    {
      X[a] = mesh.nodes[mesh.elements[e][a]];
      u[a] = state.u[mesh.elements[e][a]];
    }
    const auto qps = hex8_quadrature(X, u);
    for (int q = 0; q < kQuadPerElement; ++q)
    {
      const GaussPointState& s = state.gp[e * kQuadPerElement + q];
      const StructureTensors st = structure_tensors(qps[q].F, s.U_gco, s.a_tilde, p.kappa);
      dirs.push_back(qps[q].F * st.a_ref);
    }
  }
  OrientationHistogram h = direction_histogram(dirs, axis_a, axis_b, bins);
  h.region = region;
  h.time = state.time;
  return h;
}

}  // namespace tegr
