#include "tegr/runner.hpp"

#include <algorithm>
#include <cmath>

namespace tegr {

namespace {

Mesh material_point_mesh()
{
  StripGeometry g;
  g.length = g.width = g.thickness = 1.0;
  g.nx = g.ny = g.nz = 1;
  Mesh m = build_strip_mesh(g);
  for (std::size_t n = 0; n < m.nodes.size(); ++n) m.node_sets["node_" + std::to_string(n)] = {static_cast<int>(n)};
  return m;
}

RunOptions run_options(const SimulationConfig& c)
{
  RunOptions ro;
  ro.dt_base = c.stepping.dt_base;
  ro.dt_max = c.stepping.dt_max;
  ro.horizon = c.stepping.horizon;
  ro.event_times = c.stepping.event_times;
  ro.snapshot_times = c.outputs.snapshot_times;
  if (c.perturbation)
  {
    ro.event_times.push_back(c.perturbation->time);
    ro.event_times.push_back(c.perturbation->time + c.perturbation->duration);
  }
  for (const auto& k : c.program) ro.event_times.push_back(k.time);
  return ro;
}

}  // namespace

Mesh build_scenario_mesh(const SimulationConfig& c)
{
  switch (c.scenario)
  {
    case Scenario::kStrip: return build_strip_mesh(c.strip);
    case Scenario::kCruciform: return build_cruciform_mesh(c.cruciform);
    case Scenario::kMaterialPoint: return material_point_mesh();
  }
  throw ConfigError("unknown scenario");
}

ScenarioModel build_scenario(const SimulationConfig& c)
{
  Mesh mesh = build_scenario_mesh(c);
  std::vector<DirichletProgram> progs;
  ScenarioModel sm;
  const std::array<bool, 3> all{true, true, true};
  switch (c.scenario)
  {
    case Scenario::kStrip:
      progs.push_back({"x_min_face", all, [](double) { return Vec3::Zero(); }});
      progs.push_back({"x_max_face", all, [](double) { return Vec3::Zero(); }});
      break;
    case Scenario::kCruciform:
    {
      sm.arms = std::make_shared<ArmProgram>();
      if (c.perturbation)
      {
        sm.arms->t0 = c.perturbation->time;
        sm.arms->t1 = c.perturbation->time + c.perturbation->duration;
        if (c.perturbation->mode == PerturbationMode::kDisplacement)
          sm.arms->target = c.perturbation->fraction * c.cruciform.arm_length;
      }
      const auto arms = sm.arms;
      progs.push_back({"x_min_face", all, [arms](double t) { return Vec3(-(*arms)(t), 0, 0); }});
      progs.push_back({"x_max_face", all, [arms](double t) { return Vec3((*arms)(t), 0, 0); }});
      progs.push_back({"z_min_face", all, [arms](double t) { return Vec3(0, 0, -(*arms)(t)); }});
      progs.push_back({"z_max_face", all, [arms](double t) { return Vec3(0, 0, (*arms)(t)); }});
      break;
    }
    case Scenario::kMaterialPoint:
      for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
      {
        const Vec3 X = mesh.nodes[n];
        const auto program = c.program;
        progs.push_back({"node_" + std::to_string(n), all,
                         [X, program](double t) { return Vec3((program_F(program, t) - Ten2::Identity()) * X); }});
      }
      break;
  }
  SolverOptions so;
  so.threads = c.threads;
  sm.model = std::make_unique<Model>(std::move(mesh), std::move(progs), c.params, so);
  sm.initial = initial_state(sm.model->mesh(), init_fiber_field(sm.model->mesh(), c.fiber));
  return sm;
}

double mean_arm_reaction(const TimeSeriesRow& row)
{
  auto get = [&](const char* name, int comp) {
    const auto it = row.reactions.find(name);
    return it == row.reactions.end() ? 0.0 : it->second[comp];
  };
  return 0.25 * (get("x_max_face", 0) - get("x_min_face", 0) + get("z_max_face", 2) - get("z_min_face", 2));
}

ScenarioResult run_scenario(const SimulationConfig& c, const RunCallbacks& cb)
{
  ScenarioModel sm = build_scenario(c);
  return run_scenario(c, sm, cb);
}

ScenarioResult run_scenario(const SimulationConfig& c, ScenarioModel& sm, const RunCallbacks& cb)
{
  const Model& model = *sm.model;
  RunOptions ro = run_options(c);
  ScenarioResult res;
  GlobalState state = sm.initial;

  const bool load_event = c.scenario == Scenario::kCruciform && c.perturbation &&
                          c.perturbation->mode == PerturbationMode::kLoad && c.perturbation->time < ro.horizon;
  auto track = cb;
  track.on_step = [&](const GlobalState& s, const TimeSeriesRow& row, double dt) {
    state = s;
    if (cb.on_step) cb.on_step(s, row, dt);
  };

  if (!load_event)
  {
    res.rows = run_simulation(model, state, ro, track);
    res.final_state = state;
    res.perturbation_displacement = sm.arms ? sm.arms->target : 0.0;
    return res;
  }

  // Segment 1: up to the event.
  const Perturbation& pt = *c.perturbation;
  const double t1 = pt.time + pt.duration;
  RunOptions first = ro;
  first.horizon = pt.time;
  std::erase_if(first.snapshot_times, [&](double t) { return t > pt.time + 1e-9; });
  res.rows = run_simulation(model, state, first, track);
  const double before = res.rows.empty() ? 0.0 : mean_arm_reaction(res.rows.back());
  const double goal = (1.0 + pt.fraction) * before;

  // Secant iteration on the common arm displacement.
  auto trial = [&](double delta) {
    sm.arms->target = delta;
    return model.solve_step(state, t1);
  };
  auto residual = [&](const TimeSeriesRow& r) { return mean_arm_reaction(r) - goal; };
  const double scale = std::max(std::abs(goal), 1e-300);
  double d0 = 0.0;
  auto best = trial(d0);
  double g0 = residual(best.second);
  double d1 = 1e-4 * c.cruciform.arm_length * (goal >= 0.0 ? 1.0 : -1.0);
  for (int it = 0; it < 60 && std::abs(g0) > 1e-8 * scale; ++it)
  {
    std::pair<GlobalState, TimeSeriesRow> step;
    try
    {
      step = trial(d1);
    }
    catch (const StepRejected&)
    {
      d1 = 0.5 * (d0 + d1);
      continue;
    }
    const double g1 = residual(step.second);
    const double d_next = g1 == g0 ? d1 : d1 - g1 * (d1 - d0) / (g1 - g0);
    d0 = d1;
    g0 = g1;
    best = std::move(step);
    // Limit each secant move to a doubling of the current displacement.
    const double cap = 2.0 * std::max(std::abs(d1), 1e-4 * c.cruciform.arm_length);
    d1 = std::clamp(d_next, d1 - cap, d1 + cap);
  }
  if (std::abs(g0) > 1e-6 * scale)
    throw StepRejected("perturbation: could not reach the target arm reaction");
  sm.arms->target = d0;
  res.perturbation_displacement = d0;
  state = std::move(best.first);
  if (cb.on_step) cb.on_step(state, best.second, pt.duration);
  res.rows.push_back(std::move(best.second));
  const bool snap_t1 = std::any_of(ro.snapshot_times.begin(), ro.snapshot_times.end(),
                                   [&](double t) { return std::abs(t - t1) < 1e-9; });
  if (cb.on_snapshot && snap_t1) cb.on_snapshot(state, t1);

  // Segment 2: to the horizon.
  RunOptions second = ro;
  std::erase_if(second.snapshot_times, [&](double t) { return t <= t1 + 1e-9; });
  auto rest = run_simulation(model, state, second, track);
  res.rows.insert(res.rows.end(), rest.begin(), rest.end());
  res.final_state = state;
  return res;
}

}  // namespace tegr
