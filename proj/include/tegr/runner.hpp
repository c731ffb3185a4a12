#pragma once

// Turns a SimulationConfig into a model and runs it, including the
// cruciform perturbation event.

#include <memory>

#include "tegr/io.hpp"

namespace tegr {

/// Outward arm displacement over time for the cruciform: zero before t0,
/// linear to `target` at t1, held afterwards.
struct ArmProgram
{
  double t0 = 0.0, t1 = 0.0, target = 0.0;
  double operator()(double t) const
  {
    if (t <= t0 || target == 0.0) return 0.0;
    if (t >= t1) return target;
    return target * (t - t0) / (t1 - t0);
  }
};

struct ScenarioModel
{
  std::unique_ptr<Model> model;
  GlobalState initial;
  /// Cruciform only; programs read it at evaluation time.
  std::shared_ptr<ArmProgram> arms;
};

Mesh build_scenario_mesh(const SimulationConfig& c);
ScenarioModel build_scenario(const SimulationConfig& c);

/// Mean outward arm reaction of a cruciform row:
/// (x_max.x - x_min.x + z_max.z - z_min.z) / 4.
double mean_arm_reaction(const TimeSeriesRow& row);

struct ScenarioResult
{
  std::vector<TimeSeriesRow> rows;
  GlobalState final_state;
  double perturbation_displacement = 0.0;
};

/// Runs the configured scenario to its horizon. Snapshot and step callbacks
/// fire as in run_simulation.
ScenarioResult run_scenario(const SimulationConfig& c, const RunCallbacks& cb = {});
ScenarioResult run_scenario(const SimulationConfig& c, ScenarioModel& sm, const RunCallbacks& cb = {});

}  // namespace tegr
