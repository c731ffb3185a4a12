#pragma once

// Simulation config (YAML with unit-tagged quantities), VTK snapshots, CSV
// time series and the bundled experimental density dataset.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tegr/scenarios.hpp"

namespace tegr {

enum class Scenario
{
  kStrip,
  kCruciform,
  kMaterialPoint,
};

/// Stress unit of the run. Values are used as given; the tag only guards
/// against mixing parameter sets.
enum class UnitSystem
{
  kMPa,
  kMicroNewtonPerMm2,
};

enum class PerturbationMode
{
  /// Arm ends move outward by fraction x arm length over the event step.
  kDisplacement,
  /// Arm ends move outward by the common displacement that raises the mean
  /// arm reaction by the given fraction at the end of the event step.
  kLoad,
};

struct Perturbation
{
  double time = 17.0;
  double fraction = 0.2;
  double duration = 0.01;
  PerturbationMode mode = PerturbationMode::kDisplacement;
};

/// Piecewise-linear deformation program for material-point runs.
struct DeformationKnot
{
  double time = 0.0;
  Ten2 F = Ten2::Identity();
};

struct SimulationConfig
{
  Scenario scenario = Scenario::kStrip;
  UnitSystem units = UnitSystem::kMPa;
  StripGeometry strip;
  CruciformGeometry cruciform;
  std::vector<DeformationKnot> program;  ///< material_point only

  MaterialParams params = MaterialParams::strip();

  struct Stepping
  {
    double dt_base = 0.1;
    double dt_max = 0.1;
    double horizon = 28.0;
    std::vector<double> event_times;
  } stepping;

  FiberInit fiber;

  struct Outputs
  {
    std::vector<double> snapshot_times{0.0, 5.0, 7.0, 10.0, 14.0, 17.0, 17.01, 21.0, 28.0};
    std::string vtk_dir = "vtk";
    std::string csv_path = "timeseries.csv";
  } outputs;

  std::optional<Perturbation> perturbation;
  int threads = 1;

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

/// Parses YAML text. Errors carry "line L, column C" of the offending node.
SimulationConfig parse_config(const std::string& text);
SimulationConfig load_config(const std::filesystem::path& path);
/// Canonical form: every field written explicitly, fixed key order.
std::string serialize_config(const SimulationConfig& c);

std::string to_string(Scenario s);
std::string to_string(UnitSystem u);

/// F(t) from the program, linear between knots and constant outside.
Ten2 program_F(const std::vector<DeformationKnot>& program, double t);

struct ExperimentalRow
{
  double day, mean, low, high;
};
using ExperimentalDataset = std::vector<ExperimentalRow>;

/// Reads day,mean,low,high rows; validates low <= mean <= high and
/// ascending days.
ExperimentalDataset load_experimental_dataset(const std::filesystem::path& path);
/// Location of the bundled dataset in the source tree.
std::filesystem::path bundled_dataset_path();

/// Shortest round-trip text for v with the given significant digits, in the
/// C locale.
std::string format_number(double v, int significant);

/// Legacy ASCII VTK 3.0 unstructured grid with point displacements and
/// QP-averaged cell fields.
void write_vtk_snapshot(const Model& model, const GlobalState& state, const std::filesystem::path& path);

inline const char* kTimeSeriesHeader = "time_days,fx_min,fx_max,fz_min,fz_max,mean_rho_co0,mean_J,newton_iters";

/// Face reactions missing from a row are written as 0. Throws
/// std::invalid_argument when times decrease.
void write_timeseries_csv(const std::vector<TimeSeriesRow>& rows, const std::filesystem::path& path);

struct TimeSeriesRecord
{
  double time_days, fx_min, fx_max, fz_min, fz_max, mean_rho_co0, mean_J;
  int newton_iters;
};
std::vector<TimeSeriesRecord> read_timeseries_csv(const std::filesystem::path& path);

}  // namespace tegr
