#pragma once

// Material-point driver, density calibration against the experimental
// dataset, Nelder-Mead, and fiber orientation histograms.

#include <functional>
#include <string>
#include <vector>

#include "tegr/io.hpp"

namespace tegr {

// ------------------------------------------------------------ point driver

struct PointRow
{
  double t = 0.0;
  double rho_co0 = 0.0;
  double gamma_dot = 0.0;
  double fiber_angle_deg = 0.0;  ///< spatial fiber vs. e_x, in [0°, 180°]
  double psi_co = 0.0;
  std::array<double, 3> tau_eig{};  ///< descending
  DissipationReport dissipation;
};

/// Integrates one material point under program_F(c.program, t) from 0 to
/// the horizon in steps of dt_base, fiber seeded from c.fiber (first draw).
/// Row 0 is the initial state. Throws LocalSolveError with the step time.
std::vector<PointRow> cmd_point(const SimulationConfig& c);
void write_point_csv(const std::vector<PointRow>& rows, const std::filesystem::path& path);

// ------------------------------------------------------------- calibration

struct FreeParam
{
  std::string name;  ///< one of a1, tau, h, a2, psi_crit, rho_th
  double lower = 0.0, upper = 0.0;
};

/// Member of MaterialParams addressed by a calibration name; throws
/// ConfigError for unknown names.
double& param_ref(MaterialParams& p, const std::string& name);

struct CalibrationProblem
{
  std::vector<FreeParam> free;
  SimulationConfig scenario;  ///< strip; params give the fixed values
  ExperimentalDataset data;

  /// Strip of 32x4x2 elements, strip preset, free {a1, a2}.
  static CalibrationProblem standard(const ExperimentalDataset& data);
  void validate() const;
};

struct ObjectiveValue
{
  double value = 0.0;
  bool failed = false;  ///< solver failure; value is the 1e12 penalty
};

inline constexpr double kObjectivePenalty = 1e12;

/// Weighted SSE of mean ρ⁰ against the dataset means with weights
/// 1/(high - low)². Throws std::invalid_argument when x leaves the bounds.
ObjectiveValue calibration_objective(const std::vector<double>& x, const CalibrationProblem& problem);

/// Mean ρ⁰ of the scenario at each dataset day.
std::vector<double> simulated_density(const SimulationConfig& scenario, const std::vector<double>& days);

struct NelderMeadOptions
{
  int max_evaluations = 2000;
  double tolerance = 1e-6;  ///< simplex diameter relative to max(1, |x_best|)
  double initial_step = 0.05;  ///< fraction of the bound range, or of max(1, |x0_i|) when unbounded
  int max_restarts = 3;        ///< fresh simplex around the best vertex after convergence
};

struct NelderMeadResult
{
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
  int iterations = 0;
};

/// Reflection 1, expansion 2, contraction 0.5, shrink 0.5; every trial point
/// is projected onto the box. on_iteration sees the best vertex after each
/// iteration.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const std::vector<double>& lower, const std::vector<double>& upper,
                             const NelderMeadOptions& opts = {},
                             const std::function<void(int, const std::vector<double>&, double)>& on_iteration = {});

// --------------------------------------------------------------- histogram

struct OrientationHistogram
{
  std::vector<double> bin_edges;  ///< degrees, bins + 1 values from 0 to 90
  std::vector<double> percent;    ///< per bin, sums to 100
  std::string region;
  double time = 0.0;
};

/// Spatial fiber direction R ã per QP, projected onto the (axis_a, axis_b)
/// plane, angle to axis_a folded into [0°, 90°].
OrientationHistogram fiber_histogram(const Model& model, const GlobalState& state, const std::string& region,
                                     int axis_a = 0, int axis_b = 1, int bins = 30);

/// Same binning for raw directions (one per sample).
OrientationHistogram direction_histogram(const std::vector<Vec3>& dirs, int axis_a, int axis_b, int bins);

}  // namespace tegr
