#pragma once

// Total-Lagrangian quasi-static hex8 solver with Dirichlet programs and
// reaction extraction.

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "tegr/local_integrator.hpp"

namespace tegr {

inline constexpr int kQuadPerElement = 8;

struct Mesh
{
  std::vector<Vec3> nodes;
  /// Hex8 connectivity: bottom face 0-1-2-3 counter-clockwise seen from +ζ,
  /// top face 4-5-6-7 above it.
  std::vector<std::array<int, 8>> elements;
  std::map<std::string, std::vector<int>> node_sets;
  std::map<std::string, std::vector<int>> element_sets;

  std::size_t num_qp() const { return elements.size() * kQuadPerElement; }
  /// Throws std::invalid_argument on out-of-range indices or a non-positive
  /// reference Jacobian.
  void validate() const;
  double volume() const;
};

/// Thrown when a trial configuration inverts an element or a local solve
/// fails; the stepping loop reacts by cutting dt.
class StepRejected : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

struct QuadraturePoint
{
  Ten2 F;
  Eigen::Matrix<double, 8, 3> dNdX;  ///< reference shape gradients
  double w_detJ = 0.0;
};

/// 2x2x2 Gauss rule on one element. u holds the 8 nodal displacements.
/// Throws StepRejected when det F <= 0.
std::array<QuadraturePoint, kQuadPerElement> hex8_quadrature(const std::array<Vec3, 8>& X,
                                                             const std::array<Vec3, 8>& u);

/// Prescribed displacement on the masked components of every node in a set.
struct DirichletProgram
{
  std::string node_set;
  std::array<bool, 3> mask{true, true, true};
  std::function<Vec3(double)> value = [](double) { return Vec3::Zero(); };
};

struct GlobalState
{
  std::vector<Vec3> u;
  std::vector<GaussPointState> gp;
  double time = 0.0;
};

GlobalState initial_state(const Mesh& mesh, const std::vector<Vec3>& fibers);

struct TimeSeriesRow
{
  double time = 0.0;
  std::map<std::string, Vec3> reactions;  ///< per constrained node set
  double mean_rho_co0 = 0.0;              ///< volume-weighted
  double mean_J = 1.0;                    ///< volume-weighted
  int newton_iterations = 0;
  int substeps = 1;  ///< step bisections taken inside solve_step
};

struct SolverOptions
{
  int max_newton = 25;
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  int max_bisections = 8;
  int threads = 1;
  LocalOptions local;
};

struct AssemblyResult
{
  Eigen::VectorXd residual;  ///< internal force per dof (3 per node)
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<GaussPointState> trial;
  std::vector<StressBundle> stress;
};

/// Precomputed reference geometry and sparse pattern shared by all steps.
class Model
{
 public:
  Model(Mesh mesh, std::vector<DirichletProgram> programs, MaterialParams params, SolverOptions opts = {});

  const Mesh& mesh() const { return mesh_; }
  const MaterialParams& params() const { return params_; }
  const SolverOptions& options() const { return opts_; }
  std::size_t num_dofs() const { return 3 * mesh_.nodes.size(); }

  /// Internal force and tangent at displacement u, integrating every QP from
  /// gp_old over dt. guess seeds the local solves. Throws StepRejected.
  AssemblyResult assemble(const std::vector<Vec3>& u, const std::vector<GaussPointState>& gp_old,
                          const std::vector<GaussPointState>* guess, double t_new, double dt,
                          bool with_tangent = true) const;

  /// Reaction per constrained node set from an internal force vector.
  std::map<std::string, Vec3> reactions(const Eigen::VectorXd& f_int) const;

  /// One step with Newton iteration and dt bisection. Throws StepRejected
  /// after max_bisections halvings.
  std::pair<GlobalState, TimeSeriesRow> solve_step(const GlobalState& state, double t_new) const;

  /// Volume-weighted averages of ρ⁰ and J.
  std::pair<double, double> means(const GlobalState& state) const;

  /// Elementwise QP stress bundles at a converged state (dt = 0 evaluation).
  std::vector<StressBundle> stresses(const GlobalState& state) const;

 private:
  std::pair<GlobalState, TimeSeriesRow> attempt(const GlobalState& state, double t_new, int depth) const;
  bool newton(const GlobalState& state, double t_new, GlobalState& out, TimeSeriesRow& row) const;
  void apply_dirichlet(std::vector<Vec3>& u, double t) const;

  Mesh mesh_;
  std::vector<DirichletProgram> programs_;
  MaterialParams params_;
  SolverOptions opts_;
  std::vector<std::array<QuadraturePoint, kQuadPerElement>> ref_;  ///< F unused
  std::vector<int> free_index_;                                     ///< dof -> free slot or -1
  int num_free_ = 0;
};

struct RunOptions
{
  double dt_base = 0.1;
  double dt_max = 0.1;
  double horizon = 28.0;
  int grow_after = 4;
  double grow_factor = 1.5;
  /// Step ends land exactly on these times (program kinks, snapshots).
  std::vector<double> event_times;
  std::vector<double> snapshot_times;
};

struct RunCallbacks
{
  std::function<void(const GlobalState&, const TimeSeriesRow&, double dt)> on_step;
  std::function<void(const GlobalState&, double time)> on_snapshot;
};

/// Marches from the initial state to the horizon; returns one row per
/// accepted step.
std::vector<TimeSeriesRow> run_simulation(const Model& model, GlobalState state, const RunOptions& opts,
                                          const RunCallbacks& cb = {});

}  // namespace tegr
