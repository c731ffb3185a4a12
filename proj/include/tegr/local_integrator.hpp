#pragma once

// Implicit exponential integration of the 17 internal unknowns at one
// integration point, and the material tangent dS/dC.

#include <stdexcept>

#include "tegr/growth_laws.hpp"

namespace tegr {

/// Unknown vector layout:
///   [0, 6)   U_gm   (SymTen2 component order)
///   [6, 12)  U_gco
///   [12, 15) ã
///   15       γ̇
///   16       ρ⁰_co
inline constexpr int kLocalSize = 17;
using LocalVector = Eigen::Matrix<double, kLocalSize, 1>;
using LocalMatrix = Eigen::Matrix<double, kLocalSize, kLocalSize>;

LocalVector flatten(const GaussPointState& s);
GaussPointState unflatten(const LocalVector& z);

/// Time discretization of the cell-driven deposition term.
enum class BioIntegration
{
  /// a1 c (W(t_new) - W(t_old)), W the Weibull CDF
  kExactIncrement,
  /// dt a1 c W'(t_new)
  kBackwardEuler,
};

/// Discrete update of the fiber direction over one step.
enum class FiberUpdate
{
  /// Rotate ã_old toward the implicit target by the closed-form solution of
  /// θ̇ = -(π / 2η_s) sin θ over dt.
  kExactRotation,
  /// ã = normalize(ã_old + dt · rate(ã, τ̃)), first order.
  kNormalizedEuler,
};

struct LocalOptions
{
  double tol = 1e-10;
  int max_iter = 50;
  int max_depth = 10;
  double fd_step = 1e-7;
  BioIntegration bio = BioIntegration::kExactIncrement;
  FiberUpdate fiber = FiberUpdate::kExactRotation;
  bool compute_tangent = false;
  bool compute_dissipation = false;
};

LocalVector local_residual(const LocalVector& z, const Kinematics& kin, double t_new, double dt,
                           const GaussPointState& state_old, const MaterialParams& p,
                           const LocalOptions& opts = {});
LocalVector local_residual(const LocalVector& z, const Ten2& F_new, double t_new, double dt,
                           const GaussPointState& state_old, const MaterialParams& p,
                           const LocalOptions& opts = {});

/// Forward-difference Jacobian of local_residual with step fd_step * max(1, |z_i|).
/// When the two largest eigenvalues of τ̃ are too close to resolve under the
/// difference step, the fiber target is held at its value at z.
LocalMatrix local_jacobian(const LocalVector& z, const Kinematics& kin, double t_new, double dt,
                           const GaussPointState& state_old, const MaterialParams& p,
                           const LocalOptions& opts = {});

struct StepResult
{
  GaussPointState state_new;
  StressBundle stress;
  int iterations = 0;
  double residual_norm = 0.0;
  int substeps = 1;
  DissipationReport dissipation;
  /// dS/dC with the internal variables following implicitly; filled when
  /// LocalOptions::compute_tangent is set.
  Ten4Minor tangent;
};

class LocalSolveError : public std::runtime_error
{
 public:
  LocalSolveError(const std::string& what, double residual_norm)
      : std::runtime_error(what), residual_norm_(residual_norm)
  {
  }
  double residual_norm() const { return residual_norm_; }

 private:
  double residual_norm_;
};

/// Newton solve of the local system from state_old (or from guess when
/// given) with dt bisection on failure. Throws LocalSolveError.
StepResult integrate_point(const Kinematics& kin, double t_new, double dt, const GaussPointState& state_old,
                           const MaterialParams& p, const LocalOptions& opts = {},
                           const GaussPointState* guess = nullptr);
StepResult integrate_point(const Ten2& F_new, double t_new, double dt, const GaussPointState& state_old,
                           const MaterialParams& p, const LocalOptions& opts = {},
                           const GaussPointState* guess = nullptr);

/// Reference tangent: re-solves the point under six perturbations of C and
/// forward-differences S.
Ten4Minor consistent_tangent(const Ten2& F_new, double t_new, double dt, const GaussPointState& state_old,
                             const MaterialParams& p, const LocalOptions& opts = {});

}  // namespace tegr
