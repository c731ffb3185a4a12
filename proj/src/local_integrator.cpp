#include "tegr/local_integrator.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <optional>

namespace tegr {

LocalVector flatten(const GaussPointState& s)
{
  LocalVector z;
  for (int k = 0; k < 6; ++k)
  {
    z[k] = s.U_gm[k];
    z[6 + k] = s.U_gco[k];
  }
  z.segment<3>(12) = s.a_tilde;
  z[15] = s.gamma_dot;
  z[16] = s.rho_co0;
  return z;
}

GaussPointState unflatten(const LocalVector& z)
{
  GaussPointState s;
  for (int k = 0; k < 6; ++k)
  {
    s.U_gm[k] = z[k];
    s.U_gco[k] = z[6 + k];
  }
  s.a_tilde = z.segment<3>(12);
  s.gamma_dot = z[15];
  s.rho_co0 = z[16];
  return s;
}

namespace {

SymTen2 exp_update(double dt_gamma, const SymTen2& N_hat, const SymTen2& U_old)
{
  const SymTen2 E = exp_sym(dt_gamma * N_hat);
  return SymTen2::sym(E.matrix() * U_old.matrix());
}

double bio_increment(double t_new, double dt, const MaterialParams& p, BioIntegration mode)
{
  if (dt == 0.0) return 0.0;
  if (mode == BioIntegration::kBackwardEuler) return dt * p.a1 * p.c_cell * weibull_pdf(t_new, p);
  return p.a1 * p.c_cell * (weibull_cdf(t_new, p) - weibull_cdf(t_new - dt, p));
}

/// Stress² scale that brings R_γ to order one.
double gamma_scale(const MaterialParams& p) { return std::max(4.0 * p.sigma_g0 * p.sigma_g0, std::abs(p.beta_g)); }

double tolerance(const LocalOptions& o, const LocalVector& z) { return o.tol * (1.0 + z.lpNorm<Eigen::Infinity>()); }

}  // namespace

namespace {

LocalVector residual_impl(const LocalVector& z, const Kinematics& kin, double t_new, double dt,
                          const GaussPointState& old, const MaterialParams& p, const LocalOptions& opts,
                          const Vec3* frozen_target)
{
  const GaussPointState s = unflatten(z);
  const StressBundle b = evaluate_stress(kin, s, p);
  const FlowDirections n = flow_directions(b, p);
  LocalVector R;

  const double dg = dt * s.gamma_dot;
  const SymTen2 Um = exp_update(dg, n.N_hat_m, old.U_gm);
  const SymTen2 Uc = exp_update(dg, n.N_hat_co, old.U_gco);
  for (int k = 0; k < 6; ++k)
  {
    R[k] = s.U_gm[k] - Um[k];
    R[6 + k] = s.U_gco[k] - Uc[k];
  }

  if (dt == 0.0)
  {
    R.segment<3>(12) = s.a_tilde - old.a_tilde;
  }
  else
  {
    const Vec3 a = s.a_tilde.normalized();
    const Vec3 target = frozen_target ? *frozen_target : fiber_target(a, b.tau_tilde);
    const Vec3 a_new = opts.fiber == FiberUpdate::kExactRotation
                           ? fiber_rotate(old.a_tilde, target, p.eta_s, dt)
                           : (old.a_tilde + dt * fiber_rate_toward(a, target, p.eta_s)).normalized();
    R.segment<3>(12) = s.a_tilde - a_new;
  }

  if (dt == 0.0)
  {
    R[15] = s.gamma_dot - old.gamma_dot;
  }
  else
  {
    const double sigma_g = homeostatic_stress(s.rho_co0 / b.J, p);
    const double phi = homeostatic_surface(b.Y_g, b.J, sigma_g, p.beta_g);
    const double denom = 4.0 * sigma_g * sigma_g - p.beta_g;
    R[15] = (phi - denom * signed_pow(p.eta_g * s.gamma_dot, p.v_g)) / gamma_scale(p);
  }

  R[16] = s.rho_co0 - old.rho_co0 - bio_increment(t_new, dt, p, opts.bio) -
          dt * collagen_rate_mechano(s.rho_co0, b.psi_co_mass, p);
  return R;
}

/// Target to hold fixed during differencing, or nullopt when τ̃ has a
/// resolvable principal direction.
std::optional<Vec3> target_to_freeze(const LocalVector& z, const Kinematics& kin, const MaterialParams& p)
{
  const GaussPointState s = unflatten(z);
  const StressBundle b = evaluate_stress(kin, s, p);
  const SymEigen e = sym_eig(b.tau_tilde);
  const double gap = e.values[0] - e.values[1];
  const double resolvable = 1e-3 * b.tau_tilde.norm() + 1e-6 * (std::abs(p.lambda) + 2.0 * p.mu + p.k1);
  if (gap > resolvable) return std::nullopt;
  return fiber_target(s.a_tilde.normalized(), b.tau_tilde);
}

}  // namespace

LocalVector local_residual(const LocalVector& z, const Kinematics& kin, double t_new, double dt,
                           const GaussPointState& old, const MaterialParams& p, const LocalOptions& opts)
{
  return residual_impl(z, kin, t_new, dt, old, p, opts, nullptr);
}

LocalVector local_residual(const LocalVector& z, const Ten2& F_new, double t_new, double dt,
                           const GaussPointState& old, const MaterialParams& p, const LocalOptions& opts)
{
  return local_residual(z, kinematics_from_F(F_new), t_new, dt, old, p, opts);
}

namespace {

LocalMatrix jacobian_at(const LocalVector& z, const LocalVector& R0, const Kinematics& kin, double t_new, double dt,
                        const GaussPointState& old, const MaterialParams& p, const LocalOptions& o)
{
  const std::optional<Vec3> frozen = dt > 0.0 ? target_to_freeze(z, kin, p) : std::nullopt;
  const Vec3* tp = frozen ? &*frozen : nullptr;
  LocalMatrix Jm;
  for (int i = 0; i < kLocalSize; ++i)
  {
    LocalVector zp = z;
    const double h = o.fd_step * std::max(1.0, std::abs(z[i]));
    zp[i] += h;
    Jm.col(i) = (residual_impl(zp, kin, t_new, dt, old, p, o, tp) - R0) / h;
  }
  return Jm;
}

struct Solved
{
  LocalVector z;
  LocalVector R;
  int iterations = 0;
  std::optional<Eigen::PartialPivLU<LocalMatrix>> lu;
};

/// Single Newton solve; returns nullopt on failure and leaves the last
/// residual norm in last_norm.
std::optional<Solved> newton(const Kinematics& kin, double t_new, double dt, const GaussPointState& old,
                             const MaterialParams& p, const LocalOptions& o, const GaussPointState& start,
                             double& last_norm)
{
  Solved out;
  out.z = flatten(start);
  try
  {
    for (int it = 0; it <= o.max_iter; ++it)
    {
      out.R = local_residual(out.z, kin, t_new, dt, old, p, o);
      last_norm = out.R.lpNorm<Eigen::Infinity>();
      if (!std::isfinite(last_norm)) return std::nullopt;
      if (last_norm < tolerance(o, out.z))
      {
        out.iterations = it;
        if (o.compute_tangent && !out.lu)
          out.lu.emplace(jacobian_at(out.z, out.R, kin, t_new, dt, old, p, o));
        return out;
      }
      if (it == o.max_iter) break;
      out.lu.emplace(jacobian_at(out.z, out.R, kin, t_new, dt, old, p, o));
      const LocalVector dz = out.lu->solve(out.R);
      if (!dz.allFinite()) return std::nullopt;
      out.z -= dz;
    }
  }
  catch (const std::exception&)
  {
    // Inadmissible trial state (non-SPD stretch, degenerate fiber).
  }
  return std::nullopt;
}

Ten4Minor algorithmic_tangent(const Solved& sol, const Kinematics& kin, double t_new, double dt,
                              const GaussPointState& old, const MaterialParams& p, const LocalOptions& o)
{
  const GaussPointState s = unflatten(sol.z);
  const SymTen2 S0 = evaluate_stress(kin, s, p).S;

  // ∂S/∂z at fixed C; γ̇ does not enter S.
  Eigen::Matrix<double, 6, kLocalSize> dSdz = Eigen::Matrix<double, 6, kLocalSize>::Zero();
  for (int i = 0; i < kLocalSize; ++i)
  {
    if (i == 15) continue;
    LocalVector zp = sol.z;
    const double h = o.fd_step * std::max(1.0, std::abs(sol.z[i]));
    zp[i] += h;
    dSdz.col(i) = (evaluate_stress(kin, unflatten(zp), p).S.stress_voigt() - S0.stress_voigt()) / h;
  }

  const std::optional<Vec3> frozen = dt > 0.0 ? target_to_freeze(sol.z, kin, p) : std::nullopt;
  const Vec3* tp = frozen ? &*frozen : nullptr;
  const double eps = o.fd_step * std::max(1.0, kin.C.norm());
  Mat6 T;
  for (int k = 0; k < 6; ++k)
  {
    SymTen2 Cp = kin.C;
    Cp[k] += eps;
    const Kinematics kp = kinematics_from_C(Cp);
    const Voigt6 dS = (evaluate_stress(kp, s, p).S.stress_voigt() - S0.stress_voigt()) / eps;
    const LocalVector dR = (residual_impl(sol.z, kp, t_new, dt, old, p, o, tp) - sol.R) / eps;
    const LocalVector dz = -sol.lu->solve(dR);
    Voigt6 col = dS + dSdz * dz;
    if (k >= 3) col *= 0.5;  // both C_ij and C_ji moved
    T.col(k) = col;
  }
  return Ten4Minor(T);
}

StepResult solve_recursive(const Kinematics& kin, double t_new, double dt, const GaussPointState& old,
                           const MaterialParams& p, const LocalOptions& o, const GaussPointState* guess, int depth,
                           bool want_tangent)
{
  double last_norm = 0.0;
  GaussPointState start = guess ? *guess : old;
  LocalOptions oo = o;
  oo.compute_tangent = want_tangent;
  auto sol = newton(kin, t_new, dt, old, p, oo, start, last_norm);
  if (!sol && guess)
  {
    start = old;
    sol = newton(kin, t_new, dt, old, p, oo, start, last_norm);
  }
  if (sol)
  {
    StepResult r;
    r.state_new = unflatten(sol->z);
    if (dt > 0.0) r.state_new.a_tilde.normalize();
    r.iterations = sol->iterations;
    r.residual_norm = sol->R.lpNorm<Eigen::Infinity>();
    r.substeps = 1;
    if (want_tangent) r.tangent = algorithmic_tangent(*sol, kin, t_new, dt, old, p, oo);
    return r;
  }
  if (depth >= o.max_depth || dt == 0.0)
    throw LocalSolveError("local integration did not converge after " + std::to_string(depth) + " bisections",
                          last_norm);
  const double half = 0.5 * dt;
  StepResult a = solve_recursive(kin, t_new - half, half, old, p, o, nullptr, depth + 1, false);
  StepResult b = solve_recursive(kin, t_new, half, a.state_new, p, o, nullptr, depth + 1, want_tangent);
  b.iterations += a.iterations;
  b.substeps += a.substeps;
  return b;
}

}  // namespace

LocalMatrix local_jacobian(const LocalVector& z, const Kinematics& kin, double t_new, double dt,
                           const GaussPointState& old, const MaterialParams& p, const LocalOptions& opts)
{
  return jacobian_at(z, local_residual(z, kin, t_new, dt, old, p, opts), kin, t_new, dt, old, p, opts);
}

StepResult integrate_point(const Kinematics& kin, double t_new, double dt, const GaussPointState& old,
                           const MaterialParams& p, const LocalOptions& opts, const GaussPointState* guess)
{
  if (dt < 0.0) throw std::invalid_argument("integrate_point: dt must be non-negative");
  StepResult r = solve_recursive(kin, t_new, dt, old, p, opts, guess, 0, opts.compute_tangent);
  r.stress = evaluate_stress(kin, r.state_new, p);
  if (opts.compute_dissipation)
  {
    const FlowDirections n = flow_directions(r.stress, p);
    RateBundle rates;
    rates.N_hat_m = n.N_hat_m;
    rates.N_hat_co = n.N_hat_co;
    rates.gamma_dot = dt > 0.0 ? r.state_new.gamma_dot : 0.0;
    rates.rho_dot = dt > 0.0 ? (r.state_new.rho_co0 - old.rho_co0) / dt : 0.0;
    const Vec3 a_ref_old = (kin.U_inv.matrix() * old.a_tilde).normalized();
    r.dissipation = dissipation_report(r.stress, a_ref_old, rates, dt, p);
  }
  return r;
}

StepResult integrate_point(const Ten2& F_new, double t_new, double dt, const GaussPointState& old,
                           const MaterialParams& p, const LocalOptions& opts, const GaussPointState* guess)
{
  return integrate_point(kinematics_from_F(F_new), t_new, dt, old, p, opts, guess);
}

Ten4Minor consistent_tangent(const Ten2& F_new, double t_new, double dt, const GaussPointState& old,
                             const MaterialParams& p, const LocalOptions& opts)
{
  LocalOptions o = opts;
  o.compute_tangent = false;
  o.compute_dissipation = false;
  const PolarDecomposition pd = polar_decompose(F_new);
  const SymTen2 C = SymTen2::sym(F_new.transpose() * F_new);
  const Voigt6 S0 = integrate_point(F_new, t_new, dt, old, p, o).stress.S.stress_voigt();
  const double eps = 1e-6 * std::max(1.0, C.norm());
  Mat6 T;
  for (int k = 0; k < 6; ++k)
  {
    SymTen2 Cp = C;
    Cp[k] += eps;
    const Ten2 Fp = pd.R * sqrt_spd(Cp).matrix();
    Voigt6 col = (integrate_point(Fp, t_new, dt, old, p, o).stress.S.stress_voigt() - S0) / eps;
    if (k >= 3) col *= 0.5;
    T.col(k) = col;
  }
  return Ten4Minor(T);
}

}  // namespace tegr
