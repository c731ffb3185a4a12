#pragma once

// Rate equations: homeostatic surface, growth potentials and flow
// directions, Perzyna multiplier, collagen deposition and fiber turnover.

#include "tegr/constitutive.hpp"

namespace tegr {

struct RateBundle
{
  SymTen2 N_hat_m;
  SymTen2 N_hat_co;
  double gamma_dot = 0.0;
  double rho_dot = 0.0;
  Vec3 a_tilde_dot = Vec3::Zero();
  double phi_g = 0.0;
  double sigma_g = 0.0;
};

struct DissipationReport
{
  double term_growth_m = 0.0;
  double term_growth_co = 0.0;
  double term_remodel = 0.0;
  double term_density = 0.0;
  double total_mechanical = 0.0;
};

/// σ_g for the current (spatial) density ρ⁰/J.
double homeostatic_stress(double rho_co_current, const MaterialParams& p);

double homeostatic_surface(const Ten2& Y_g, double J, double sigma_g, double beta_g);

/// g_m; switches to (1/J) tr Y_gm when the square-root radicand is not positive.
double potential_matrix(const Ten2& Y_gm, double J, double beta_g);

/// g_co. Throws std::domain_error when C̄e_co : M̄ <= 0.
double potential_collagen(const Ten2& Gamma_co, const SymTen2& Ce_co, const SymTen2& M_bar, double J);

struct FlowDirections
{
  SymTen2 N_hat_m;
  SymTen2 N_hat_co;
  bool m_zero = false;   ///< raw matrix direction vanished
  bool co_zero = false;  ///< raw collagen direction vanished
};

FlowDirections flow_directions(const StressBundle& b, const MaterialParams& p);

/// Raw ∂g_co/∂Σ̄_co by central differences, step rel_step * max(1, |Σ̄_co|).
Ten2 collagen_flow_raw(const StressBundle& b, double rel_step = 1e-6);

struct GammaDot
{
  double value = 0.0;
  bool degenerate = false;  ///< |4σ_g² - β_g| < 1e-14
};

GammaDot perzyna_gamma_dot(double phi_g, double sigma_g, const MaterialParams& p);

/// sign(x) |x|^e
double signed_pow(double x, double e);

/// Weibull CDF 1 - exp(-(t/τ)^h).
double weibull_cdf(double t, const MaterialParams& p);
/// Weibull density (h/τ) exp(-(t/τ)^h) (t/τ)^(h-1), zero at t = 0 for h > 1.
double weibull_pdf(double t, const MaterialParams& p);

/// Mechanically stimulated part of the density rate.
double collagen_rate_mechano(double rho_co0, double psi_co_mass, const MaterialParams& p);
double collagen_rate(double t, double rho_co0, double psi_co_mass, const MaterialParams& p);

/// Unit principal direction of τ̃ with the largest eigenvalue, oriented so
/// that target · ã >= 0. For a repeated largest eigenvalue the projection of
/// ã onto that eigenspace is used.
Vec3 fiber_target(const Vec3& a_tilde, const SymTen2& tau_tilde);
Vec3 fiber_rate_toward(const Vec3& a_tilde, const Vec3& target, double eta_s);
Vec3 fiber_rate(const Vec3& a_tilde, const SymTen2& tau_tilde, double eta_s);
/// Exact solution of the fiber ODE over dt for a fixed target.
Vec3 fiber_rotate(const Vec3& a_tilde, const Vec3& target, double eta_s, double dt);

/// Rates evaluated at one state and time.
RateBundle evaluate_rates(const StressBundle& b, const GaussPointState& s, double t, const MaterialParams& p);

/// Diagnostic split of the mechanical dissipation over a step of size dt.
/// Ḣ is the backward difference of the referential structural tensor built
/// from b_new.a_ref and a_ref_old.
DissipationReport dissipation_report(const StressBundle& b_new, const Vec3& a_ref_old, const RateBundle& rates,
                                     double dt, const MaterialParams& p);

}  // namespace tegr
