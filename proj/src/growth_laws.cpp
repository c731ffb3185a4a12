#include "tegr/growth_laws.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace tegr {

double homeostatic_stress(double rho_co_current, const MaterialParams& p)
{
  return p.sigma_g0 * (1.0 + p.r1 * rho_co_current / p.rho_co_f);
}

double homeostatic_surface(const Ten2& Y_g, double J, double sigma_g, double beta_g)
{
  const double iJ2 = 1.0 / (J * J);
  const double trY2 = (Y_g * Y_g).trace();
  const double r = 2.0 * sigma_g - iJ2 * Y_g.trace();
  return iJ2 * trY2 + beta_g - r * r;
}

double potential_matrix(const Ten2& Y_gm, double J, double beta_g)
{
  const double tr = Y_gm.trace();
  const double radicand = tr / (J * J) + beta_g;
  if (radicand > 0.0) return tr / J + std::sqrt(radicand);
  return tr / J;
}

double potential_collagen(const Ten2& Gamma_co, const SymTen2& Ce_co, const SymTen2& M_bar, double J)
{
  const double cm = Ce_co.dot(M_bar);
  if (!(cm > 0.0)) throw std::domain_error("potential_collagen: degenerate fiber, Ce_co : M_bar <= 0");
  const Ten2 A = 0.5 * (Ce_co.matrix() * M_bar.matrix() + M_bar.matrix() * Ce_co.matrix());
  return Gamma_co.cwiseProduct(A).sum() / (J * cm);
}

Ten2 collagen_flow_raw(const StressBundle& b, double rel_step)
{
  // Γ̄_co = Σ̄_co - Ȳ_co + Π̄_co with Ȳ_co, Π̄_co held fixed. The weight
  // sym(C̄e M̄)/(J C̄e:M̄) does not depend on Σ̄_co, so it is formed once.
  const double cm = b.Ce_co.dot(b.M_bar);
  if (!(cm > 0.0)) throw std::domain_error("potential_collagen: degenerate fiber, Ce_co : M_bar <= 0");
  const Ten2 A = 0.5 * (b.Ce_co.matrix() * b.M_bar.matrix() + b.M_bar.matrix() * b.Ce_co.matrix()) / (b.J * cm);
  const Ten2 offset = -b.Y_co + b.Pi_co;
  auto g = [&](const Ten2& Sigma) { return (Sigma + offset).cwiseProduct(A).sum(); };
  const double h = rel_step * std::max(1.0, b.Sigma_co.norm());
  Ten2 N;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
    {
      Ten2 sp = b.Sigma_co;
      Ten2 sm = b.Sigma_co;
      sp(i, j) += h;
      sm(i, j) -= h;
      N(i, j) = (g(sp) - g(sm)) / (2.0 * h);
    }
  return N;
}

namespace {

SymTen2 normalized_or_zero(const SymTen2& A, bool& zero)
{
  const double n = A.norm();
  zero = !(n > 0.0);
  return zero ? SymTen2::zero() : (1.0 / n) * A;
}

}  // namespace

FlowDirections flow_directions(const StressBundle& b, const MaterialParams& p)
{
  FlowDirections out;
  // g_m depends on Σ̄_m only through tr Σ̄_m = tr Y_gm.
  const double J = b.J;
  const double radicand = b.Sigma_m.trace() / (J * J) + p.beta_g;
  double coef = 1.0 / J;
  if (radicand > 0.0) coef += 1.0 / (2.0 * J * J * std::sqrt(radicand));
  out.N_hat_m = normalized_or_zero(coef * SymTen2::identity(), out.m_zero);
  out.N_hat_co = normalized_or_zero(SymTen2::sym(collagen_flow_raw(b)), out.co_zero);
  return out;
}

double signed_pow(double x, double e)
{
  if (x == 0.0) return 0.0;
  if (e == 1.0) return x;
  return std::copysign(std::pow(std::abs(x), e), x);
}

GammaDot perzyna_gamma_dot(double phi_g, double sigma_g, const MaterialParams& p)
{
  const double denom = 4.0 * sigma_g * sigma_g - p.beta_g;
  if (std::abs(denom) < 1e-14) return {0.0, true};
  return {signed_pow(phi_g / denom, 1.0 / p.v_g) / p.eta_g, false};
}

double weibull_cdf(double t, const MaterialParams& p)
{
  if (t <= 0.0) return 0.0;
  return -std::expm1(-std::pow(t / p.tau, p.h));
}

double weibull_pdf(double t, const MaterialParams& p)
{
  if (t <= 0.0)
  {
    if (p.h > 1.0) return 0.0;
    if (p.h == 1.0) return 1.0 / p.tau;
    return std::numeric_limits<double>::infinity();
  }
  const double x = t / p.tau;
  return p.h / p.tau * std::exp(-std::pow(x, p.h)) * std::pow(x, p.h - 1.0);
}

double collagen_rate_mechano(double rho_co0, double psi_co_mass, const MaterialParams& p)
{
  if (!(psi_co_mass >= p.psi_crit)) return 0.0;
  return p.a2 * p.c_cell * std::exp(-rho_co0 / p.rho_th) * rho_co0 * (psi_co_mass - p.psi_crit) / p.psi_crit;
}

double collagen_rate(double t, double rho_co0, double psi_co_mass, const MaterialParams& p)
{
  return p.a1 * p.c_cell * weibull_pdf(t, p) + collagen_rate_mechano(rho_co0, psi_co_mass, p);
}

Vec3 fiber_target(const Vec3& a_tilde, const SymTen2& tau_tilde)
{
  const SymEigen e = sym_eig(tau_tilde);
  const double tol = 1e-10 * tau_tilde.norm();
  int mult = 1;
  while (mult < 3 && e.values[0] - e.values[mult] <= tol) ++mult;

  Vec3 t = e.vectors[0];
  if (mult > 1)
  {
    Vec3 proj = Vec3::Zero();
    for (int k = 0; k < mult; ++k) proj += e.vectors[k].dot(a_tilde) * e.vectors[k];
    const double n = proj.norm();
    if (n > 1e-8) t = proj / n;
  }
  if (t.dot(a_tilde) < 0.0) t = -t;
  return t;
}

Vec3 fiber_rate_toward(const Vec3& a_tilde, const Vec3& target, double eta_s)
{
  return std::numbers::pi / (2.0 * eta_s) * a_tilde.cross(target).cross(a_tilde);
}

Vec3 fiber_rate(const Vec3& a_tilde, const SymTen2& tau_tilde, double eta_s)
{
  return fiber_rate_toward(a_tilde, fiber_target(a_tilde, tau_tilde), eta_s);
}

Vec3 fiber_rotate(const Vec3& a, const Vec3& target, double eta_s, double dt)
{
  const Vec3 perp = target - a.dot(target) * a;
  const double s = perp.norm();
  if (s < 1e-300 || dt == 0.0) return a;
  const double theta = std::atan2(s, a.dot(target));
  const double theta_new = 2.0 * std::atan(std::tan(0.5 * theta) * std::exp(-std::numbers::pi * dt / (2.0 * eta_s)));
  const double delta = theta - theta_new;
  return std::cos(delta) * a + std::sin(delta) * (perp / s);
}

RateBundle evaluate_rates(const StressBundle& b, const GaussPointState& s, double t, const MaterialParams& p)
{
  RateBundle r;
  const FlowDirections n = flow_directions(b, p);
  r.N_hat_m = n.N_hat_m;
  r.N_hat_co = n.N_hat_co;
  r.sigma_g = homeostatic_stress(s.rho_co0 / b.J, p);
  r.phi_g = homeostatic_surface(b.Y_g, b.J, r.sigma_g, p.beta_g);
  r.gamma_dot = perzyna_gamma_dot(r.phi_g, r.sigma_g, p).value;
  r.rho_dot = collagen_rate(t, s.rho_co0, b.psi_co_mass, p);
  r.a_tilde_dot = fiber_rate(s.a_tilde, b.tau_tilde, p.eta_s);
  return r;
}

DissipationReport dissipation_report(const StressBundle& b_new, const Vec3& a_ref_old, const RateBundle& rates,
                                     double dt, const MaterialParams& p)
{
  DissipationReport d;
  const Ten2 Dm = rates.gamma_dot * rates.N_hat_m.matrix();
  const Ten2 Dco = rates.gamma_dot * rates.N_hat_co.matrix();
  d.term_growth_m = b_new.Sigma_m.cwiseProduct(Dm).sum();
  d.term_growth_co = b_new.Gamma_co.cwiseProduct(Dco).sum();
  if (dt > 0.0)
  {
    auto H_ref = [&](const Vec3& a) { return p.kappa * SymTen2::identity() + (1.0 - 3.0 * p.kappa) * SymTen2::outer(a); };
    const SymTen2 H_dot = (1.0 / dt) * (H_ref(b_new.a_ref) - H_ref(a_ref_old));
    d.term_remodel = -b_new.G_co.dot(H_dot);
  }
  d.term_density = -(b_new.psi_co_mass / p.energy_per_mass_scale) * rates.rho_dot;
  d.total_mechanical = d.term_growth_m + d.term_growth_co + d.term_remodel + d.term_density;
  return d;
}

}  // namespace tegr
