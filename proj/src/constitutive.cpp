#include "tegr/constitutive.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tegr {

namespace {

void require(bool ok, const std::string& what)
{
  if (!ok) throw std::invalid_argument("MaterialParams: " + what);
}

Ten2 sandwich(const SymTen2& A, const Ten2& B, const SymTen2& C) { return A.matrix() * B * C.matrix(); }

SymTen2 sym_sandwich(const SymTen2& A, const SymTen2& B)
{
  const Ten2 a = A.matrix();
  return SymTen2::sym(a * B.matrix() * a);
}

}  // namespace

void MaterialParams::validate() const
{
  auto finite = [](double v) { return std::isfinite(v); };
  for (double v : {lambda, mu, k1, k2, kappa, sigma_g0, r1, beta_g, eta_g, eta_s, v_g, a1, tau, h, a2,
                   psi_crit, rho_th, rho_co_f, c_cell, energy_per_mass_scale})
    require(finite(v), "all parameters must be finite");
  require(mu > 0.0, "mu > 0");
  require(lambda + 2.0 * mu / 3.0 > 0.0, "lambda + 2 mu / 3 > 0");
  require(k1 >= 0.0, "k1 >= 0");
  require(k2 > 0.0, "k2 > 0");
  require(kappa >= 0.0 && kappa <= 1.0 / 3.0, "kappa out of range, 0 ≤ κ ≤ 1/3");
  require(eta_g > 0.0, "eta_g > 0");
  require(eta_s > 0.0, "eta_s > 0");
  require(tau > 0.0, "tau > 0");
  require(h > 0.0, "h > 0");
  require(rho_co_f > 0.0, "rho_co_f > 0");
  require(rho_th > 0.0, "rho_th > 0");
  require(c_cell >= 0.0, "c_cell >= 0");
  require(v_g > 0.0, "v_g > 0");
  require(psi_crit > 0.0, "psi_crit > 0");
  require(energy_per_mass_scale > 0.0, "energy_per_mass_scale > 0");
}

MaterialParams MaterialParams::strip()
{
  MaterialParams p;
  p.lambda = 0.5;
  p.mu = 0.25;
  p.k1 = 0.825;
  p.k2 = 4.0;
  p.kappa = 0.15;
  p.sigma_g0 = 0.2;
  p.r1 = 0.15;
  p.beta_g = 1.0;
  p.eta_g = 50.0;
  p.eta_s = 5.0;
  p.v_g = 1.0;
  p.a1 = 1e-3;
  p.tau = 7.0;
  p.h = 1.65;
  p.a2 = 2.5e-6;
  p.psi_crit = 2e-5;
  p.rho_th = 6.5;
  p.rho_co_f = 38.7;
  p.c_cell = 15e3;
  return p;
}

MaterialParams MaterialParams::cruciform()
{
  MaterialParams p;
  p.lambda = 818.0;
  p.mu = 982.0;
  p.k1 = 3351.0;
  p.k2 = 14996.0;
  p.kappa = 0.10;
  p.sigma_g0 = 22.9;
  p.r1 = 10.0;
  p.beta_g = 1.0;
  p.eta_g = 100.0;
  p.eta_s = 5.0;
  p.v_g = 1.0;
  p.a1 = 2e-3;
  p.tau = 7.0;
  p.h = 1.65;
  p.a2 = 5e-6;
  p.psi_crit = 3e-5;
  p.rho_th = 10.0;
  p.rho_co_f = 38.7;
  p.c_cell = 15e3;
  return p;
}

GaussPointState GaussPointState::initial(const Vec3& fiber)
{
  GaussPointState s;
  s.a_tilde = fiber.normalized();
  return s;
}

void GaussPointState::validate() const
{
  if (!(U_gm.det() > 0.0)) throw std::invalid_argument("GaussPointState: det U_gm must be positive");
  if (!(U_gco.det() > 0.0)) throw std::invalid_argument("GaussPointState: det U_gco must be positive");
  if (std::abs(a_tilde.norm() - 1.0) > 1e-10) throw std::invalid_argument("GaussPointState: |a_tilde| != 1");
  if (!(rho_co0 >= 0.0)) throw std::invalid_argument("GaussPointState: rho_co0 must be non-negative");
}

Kinematics kinematics_from_C(const SymTen2& C)
{
  const SymEigen e = sym_eig(C);
  if (!(e.values[2] > 0.0)) throw std::invalid_argument("kinematics: C is not positive definite");
  Kinematics k;
  k.C = C;
  for (int i = 0; i < 3; ++i)
  {
    const double s = std::sqrt(e.values[i]);
    const SymTen2 P = SymTen2::outer(e.vectors[i]);
    k.U += s * P;
    k.U_inv += (1.0 / s) * P;
  }
  k.J = std::sqrt(e.values[0] * e.values[1] * e.values[2]);
  return k;
}

Kinematics kinematics_from_F(const Ten2& F)
{
  if (!(F.determinant() > 0.0)) throw std::invalid_argument("kinematics: det F must be positive");
  Kinematics k = kinematics_from_C(SymTen2::sym(F.transpose() * F));
  k.J = F.determinant();
  return k;
}

StructureTensors structure_tensors(const Kinematics& kin, const SymTen2& U_gco, const Vec3& a_tilde,
                                   double kappa)
{
  StructureTensors st;
  const Vec3 a = kin.U_inv.matrix() * a_tilde;
  const double na = a.norm();
  if (!(na > 0.0)) throw std::invalid_argument("structure_tensors: degenerate fiber");
  st.a_ref = a / na;
  st.M = SymTen2::outer(st.a_ref);
  // C_gco : M = |U_gco a|², so M̄ is the unit dyad of U_gco a.
  const Vec3 b = U_gco.matrix() * st.a_ref;
  const double cgm = b.squaredNorm();
  if (!(cgm > 0.0)) throw std::invalid_argument("structure_tensors: singular U_gco");
  st.M_bar = (1.0 / cgm) * SymTen2::outer(b);
  st.H_bar = kappa * SymTen2::identity() + (1.0 - 3.0 * kappa) * st.M_bar;
  return st;
}

StructureTensors structure_tensors(const Ten2& F, const SymTen2& U_gco, const Vec3& a_tilde, double kappa)
{
  return structure_tensors(kinematics_from_F(F), U_gco, a_tilde, kappa);
}

double psi_matrix(const SymTen2& Ce_m, const MaterialParams& p)
{
  // Leading principal minors (Sylvester).
  const double d = Ce_m.det();
  const double m2 = Ce_m[0] * Ce_m[1] - Ce_m[3] * Ce_m[3];
  if (!(Ce_m[0] > 0.0 && m2 > 0.0 && d > 0.0))
    throw std::invalid_argument("psi_matrix: Ce_m is not positive definite");
  const double Je = std::sqrt(d);
  const double lnJ = std::log(Je);
  return 0.5 * p.mu * (Ce_m.trace() - 3.0) - p.mu * lnJ + 0.25 * p.lambda * (d - 1.0 - 2.0 * lnJ);
}

SymTen2 dpsi_matrix(const SymTen2& Ce_m, const MaterialParams& p)
{
  const SymTen2 inv = Ce_m.inverse();
  const double d = Ce_m.det();
  return 0.5 * p.mu * (SymTen2::identity() - inv) + 0.25 * p.lambda * (d - 1.0) * inv;
}

namespace {

double collagen_strain(const SymTen2& Ce_co, const SymTen2& H_bar) { return Ce_co.dot(H_bar) - 1.0; }

double fung(double E, const MaterialParams& p)
{
  if (E < 0.0) return 0.0;
  return p.k1 / (2.0 * p.k2) * std::expm1(p.k2 * E * E);
}

}  // namespace

double psi_collagen(const SymTen2& Ce_co, const SymTen2& H_bar, double rho_co0, const MaterialParams& p)
{
  return rho_co0 / p.rho_co_f * fung(collagen_strain(Ce_co, H_bar), p);
}

double psi_collagen_per_mass(const SymTen2& Ce_co, const SymTen2& H_bar, double /*rho_co0*/,
                             const MaterialParams& p)
{
  // ψ_co is linear in ρ⁰, so the ratio and its ρ⁰ -> 0 limit coincide.
  return p.energy_per_mass_scale / p.rho_co_f * fung(collagen_strain(Ce_co, H_bar), p);
}

StressBundle evaluate_stress(const Kinematics& kin, const GaussPointState& s, const MaterialParams& p)
{
  StressBundle b;
  b.J = kin.J;

  const SymTen2 Um_inv = s.U_gm.inverse();
  const SymTen2 Uc_inv = s.U_gco.inverse();
  b.Ce_m = sym_sandwich(Um_inv, kin.C);
  b.Ce_co = sym_sandwich(Uc_inv, kin.C);

  // Matrix
  b.psi_m = psi_matrix(b.Ce_m, p);
  const double dm = b.Ce_m.det();
  b.Sigma_m = (p.mu * (b.Ce_m - SymTen2::identity()) + 0.5 * p.lambda * (dm - 1.0) * SymTen2::identity()).matrix();
  const SymTen2 S_m = 2.0 * sym_sandwich(Um_inv, dpsi_matrix(b.Ce_m, p));
  b.Y_gm = sandwich(s.U_gm, b.Sigma_m, Um_inv);

  // Collagen
  const StructureTensors st = structure_tensors(kin, s.U_gco, s.a_tilde, p.kappa);
  b.a_ref = st.a_ref;
  b.M_bar = st.M_bar;
  b.H_bar = st.H_bar;
  b.E_co = collagen_strain(b.Ce_co, b.H_bar);
  b.psi_co = psi_collagen(b.Ce_co, b.H_bar, s.rho_co0, p);
  b.psi_co_mass = psi_collagen_per_mass(b.Ce_co, b.H_bar, s.rho_co0, p);

  SymTen2 S_co;
  b.Sigma_co = Ten2::Zero();
  b.Y_co = Ten2::Zero();
  b.Pi_co = Ten2::Zero();
  if (b.E_co >= 0.0 && s.rho_co0 != 0.0)
  {
    const double f = s.rho_co0 / p.rho_co_f * p.k1 * b.E_co * std::exp(p.k2 * b.E_co * b.E_co);
    // ∂ψ/∂C̄e = f H̄, ∂ψ/∂H̄ = f C̄e
    b.dpsi_dH = f * b.Ce_co;
    b.G_co = sym_sandwich(s.U_gco, b.dpsi_dH);
    const Ten2 Hm = b.H_bar.matrix();
    b.Sigma_co = 2.0 * f * b.Ce_co.matrix() * Hm;
    b.Y_co = 2.0 * b.dpsi_dH.matrix() * Hm;
    if (p.pi_contraction == PiContraction::kDyadic)
      b.Pi_co = 2.0 * b.dpsi_dH.dot(b.H_bar) * Hm;
    else
      b.Pi_co = 2.0 * Hm * b.dpsi_dH.matrix() * Hm;
    S_co = 2.0 * f * sym_sandwich(Uc_inv, b.H_bar);
  }
  b.Gamma_co = b.Sigma_co - b.Y_co + b.Pi_co;

  b.S = S_m + S_co;
  b.Y_g = b.Y_gm + sandwich(s.U_gco, b.Sigma_co, Uc_inv);
  b.tau_tilde = SymTen2::sym(kin.U_inv.matrix() * b.Y_g * kin.U.matrix());
  return b;
}

StressBundle evaluate_stress(const Ten2& F, const GaussPointState& s, const MaterialParams& p)
{
  return evaluate_stress(kinematics_from_F(F), s, p);
}

SymTen2 cauchy_stress(const Ten2& F, const SymTen2& S)
{
  return (1.0 / F.determinant()) * SymTen2::sym(F * S.matrix() * F.transpose());
}

}  // namespace tegr
