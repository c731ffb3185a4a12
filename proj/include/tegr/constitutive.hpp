#pragma once

// Matrix/collagen free energies, structural tensors and the stress measures
// of the co-rotated growth formulation, evaluated at one material point.

#include "tegr/tensor.hpp"

namespace tegr {

/// How the fourth-order contraction in the collagen stress Π̄_co is read.
enum class PiContraction
{
  /// Π̄ = 2 (∂ψ/∂H̄ : H̄) H̄  (standard dyadic H̄ ⊗ H̄)
  kDyadic,
  /// Π̄ = 2 H̄ (∂ψ/∂H̄) H̄
  kSandwich,
};

struct MaterialParams
{
  double lambda = 0.0;  ///< first Lamé constant [stress]
  double mu = 0.0;      ///< shear modulus [stress]
  double k1 = 0.0;      ///< collagen stiffness [stress]
  double k2 = 1.0;      ///< collagen exponent [-]
  double kappa = 0.0;   ///< fiber dispersion, 0 ≤ κ ≤ 1/3
  double sigma_g0 = 0.0;
  double r1 = 0.0;      ///< homeostatic coupling, used as a pure number
  double beta_g = 0.0;
  double eta_g = 1.0;   ///< [days]
  double eta_s = 1.0;   ///< [days]
  double v_g = 1.0;
  double a1 = 0.0;      ///< [µg/cells]
  double tau = 1.0;     ///< [days]
  double h = 1.0;
  double a2 = 0.0;      ///< [mm³/cells/day]
  double psi_crit = 1.0;  ///< [J/µg]
  double rho_th = 1.0;    ///< [µg/mm³]
  double rho_co_f = 1.0;  ///< [µg/mm³]
  double c_cell = 0.0;    ///< [cells/mm³]
  /// Converts (stress unit)·mm³/µg into J/µg for the psi_crit comparison.
  double energy_per_mass_scale = 1.0;
  PiContraction pi_contraction = PiContraction::kDyadic;

  /// Throws std::invalid_argument naming the violated bound.
  void validate() const;

  /// Uniaxial strip set, MPa / µg / mm / days.
  static MaterialParams strip();
  /// Biaxial cruciform set, µN/mm² / µg / mm / days.
  static MaterialParams cruciform();
};

struct GaussPointState
{
  SymTen2 U_gm = SymTen2::identity();
  SymTen2 U_gco = SymTen2::identity();
  Vec3 a_tilde = Vec3::UnitX();
  double gamma_dot = 0.0;
  double rho_co0 = 0.0;

  static GaussPointState initial(const Vec3& fiber);
  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

/// Quantities of F needed by every stress evaluation.
struct Kinematics
{
  SymTen2 C;
  SymTen2 U;
  SymTen2 U_inv;
  double J = 1.0;
};

Kinematics kinematics_from_F(const Ten2& F);
Kinematics kinematics_from_C(const SymTen2& C);

struct StructureTensors
{
  Vec3 a_ref;
  SymTen2 M;
  SymTen2 M_bar;
  SymTen2 H_bar;
};

StructureTensors structure_tensors(const Kinematics& kin, const SymTen2& U_gco, const Vec3& a_tilde,
                                   double kappa);
StructureTensors structure_tensors(const Ten2& F, const SymTen2& U_gco, const Vec3& a_tilde,
                                   double kappa);

struct StressBundle
{
  SymTen2 S;          ///< second Piola-Kirchhoff
  SymTen2 tau_tilde;  ///< co-rotated Kirchhoff
  Ten2 Y_g;
  Ten2 Y_gm;          ///< matrix share of Y_g
  Ten2 Sigma_m;
  Ten2 Sigma_co;
  Ten2 Y_co;
  Ten2 Pi_co;
  Ten2 Gamma_co;
  double J = 1.0;
  double psi_m = 0.0;
  double psi_co = 0.0;
  double psi_co_mass = 0.0;
  SymTen2 H_bar;
  SymTen2 M_bar;
  Vec3 a_ref;
  SymTen2 Ce_m;
  SymTen2 Ce_co;
  SymTen2 dpsi_dH;    ///< ∂ψ̄_co/∂H̄
  SymTen2 G_co;       ///< U_gco (∂ψ̄_co/∂H̄) U_gco
  double E_co = 0.0;  ///< collagen strain invariant tr(C̄e_co H̄) - 1
};

double psi_matrix(const SymTen2& Ce_m, const MaterialParams& p);
/// ∂ψ_m/∂C̄e_m
SymTen2 dpsi_matrix(const SymTen2& Ce_m, const MaterialParams& p);

double psi_collagen(const SymTen2& Ce_co, const SymTen2& H_bar, double rho_co0, const MaterialParams& p);
/// Collagen energy per unit collagen mass; finite as rho_co0 -> 0.
double psi_collagen_per_mass(const SymTen2& Ce_co, const SymTen2& H_bar, double rho_co0,
                             const MaterialParams& p);

StressBundle evaluate_stress(const Kinematics& kin, const GaussPointState& s, const MaterialParams& p);
StressBundle evaluate_stress(const Ten2& F, const GaussPointState& s, const MaterialParams& p);

/// Cauchy stress F S Fᵀ / J.
SymTen2 cauchy_stress(const Ten2& F, const SymTen2& S);

}  // namespace tegr
