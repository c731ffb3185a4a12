#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tegr/local_integrator.hpp"
#include "test_util.hpp"

using namespace tegr;
using std::numbers::pi;

namespace {

MaterialParams frozen_growth()
{
  MaterialParams p = MaterialParams::strip();
  p.eta_g = 1e12;
  return p;
}

Ten2 stretch(double a, double b, double c) { return Vec3(a, b, c).asDiagonal(); }

GaussPointState active_state()
{
  GaussPointState s;
  s.a_tilde = Vec3(1, 1, 0.3).normalized();
  s.rho_co0 = 20.0;
  s.U_gm = SymTen2::diag(0.97, 0.95, 0.96);
  s.U_gco = SymTen2(0.98, 0.96, 0.97, 0.01, 0.0, 0.005);
  s.gamma_dot = -0.01;
  return s;
}

double rel_norm(const Mat6& a, const Mat6& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST(Flatten, RoundTrip)
{
  const GaussPointState s = active_state();
  const GaussPointState t = unflatten(flatten(s));
  EXPECT_EQ(flatten(t), flatten(s));
  EXPECT_EQ(flatten(s)[16], 20.0);
  EXPECT_EQ(flatten(s)[15], -0.01);
}

TEST(Residual, ZeroStepAtOldState)
{
  const GaussPointState s = active_state();
  const LocalVector R = local_residual(flatten(s), stretch(1.1, 0.95, 0.97), 3.0, 0.0, s, MaterialParams::strip());
  EXPECT_EQ(R.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Residual, BackwardEulerDensityOracle)
{
  // Single step 0 -> 7 days at rest; the scalar density equation
  // ρ = 7 a1 c W'(7) is solved independently by bisection.
  MaterialParams p = frozen_growth();
  LocalOptions o;
  o.bio = BioIntegration::kBackwardEuler;
  const GaussPointState old;
  const auto r = integrate_point(Ten2::Identity(), 7.0, 7.0, old, p, o);

  auto g = [&](double rho) { return rho - 7.0 * collagen_rate(7.0, rho, 0.0, p); };
  double lo = 0.0, hi = 100.0;
  for (int i = 0; i < 200; ++i)
  {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? hi : lo) = mid;
  }
  EXPECT_NEAR(lo, 9.10502, 1e-5);
  EXPECT_NEAR(r.state_new.rho_co0, lo, 1e-9);
  const LocalVector R = local_residual(flatten(r.state_new), Ten2::Identity(), 7.0, 7.0, old, p, o);
  EXPECT_LT(std::abs(R[16]), 1e-9);
}

TEST(Residual, JacobianNonsingularAtReference)
{
  const GaussPointState s;
  for (double dt : {0.0, 0.1})
  {
    const LocalMatrix J =
        local_jacobian(flatten(s), kinematics_from_F(Ten2::Identity()), 0.1, dt, s, MaterialParams::strip());
    Eigen::JacobiSVD<LocalMatrix> svd(J);
    const auto sv = svd.singularValues();
    EXPECT_GT(sv[kLocalSize - 1], 0.0);
    EXPECT_LT(sv[0] / sv[kLocalSize - 1], 1e8) << "dt = " << dt;
  }
}

TEST(Integrate, ZeroStep)
{
  const GaussPointState s = active_state();
  const Ten2 F = stretch(1.1, 0.95, 0.97);
  const auto r = integrate_point(F, 3.0, 0.0, s, MaterialParams::strip());
  EXPECT_EQ(flatten(r.state_new), flatten(s));
  const auto b = evaluate_stress(F, s, MaterialParams::strip());
  EXPECT_LT((r.stress.S - b.S).norm(), 1e-15);
}

TEST(Integrate, WeibullPathAtRest)
{
  const MaterialParams p = frozen_growth();
  for (BioIntegration mode : {BioIntegration::kExactIncrement, BioIntegration::kBackwardEuler})
  {
    LocalOptions o;
    o.bio = mode;
    GaussPointState s;
    for (int k = 1; k <= 280; ++k) s = integrate_point(Ten2::Identity(), 0.1 * k, 0.1, s, p, o).state_new;
    const double closed = 15.0 * (1.0 - std::exp(-std::pow(4.0, 1.65)));
    EXPECT_NEAR(closed, 14.99921, 1e-5);
    EXPECT_NEAR(s.rho_co0, closed, 1e-2);
  }
}

TEST(Integrate, FiberAngleDecayUnderUniaxialStretch)
{
  MaterialParams p = frozen_growth();
  p.a1 = 0.0;
  p.a2 = 0.0;
  const double theta0 = pi / 3.0;
  GaussPointState s;
  s.a_tilde = Vec3(std::cos(theta0), std::sin(theta0), 0.0);
  const Ten2 F = stretch(1.2, 1.0, 1.0);
  const double dt = 0.05;
  double worst = 0.0;
  for (int k = 1; k <= 400; ++k)
  {
    s = integrate_point(F, k * dt, dt, s, p).state_new;
    const double t = k * dt;
    const double closed = 2.0 * std::atan(std::tan(theta0 / 2.0) * std::exp(-pi * t / (2.0 * p.eta_s)));
    const double theta = std::atan2(s.a_tilde.cross(Vec3::UnitX()).norm(), s.a_tilde.dot(Vec3::UnitX()));
    worst = std::max(worst, std::abs(theta - closed));
    EXPECT_NEAR(s.a_tilde.norm(), 1.0, 1e-12);
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Integrate, InvariantsAlongActivePath)
{
  const MaterialParams p = MaterialParams::strip();
  GaussPointState s;
  s.a_tilde = Vec3(0.6, 0.8, 0.0);
  double prev_rho = 0.0;
  for (int k = 1; k <= 60; ++k)
  {
    const Ten2 F = stretch(1.0 + 0.002 * k, 1.0 - 0.001 * k, 1.0);
    const auto r = integrate_point(F, 0.1 * k, 0.1, s, p);
    s = r.state_new;
    EXPECT_GT(s.U_gm.det(), 0.0);
    EXPECT_GT(s.U_gco.det(), 0.0);
    EXPECT_NEAR(s.a_tilde.norm(), 1.0, 1e-12);
    EXPECT_GE(s.rho_co0, prev_rho);
    prev_rho = s.rho_co0;
  }
}

TEST(Integrate, HomeostaticFixedPoint)
{
  // Isotropic stretch gives Y_g = s I; β_g is chosen so that φ_g = 0.
  MaterialParams p = MaterialParams::strip();
  p.a1 = 0.0;
  p.a2 = 0.0;
  const double lam = 1.05;
  const double J = lam * lam * lam;
  const double sm = p.mu * (lam * lam - 1.0) + 0.5 * p.lambda * (J * J - 1.0);
  const double r = 2.0 * p.sigma_g0 - 3.0 * sm / (J * J);
  p.beta_g = r * r - 3.0 * sm * sm / (J * J);
  ASSERT_GT(std::abs(4.0 * p.sigma_g0 * p.sigma_g0 - p.beta_g), 1e-3);
  GaussPointState s;
  s.a_tilde = Vec3(0.3, -0.4, 0.5).normalized();
  for (double dt : {0.1, 1.0, 5.0})
  {
    const auto res = integrate_point(stretch(lam, lam, lam), dt, dt, s, p);
    EXPECT_LT((flatten(res.state_new) - flatten(s)).lpNorm<Eigen::Infinity>(), 1e-12) << "dt = " << dt;
  }
}

TEST(Integrate, StepHalvingOrder)
{
  const MaterialParams p = MaterialParams::strip();
  const GaussPointState s0 = active_state();
  const Ten2 F = stretch(1.12, 0.96, 0.98);
  std::vector<double> dts{0.4, 0.2, 0.1, 0.05}, errs;
  for (double dt : dts)
  {
    const auto one = integrate_point(F, 5.0 + dt, dt, s0, p);
    const auto h1 = integrate_point(F, 5.0 + 0.5 * dt, 0.5 * dt, s0, p);
    const auto h2 = integrate_point(F, 5.0 + dt, 0.5 * dt, h1.state_new, p);
    errs.push_back((flatten(one.state_new) - flatten(h2.state_new)).norm());
  }
  // Least-squares slope of log(err) against log(dt).
  double mx = 0, my = 0;
  for (int i = 0; i < 4; ++i)
  {
    mx += std::log(dts[i]) / 4;
    my += std::log(errs[i]) / 4;
  }
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 4; ++i)
  {
    sxy += (std::log(dts[i]) - mx) * (std::log(errs[i]) - my);
    sxx += (std::log(dts[i]) - mx) * (std::log(dts[i]) - mx);
  }
  EXPECT_GE(sxy / sxx, 1.0);
}

TEST(Tangent, ReferenceStateMatchesNeoHooke)
{
  const MaterialParams p = MaterialParams::strip();
  const Ten4Minor T = consistent_tangent(Ten2::Identity(), 0.0, 0.0, GaussPointState{}, p);
  // dS/dC at C = I: µ I_sym + (λ/2) I ⊗ I
  Mat6 ref = Mat6::Zero();
  for (int i = 0; i < 3; ++i)
  {
    for (int j = 0; j < 3; ++j) ref(i, j) = 0.5 * p.lambda;
    ref(i, i) += p.mu;
    ref(3 + i, 3 + i) = 0.5 * p.mu;
  }
  EXPECT_LT(rel_norm(T.matrix(), ref), 1e-4);
  EXPECT_LT(T.major_asymmetry(), 1e-4);
}

TEST(Tangent, HyperelasticMajorSymmetry)
{
  const MaterialParams p = MaterialParams::strip();
  GaussPointState s;
  s.U_gm = SymTen2::diag(1.05, 0.97, 1.0);
  std::mt19937_64 rng(3);
  const Ten2 F = tegr::testing::random_rotation(rng) * stretch(1.1, 0.9, 1.05);
  const Ten4Minor T = consistent_tangent(F, 1.0, 0.0, s, p);
  EXPECT_LT(T.major_asymmetry(), 1e-4);
}

TEST(Tangent, DirectionalDerivative)
{
  const MaterialParams p = MaterialParams::strip();
  const GaussPointState s0 = active_state();
  const Ten2 F = stretch(1.12, 0.96, 0.98);
  const double t = 5.1, dt = 0.1;
  LocalOptions o;
  o.compute_tangent = true;
  const auto base = integrate_point(F, t, dt, s0, p, o);
  const Ten4Minor ref = consistent_tangent(F, t, dt, s0, p);
  EXPECT_LT(rel_norm(base.tangent.matrix(), ref.matrix()), 1e-3);

  std::mt19937_64 rng(5);
  const SymTen2 C = SymTen2::sym(F.transpose() * F);
  for (int n = 0; n < 10; ++n)
  {
    SymTen2 dC = tegr::testing::random_sym(rng, 1.0);
    dC *= 1e-4 / dC.norm();
    const Ten2 Fp = sqrt_spd(C + dC).matrix();
    const SymTen2 dS = integrate_point(Fp, t, dt, s0, p).stress.S - base.stress.S;
    const SymTen2 pred = base.tangent.contract(dC);
    EXPECT_LT((pred - dS).norm(), 0.02 * dS.norm());
  }
}
