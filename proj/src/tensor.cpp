#include "tegr/tensor.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tegr {

SymTen2 SymTen2::sym(const Ten2& A)
{
  return {A(0, 0),
          A(1, 1),
          A(2, 2),
          0.5 * (A(0, 1) + A(1, 0)),
          0.5 * (A(1, 2) + A(2, 1)),
          0.5 * (A(0, 2) + A(2, 0))};
}

SymTen2 SymTen2::outer(const Vec3& a)
{
  return {a[0] * a[0], a[1] * a[1], a[2] * a[2], a[0] * a[1], a[1] * a[2], a[0] * a[2]};
}

Ten2 SymTen2::matrix() const
{
  Ten2 m;
  m << c_[0], c_[3], c_[5],  //
      c_[3], c_[1], c_[4],   //
      c_[5], c_[4], c_[2];
  return m;
}

Voigt6 SymTen2::stress_voigt() const
{
  Voigt6 v;
  v << c_[0], c_[1], c_[2], c_[3], c_[4], c_[5];
  return v;
}

Voigt6 SymTen2::strain_voigt() const
{
  Voigt6 v;
  v << c_[0], c_[1], c_[2], 2.0 * c_[3], 2.0 * c_[4], 2.0 * c_[5];
  return v;
}

SymTen2 SymTen2::from_stress_voigt(const Voigt6& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

double SymTen2::det() const
{
  const auto& c = c_;
  return c[0] * (c[1] * c[2] - c[4] * c[4]) - c[3] * (c[3] * c[2] - c[4] * c[5]) +
         c[5] * (c[3] * c[4] - c[1] * c[5]);
}

double SymTen2::dot(const SymTen2& o) const
{
  return c_[0] * o.c_[0] + c_[1] * o.c_[1] + c_[2] * o.c_[2] +
         2.0 * (c_[3] * o.c_[3] + c_[4] * o.c_[4] + c_[5] * o.c_[5]);
}

double SymTen2::norm() const { return std::sqrt(dot(*this)); }

SymTen2 SymTen2::inverse() const
{
  const auto& c = c_;
  const double d = det();
  if (d == 0.0 || !std::isfinite(d)) throw std::invalid_argument("SymTen2::inverse: singular tensor");
  const double inv = 1.0 / d;
  return {(c[1] * c[2] - c[4] * c[4]) * inv, (c[0] * c[2] - c[5] * c[5]) * inv,
          (c[0] * c[1] - c[3] * c[3]) * inv, (c[4] * c[5] - c[3] * c[2]) * inv,
          (c[3] * c[5] - c[0] * c[4]) * inv, (c[3] * c[4] - c[1] * c[5]) * inv};
}

SymTen2& SymTen2::operator+=(const SymTen2& o)
{
  for (int k = 0; k < 6; ++k) c_[k] += o.c_[k];
  return *this;
}

SymTen2& SymTen2::operator-=(const SymTen2& o)
{
  for (int k = 0; k < 6; ++k) c_[k] -= o.c_[k];
  return *this;
}

SymTen2& SymTen2::operator*=(double s)
{
  for (double& v : c_) v *= s;
  return *this;
}

Ten4Minor Ten4Minor::pack(const Full4& t)
{
  Mat6 m;
  for (int I = 0; I < 6; ++I)
    for (int J = 0; J < 6; ++J)
    {
      const auto [i, j] = kVoigtPairs[I];
      const auto [k, l] = kVoigtPairs[J];
      m(I, J) = t[full4_index(i, j, k, l)];
    }
  return Ten4Minor(m);
}

Full4 Ten4Minor::unpack() const
{
  Full4 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) t[full4_index(i, j, k, l)] = m_(voigt_index(i, j), voigt_index(k, l));
  return t;
}

SymTen2 Ten4Minor::contract(const SymTen2& E) const
{
  return SymTen2::from_stress_voigt(m_ * E.strain_voigt());
}

double Ten4Minor::major_asymmetry() const
{
  const double scale = m_.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (m_ - m_.transpose()).cwiseAbs().maxCoeff() / scale;
}

namespace {

void apply_sign_rule(Vec3& v)
{
  for (int i = 0; i < 3; ++i)
  {
    if (std::abs(v[i]) > 1e-14)
    {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

SymEigen sym_eig(const SymTen2& A)
{
  Eigen::SelfAdjointEigenSolver<Ten2> solver(A.matrix(), Eigen::ComputeEigenvectors);
  // Eigen returns ascending order.
  const Vec3 vals = solver.eigenvalues();
  const Ten2 vecs = solver.eigenvectors();
  SymEigen out;
  for (int k = 0; k < 3; ++k)
  {
    out.values[k] = vals[2 - k];
    out.vectors[k] = vecs.col(2 - k);
    apply_sign_rule(out.vectors[k]);
  }
  return out;
}

SymTen2 exp_sym(const SymTen2& A)
{
  if (A[3] == 0.0 && A[4] == 0.0 && A[5] == 0.0) return SymTen2::diag(std::exp(A[0]), std::exp(A[1]), std::exp(A[2]));
  return spectral_map(A, [](double x) { return std::exp(x); });
}

SymTen2 sqrt_spd(const SymTen2& A)
{
  return spectral_map(A, [](double x) {
    if (x <= 0.0) throw std::invalid_argument("sqrt_spd: tensor is not positive definite");
    return std::sqrt(x);
  });
}

bool is_spd(const SymTen2& A, double tol)
{
  const SymEigen e = sym_eig(A);
  return e.values[2] > tol;
}

PolarDecomposition polar_decompose(const Ten2& F)
{
  const double d = F.determinant();
  if (!(d > 0.0)) throw std::invalid_argument("polar_decompose: det F must be positive");
  const SymTen2 C = SymTen2::sym(F.transpose() * F);
  const SymEigen e = sym_eig(C);
  SymTen2 Uinv;
  for (int k = 0; k < 3; ++k) Uinv += (1.0 / std::sqrt(e.values[k])) * SymTen2::outer(e.vectors[k]);
  // Forming FᵀF squares the conditioning; two Newton steps R <- (R + R⁻ᵀ)/2
  // restore orthogonality to round-off, then U follows from R.
  Ten2 R = F * Uinv.matrix();
  for (int it = 0; it < 2; ++it) R = 0.5 * (R + R.inverse().transpose());
  return {R, SymTen2::sym(R.transpose() * F)};
}

Ten2 orthonormalize(const Ten2& A)
{
  Ten2 B = A;
  if (B.determinant() < 0.0) B.col(2) *= -1.0;
  return polar_decompose(B).R;
}

}  // namespace tegr
