#pragma once

// Small dense tensor kit for 3-D continuum mechanics.
//
// Voigt convention (used by every module that packs tensors into 6-vectors):
//   index order      0:xx 1:yy 2:zz 3:xy 4:yz 5:xz
//   stress-like      shear components stored as-is        (factor 1)
//   strain-like      shear components stored doubled      (factor 2)
// A Ten4Minor T maps strain-like to stress-like vectors:
//   voigt_stress(T : E) = T.matrix() * voigt_strain(E)
// so that entry (I, J) equals the tensor component T_ijkl with (ij) -> I and
// (kl) -> J, for both normal and shear positions.

#include <Eigen/Dense>

#include <array>
#include <cstddef>

namespace tegr {

using Vec3 = Eigen::Vector3d;
using Ten2 = Eigen::Matrix3d;
using Voigt6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Row/column of each Voigt slot.
inline constexpr std::array<std::array<int, 2>, 6> kVoigtPairs{
    {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {0, 2}}};

/// Voigt slot of tensor position (i, j).
constexpr int voigt_index(int i, int j)
{
  if (i == j) return i;
  const int a = i < j ? i : j;
  const int b = i < j ? j : i;
  if (a == 0 && b == 1) return 3;
  if (a == 1 && b == 2) return 4;
  return 5;
}

/// Symmetric second-order tensor with six independent components
/// (xx, yy, zz, xy, yz, xz).
class SymTen2
{
 public:
  SymTen2() { c_.fill(0.0); }
  SymTen2(double xx, double yy, double zz, double xy, double yz, double xz)
      : c_{xx, yy, zz, xy, yz, xz}
  {
  }

  static SymTen2 identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }
  static SymTen2 zero() { return {}; }
  static SymTen2 diag(double a, double b, double c) { return {a, b, c, 0.0, 0.0, 0.0}; }
  /// Symmetric part of a general tensor.
  static SymTen2 sym(const Ten2& A);
  /// a ⊗ a
  static SymTen2 outer(const Vec3& a);

  double operator[](std::size_t k) const { return c_[k]; }
  double& operator[](std::size_t k) { return c_[k]; }
  double operator()(int i, int j) const { return c_[voigt_index(i, j)]; }

  Ten2 matrix() const;
  /// Components as a stress-like Voigt vector (shear factor 1).
  Voigt6 stress_voigt() const;
  /// Components as a strain-like Voigt vector (shear factor 2).
  Voigt6 strain_voigt() const;
  static SymTen2 from_stress_voigt(const Voigt6& v);

  double trace() const { return c_[0] + c_[1] + c_[2]; }
  double det() const;
  /// A : A
  double norm() const;
  double dot(const SymTen2& o) const;
  SymTen2 inverse() const;

  SymTen2& operator+=(const SymTen2& o);
  SymTen2& operator-=(const SymTen2& o);
  SymTen2& operator*=(double s);
  friend SymTen2 operator+(SymTen2 a, const SymTen2& b) { return a += b; }
  friend SymTen2 operator-(SymTen2 a, const SymTen2& b) { return a -= b; }
  friend SymTen2 operator*(SymTen2 a, double s) { return a *= s; }
  friend SymTen2 operator*(double s, SymTen2 a) { return a *= s; }

  const std::array<double, 6>& components() const { return c_; }

 private:
  std::array<double, 6> c_;
};

/// Full 3x3x3x3 array, index (i, j, k, l) -> [27 i + 9 j + 3 k + l].
using Full4 = std::array<double, 81>;
constexpr int full4_index(int i, int j, int k, int l) { return 27 * i + 9 * j + 3 * k + l; }

/// Fourth-order tensor with both minor symmetries in 6x6 form (see header
/// comment for the shear convention).
class Ten4Minor
{
 public:
  Ten4Minor() : m_(Mat6::Zero()) {}
  explicit Ten4Minor(const Mat6& m) : m_(m) {}

  /// Packs a minor-symmetric full tensor. Components outside the symmetric
  /// representative positions are ignored.
  static Ten4Minor pack(const Full4& t);
  Full4 unpack() const;

  const Mat6& matrix() const { return m_; }
  Mat6& matrix() { return m_; }

  /// T : E for a symmetric E.
  SymTen2 contract(const SymTen2& E) const;
  /// Largest |T_IJ - T_JI| relative to max |T_IJ|.
  double major_asymmetry() const;

 private:
  Mat6 m_;
};

struct PolarDecomposition
{
  Ten2 R;
  SymTen2 U;
};

/// F = R U with U symmetric positive definite. Throws std::invalid_argument
/// when det F <= 0.
PolarDecomposition polar_decompose(const Ten2& F);

struct SymEigen
{
  /// Descending.
  std::array<double, 3> values;
  /// Orthonormal; vectors[k] belongs to values[k]. Sign rule: first
  /// component with |v_i| > 1e-14 is positive.
  std::array<Vec3, 3> vectors;
};

SymEigen sym_eig(const SymTen2& A);

/// Σ f(λ_i) v_i ⊗ v_i for a scalar function f.
template <typename Fn>
SymTen2 spectral_map(const SymTen2& A, Fn&& f)
{
  const SymEigen e = sym_eig(A);
  SymTen2 out;
  for (int k = 0; k < 3; ++k) out += f(e.values[k]) * SymTen2::outer(e.vectors[k]);
  return out;
}

SymTen2 exp_sym(const SymTen2& A);
/// Principal square root of an SPD tensor.
SymTen2 sqrt_spd(const SymTen2& A);
/// True when all eigenvalues exceed tol.
bool is_spd(const SymTen2& A, double tol = 0.0);

/// Orthonormal matrix closest to A (via polar decomposition); used by tests
/// and random-state generators.
Ten2 orthonormalize(const Ten2& A);

}  // namespace tegr
