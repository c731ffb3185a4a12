#pragma once

#include <random>

#include "tegr/tensor.hpp"

namespace tegr::testing {

inline Ten2 random_rotation(std::mt19937_64& rng)
{
  std::normal_distribution<double> n(0.0, 1.0);
  Ten2 A;
  for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = n(rng);
  return orthonormalize(A);
}

/// Random SPD tensor with eigenvalues in [lo, hi].
inline SymTen2 random_spd(std::mt19937_64& rng, double lo, double hi)
{
  std::uniform_real_distribution<double> u(lo, hi);
  const Ten2 Q = random_rotation(rng);
  const Ten2 D = Vec3(u(rng), u(rng), u(rng)).asDiagonal();
  return SymTen2::sym(Q * D * Q.transpose());
}

inline SymTen2 random_sym(std::mt19937_64& rng, double scale)
{
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
}

inline Vec3 random_unit(std::mt19937_64& rng)
{
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

inline double max_abs(const Ten2& A) { return A.cwiseAbs().maxCoeff(); }

}  // namespace tegr::testing
