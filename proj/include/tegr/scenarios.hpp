#pragma once

// Structured meshes for the strip and cruciform specimens, and fiber seeding.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tegr/fem.hpp"

namespace tegr {

/// Invalid user input (geometry, config, ranges). Maps to CLI exit code 1.
class ConfigError : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

struct StripGeometry
{
  double length = 16.0;
  double width = 2.0;
  double thickness = 0.5;
  int nx = 64, ny = 8, nz = 2;
};

/// Box [0,L]x[0,W]x[0,T]. Node sets x_min_face, x_max_face; element sets
/// middle_region (centroid within 10% of L from the center) and leg_region
/// (centroid within 10% of L from either end).
Mesh build_strip_mesh(const StripGeometry& g);

/// Plus-shaped plate in the x-z plane, thickness along y, centered at the
/// origin. The center block is center_width square with n_center divisions;
/// each arm is n_arm_width of those divisions wide and reaches arm_length
/// from the center in n_arm_length divisions.
struct CruciformGeometry
{
  double arm_length = 10.5;
  double arm_width = 9.0;
  double center_width = 13.0;
  double thickness = 1.0;
  int n_center = 13, n_arm_width = 9, n_arm_length = 4, n_thickness = 2;

  int element_count() const
  {
    return n_thickness * (n_center * n_center + 4 * n_arm_width * n_arm_length);
  }
};

/// Node sets x_min_face, x_max_face, z_min_face, z_max_face (arm ends);
/// element sets center_region and arms.
Mesh build_cruciform_mesh(const CruciformGeometry& g);

/// Mesh bounding box as (min corner, max corner).
std::pair<Vec3, Vec3> bounding_box(const Mesh& mesh);

enum class FiberMode
{
  kInPlaneUniform,
  kFixedAngle,
};

struct FiberInit
{
  FiberMode mode = FiberMode::kInPlaneUniform;
  std::uint64_t seed = 0;
  double angle_deg = 0.0;  ///< fixed_angle only, measured from the first plane axis
  int axis_a = 0, axis_b = 1;
};

/// SplitMix64 (Steele, Lea, Flood 2014). next() advances the state by the
/// golden-ratio increment and returns the mixed value.
class SplitMix64
{
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next()
  {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Uniform on [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// One unit fiber per QP in element-major order. Uniform mode draws the
/// in-plane angle as π·uniform().
std::vector<Vec3> init_fiber_field(const Mesh& mesh, const FiberInit& f);

}  // namespace tegr
