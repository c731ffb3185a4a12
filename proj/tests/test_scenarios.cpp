#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numbers>

#include "tegr/scenarios.hpp"

using namespace tegr;

namespace {

/// Pearson χ² p-value of the counts against a flat expectation.
double flat_p_value(const std::vector<int>& counts)
{
  double total = 0.0;
  for (int c : counts) total += c;
  const double expected = total / static_cast<double>(counts.size());
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

}  // namespace

TEST(StripMesh, DefaultCounts)
{
  const Mesh m = build_strip_mesh(StripGeometry{});
  EXPECT_EQ(m.elements.size(), 1024u);
  EXPECT_EQ(m.nodes.size(), 65u * 9u * 3u);
  EXPECT_NO_THROW(m.validate());
  EXPECT_NEAR(m.volume(), 16.0 * 2.0 * 0.5, 1e-10);
  EXPECT_EQ(m.node_sets.at("x_min_face").size(), 27u);
  EXPECT_EQ(m.node_sets.at("x_max_face").size(), 27u);
}

TEST(StripMesh, SingleElement)
{
  StripGeometry g;
  g.length = g.width = g.thickness = 1.0;
  g.nx = g.ny = g.nz = 1;
  const Mesh m = build_strip_mesh(g);
  EXPECT_EQ(m.elements.size(), 1u);
  EXPECT_EQ(m.nodes.size(), 8u);
  EXPECT_NEAR(m.volume(), 1.0, 1e-12);
}

TEST(StripMesh, RegionsCoverTheirShareOfLength)
{
  const StripGeometry g;
  const Mesh m = build_strip_mesh(g);
  for (int e : m.element_sets.at("middle_region"))
  {
    double xc = 0.0;
    for (int n : m.elements[e]) xc += m.nodes[n].x() / 8.0;
    EXPECT_LE(std::abs(xc - 0.5 * g.length), 0.1 * g.length);
  }
  for (int e : m.element_sets.at("leg_region"))
  {
    double xc = 0.0;
    for (int n : m.elements[e]) xc += m.nodes[n].x() / 8.0;
    EXPECT_TRUE(xc <= 0.1 * g.length || xc >= 0.9 * g.length);
  }
  // 12 of 64 columns fall in each.
  EXPECT_EQ(m.element_sets.at("middle_region").size(), 12u * 8u * 2u);
  EXPECT_EQ(m.element_sets.at("leg_region").size(), 12u * 8u * 2u);
}

TEST(StripMesh, ZeroDivisionsRejected)
{
  StripGeometry g;
  g.ny = 0;
  EXPECT_THROW(build_strip_mesh(g), ConfigError);
  g = StripGeometry{};
  g.length = -1.0;
  EXPECT_THROW(build_strip_mesh(g), ConfigError);
}

TEST(CruciformMesh, DefaultCount)
{
  const CruciformGeometry g;
  const Mesh m = build_cruciform_mesh(g);
  EXPECT_EQ(m.elements.size(), 626u);
  EXPECT_EQ(g.element_count(), 626);
  EXPECT_NO_THROW(m.validate());
}

TEST(CruciformMesh, ArmFaceNodeCount)
{
  const CruciformGeometry g;
  const Mesh m = build_cruciform_mesh(g);
  const std::size_t expected = static_cast<std::size_t>(g.n_arm_width + 1) * (g.n_thickness + 1);
  EXPECT_EQ(expected, 30u);
  for (const char* face : {"x_min_face", "x_max_face", "z_min_face", "z_max_face"})
    EXPECT_EQ(m.node_sets.at(face).size(), expected) << face;
}

TEST(CruciformMesh, VolumeAndExtent)
{
  const CruciformGeometry g;
  const Mesh m = build_cruciform_mesh(g);
  const double arm = g.arm_length - 0.5 * g.center_width;
  const double area = g.center_width * g.center_width + 4.0 * g.arm_width * arm;
  EXPECT_NEAR(m.volume(), area * g.thickness, 1e-9);
  const auto [lo, hi] = bounding_box(m);
  EXPECT_NEAR(lo.x(), -g.arm_length, 1e-12);
  EXPECT_NEAR(hi.z(), g.arm_length, 1e-12);
  EXPECT_NEAR(hi.y() - lo.y(), g.thickness, 1e-12);
  EXPECT_EQ(m.element_sets.at("center_region").size() + m.element_sets.at("arms").size(), m.elements.size());
}

TEST(CruciformMesh, DegenerateArmRejected)
{
  CruciformGeometry g;
  g.arm_length = 0.5 * g.center_width;
  EXPECT_THROW(build_cruciform_mesh(g), ConfigError);
}

TEST(CruciformMesh, MisalignedLayoutListsAlternatives)
{
  CruciformGeometry g;
  g.n_arm_width = 8;  // arm edges fall between center grid lines
  try
  {
    build_cruciform_mesh(g);
    FAIL() << "expected ConfigError";
  }
  catch (const ConfigError& e)
  {
    EXPECT_NE(std::string(e.what()).find("achievable"), std::string::npos) << e.what();
  }
}

TEST(FiberField, FixedAngleZeroIsE1)
{
  const Mesh m = build_strip_mesh(StripGeometry{});
  FiberInit f;
  f.mode = FiberMode::kFixedAngle;
  f.angle_deg = 0.0;
  const auto fibers = init_fiber_field(m, f);
  ASSERT_EQ(fibers.size(), m.num_qp());
  for (const Vec3& a : fibers) EXPECT_EQ(a, Vec3::UnitX());
}

TEST(FiberField, SameSeedSameField)
{
  const Mesh m = build_strip_mesh(StripGeometry{});
  FiberInit f;
  f.seed = 1234;
  EXPECT_EQ(init_fiber_field(m, f), init_fiber_field(m, f));
  FiberInit other = f;
  other.seed = 1235;
  EXPECT_NE(init_fiber_field(m, f), init_fiber_field(m, other));
}

TEST(FiberField, InPlaneAndUnit)
{
  const Mesh m = build_cruciform_mesh(CruciformGeometry{});
  FiberInit f;
  f.seed = 9;
  f.axis_a = 0;
  f.axis_b = 2;
  for (const Vec3& a : init_fiber_field(m, f))
  {
    EXPECT_NEAR(a.norm(), 1.0, 1e-14);
    EXPECT_EQ(a.y(), 0.0);
  }
}

TEST(FiberField, AnglesUniformChiSquared)
{
  StripGeometry g;
  g.nx = 25;
  g.ny = 25;
  g.nz = 2;  // 1250 elements, 10⁴ QPs
  const Mesh m = build_strip_mesh(g);
  FiberInit f;
  f.seed = 77;
  const auto fibers = init_fiber_field(m, f);
  ASSERT_EQ(fibers.size(), 10000u);
  std::vector<int> counts(18, 0);
  for (const Vec3& a : fibers)
  {
    // Draws live in [0, π); recover the angle with the upper half-plane rule.
    double theta = std::atan2(a.y(), a.x());
    if (theta < 0.0) theta += std::numbers::pi;
    ++counts[std::min(17, static_cast<int>(theta / std::numbers::pi * 18.0))];
  }
  EXPECT_GT(flat_p_value(counts), 0.01);
}

TEST(SplitMix, ReferenceSequence)
{
  // Published reference outputs for seed 1234567.
  SplitMix64 r(1234567);
  EXPECT_EQ(r.next(), 6457827717110365317ULL);
  EXPECT_EQ(r.next(), 3203168211198807973ULL);
  EXPECT_EQ(r.next(), 9817491932198370423ULL);
}

TEST(SplitMix, UniformInUnitInterval)
{
  SplitMix64 r(0);
  for (int i = 0; i < 1000; ++i)
  {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}
