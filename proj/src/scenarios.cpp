#include "tegr/scenarios.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

namespace tegr {

namespace {

constexpr std::array<std::array<int, 3>, 8> kCorner{
    {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};

std::vector<double> linspace(double a, double b, int n)
{
  std::vector<double> v(n + 1);
  for (int i = 0; i <= n; ++i) v[i] = a + (b - a) * i / n;
  v[n] = b;
  return v;
}

/// Tensor-product grid restricted to the cells accepted by keep(i, j, k).
/// Nodes are numbered x-fastest over grid points touched by a kept cell.
Mesh grid_mesh(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& zs,
               const std::function<bool(int, int, int)>& keep)
{
  const int nx = static_cast<int>(xs.size()) - 1, ny = static_cast<int>(ys.size()) - 1,
            nz = static_cast<int>(zs.size()) - 1;
  auto gid = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  std::vector<int> id((nx + 1) * (ny + 1) * (nz + 1), -1);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (keep(i, j, k))
          for (const auto& c : kCorner) id[gid(i + c[0], j + c[1], k + c[2])] = 0;

  Mesh m;
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        if (id[gid(i, j, k)] == 0)
        {
          id[gid(i, j, k)] = static_cast<int>(m.nodes.size());
          m.nodes.emplace_back(xs[i], ys[j], zs[k]);
        }
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (keep(i, j, k))
        {
          std::array<int, 8> el;
          for (int a = 0; a < 8; ++a) el[a] = id[gid(i + kCorner[a][0], j + kCorner[a][1], k + kCorner[a][2])];
          m.elements.push_back(el);
        }
  return m;
}

std::vector<int> nodes_where(const Mesh& m, const std::function<bool(const Vec3&)>& pred)
{
  std::vector<int> out;
  for (std::size_t n = 0; n < m.nodes.size(); ++n)
    if (pred(m.nodes[n])) out.push_back(static_cast<int>(n));
  return out;
}

Vec3 centroid(const Mesh& m, int e)
{
  Vec3 c = Vec3::Zero();
  for (int n : m.elements[e]) c += m.nodes[n];
  return c / 8.0;
}

bool close(double a, double b, double scale) { return std::abs(a - b) <= 1e-9 * scale; }

}  // namespace

Mesh build_strip_mesh(const StripGeometry& g)
{
  if (g.nx < 1 || g.ny < 1 || g.nz < 1) throw ConfigError("strip: element divisions must be >= 1");
  if (!(g.length > 0 && g.width > 0 && g.thickness > 0)) throw ConfigError("strip: dimensions must be positive");
  Mesh m = grid_mesh(linspace(0, g.length, g.nx), linspace(0, g.width, g.ny), linspace(0, g.thickness, g.nz),
                     [](int, int, int) { return true; });
  const double L = g.length;
  m.node_sets["x_min_face"] = nodes_where(m, [&](const Vec3& x) { return x.x() == 0.0; });
  m.node_sets["x_max_face"] = nodes_where(m, [&](const Vec3& x) { return x.x() == L; });
  for (int e = 0; e < static_cast<int>(m.elements.size()); ++e)
  {
    const double xc = centroid(m, e).x();
    if (std::abs(xc - 0.5 * L) <= 0.1 * L) m.element_sets["middle_region"].push_back(e);
    if (xc <= 0.1 * L || xc >= 0.9 * L) m.element_sets["leg_region"].push_back(e);
  }
  m.element_sets.try_emplace("middle_region");
  m.element_sets.try_emplace("leg_region");
  m.validate();
  return m;
}

Mesh build_cruciform_mesh(const CruciformGeometry& g)
{
  const int nc = g.n_center, nw = g.n_arm_width, nl = g.n_arm_length, ny = g.n_thickness;
  if (nc < 1 || nw < 1 || nl < 1 || ny < 1) throw ConfigError("cruciform: element divisions must be >= 1");
  if (!(g.arm_length > 0 && g.arm_width > 0 && g.center_width > 0 && g.thickness > 0))
    throw ConfigError("cruciform: dimensions must be positive");
  const double c = 0.5 * g.center_width;
  if (!(g.arm_length > c)) throw ConfigError("cruciform: arm_length must exceed half the center width");
  if (nw > nc || (nc - nw) % 2 != 0 || !close(g.arm_width, nw * g.center_width / nc, g.center_width))
  {
    std::ostringstream msg;
    msg << "cruciform: arm_width " << g.arm_width << " with " << nw
        << " divisions does not align with the center grid; achievable (arm divisions, element count):";
    for (int w = nc % 2 == 0 ? 2 : 1; w <= nc; w += 2)
      msg << " (" << w << ", " << ny * (nc * nc + 4 * w * nl) << ")";
    throw ConfigError(msg.str());
  }

  auto axis = [&] {
    std::vector<double> v = linspace(-g.arm_length, -c, nl);
    const auto mid = linspace(-c, c, nc);
    v.insert(v.end(), mid.begin() + 1, mid.end());
    const auto hi = linspace(c, g.arm_length, nl);
    v.insert(v.end(), hi.begin() + 1, hi.end());
    return v;
  };
  const int lo_w = nl + (nc - nw) / 2, hi_w = lo_w + nw;
  auto in_center = [&](int i) { return i >= nl && i < nl + nc; };
  auto in_band = [&](int i) { return i >= lo_w && i < hi_w; };
  Mesh m = grid_mesh(axis(), linspace(0.0, g.thickness, ny), axis(), [&](int i, int, int k) {
    return (in_center(i) && in_center(k)) || (in_band(k) && !in_center(i)) || (in_band(i) && !in_center(k));
  });
  const double R = g.arm_length;
  m.node_sets["x_min_face"] = nodes_where(m, [&](const Vec3& x) { return x.x() == -R; });
  m.node_sets["x_max_face"] = nodes_where(m, [&](const Vec3& x) { return x.x() == R; });
  m.node_sets["z_min_face"] = nodes_where(m, [&](const Vec3& x) { return x.z() == -R; });
  m.node_sets["z_max_face"] = nodes_where(m, [&](const Vec3& x) { return x.z() == R; });
  for (int e = 0; e < static_cast<int>(m.elements.size()); ++e)
  {
    const Vec3 xc = centroid(m, e);
    const bool center = std::abs(xc.x()) < c && std::abs(xc.z()) < c;
    m.element_sets[center ? "center_region" : "arms"].push_back(e);
  }
  m.validate();
  return m;
}

std::pair<Vec3, Vec3> bounding_box(const Mesh& mesh)
{
  Vec3 lo = mesh.nodes.front(), hi = mesh.nodes.front();
  for (const Vec3& x : mesh.nodes)
  {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  return {lo, hi};
}

std::vector<Vec3> init_fiber_field(const Mesh& mesh, const FiberInit& f)
{
  if (f.axis_a == f.axis_b || f.axis_a < 0 || f.axis_a > 2 || f.axis_b < 0 || f.axis_b > 2)
    throw ConfigError("fiber plane must name two distinct axes");
  std::vector<Vec3> out(mesh.num_qp());
  SplitMix64 rng(f.seed);
  const double fixed = f.angle_deg * std::numbers::pi / 180.0;
  for (Vec3& a : out)
  {
    const double th = f.mode == FiberMode::kInPlaneUniform ? std::numbers::pi * rng.uniform() : fixed;
    a.setZero();
    a[f.axis_a] = std::cos(th);
    a[f.axis_b] = std::sin(th);
  }
  return out;
}

}  // namespace tegr
