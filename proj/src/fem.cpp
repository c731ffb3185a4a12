#include "tegr/fem.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include <Eigen/SparseLU>

namespace tegr {

namespace {

constexpr std::array<std::array<int, 3>, 8> kCorner{
    {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1}, {-1, -1, 1}, {1, -1, 1}, {1, 1, 1}, {-1, 1, 1}}};

/// Natural-coordinate gradients of the 8 shape functions at (ξ, η, ζ).
Eigen::Matrix<double, 8, 3> shape_gradients(double xi, double eta, double zeta)
{
  Eigen::Matrix<double, 8, 3> g;
  for (int a = 0; a < 8; ++a)
  {
    const double sx = kCorner[a][0], sy = kCorner[a][1], sz = kCorner[a][2];
    g(a, 0) = 0.125 * sx * (1 + sy * eta) * (1 + sz * zeta);
    g(a, 1) = 0.125 * sy * (1 + sx * xi) * (1 + sz * zeta);
    g(a, 2) = 0.125 * sz * (1 + sx * xi) * (1 + sy * eta);
  }
  return g;
}

std::array<Vec3, 8> element_coords(const Mesh& mesh, int e)
{
  std::array<Vec3, 8> X;
  for (int a = 0; a < 8; ++a) X[a] = mesh.nodes[mesh.elements[e][a]];
  return X;
}

std::array<Vec3, 8> element_disp(const Mesh& mesh, const std::vector<Vec3>& u, int e)
{
  std::array<Vec3, 8> d;
  for (int a = 0; a < 8; ++a) d[a] = u[mesh.elements[e][a]];
  return d;
}

Ten2 deformation_gradient(const Eigen::Matrix<double, 8, 3>& dNdX, const std::array<Vec3, 8>& u)
{
  Ten2 F = Ten2::Identity();
  for (int a = 0; a < 8; ++a) F += u[a] * dNdX.row(a);
  return F;
}

/// Runs body(e) for e in [0, n) on up to `threads` workers.
template <typename Body>
void parallel_for(int n, int threads, Body&& body)
{
  if (threads <= 1 || n < 2 * threads)
  {
    for (int e = 0; e < n; ++e) body(e);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t)
  {
    pool.emplace_back([&, t] {
      try
      {
        for (int e = t; e < n; e += threads) body(e);
      }
      catch (...)
      {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

using ElemVec = Eigen::Matrix<double, 24, 1>;
using ElemMat = Eigen::Matrix<double, 24, 24>;

}  // namespace

std::array<QuadraturePoint, kQuadPerElement> hex8_quadrature(const std::array<Vec3, 8>& X,
                                                             const std::array<Vec3, 8>& u)
{
  const double g = 1.0 / std::sqrt(3.0);
  std::array<QuadraturePoint, kQuadPerElement> out;
  for (int q = 0; q < kQuadPerElement; ++q)
  {
    const auto dNdxi = shape_gradients(g * kCorner[q][0], g * kCorner[q][1], g * kCorner[q][2]);
    Ten2 Jm = Ten2::Zero();  // dX/dξ
    for (int a = 0; a < 8; ++a) Jm += X[a] * dNdxi.row(a);
    const double detJ = Jm.determinant();
    if (!(detJ > 0.0)) throw std::invalid_argument("hex8: non-positive reference Jacobian");
    QuadraturePoint& qp = out[q];
    qp.dNdX = dNdxi * Jm.inverse();
    qp.w_detJ = detJ;
    qp.F = deformation_gradient(qp.dNdX, u);
    if (!(qp.F.determinant() > 0.0)) throw StepRejected("hex8: inverted element");
  }
  return out;
}

void Mesh::validate() const
{
  const int n = static_cast<int>(nodes.size());
  if (elements.empty()) throw std::invalid_argument("mesh has no elements");
  for (const auto& el : elements)
    for (int v : el)
      if (v < 0 || v >= n) throw std::invalid_argument("mesh: node index out of range");
  for (const auto& [name, set] : node_sets)
    for (int v : set)
      if (v < 0 || v >= n) throw std::invalid_argument("mesh: node set '" + name + "' out of range");
  for (const auto& [name, set] : element_sets)
    for (int e : set)
      if (e < 0 || e >= static_cast<int>(elements.size()))
        throw std::invalid_argument("mesh: element set '" + name + "' out of range");
  std::array<Vec3, 8> z;
  z.fill(Vec3::Zero());
  for (std::size_t e = 0; e < elements.size(); ++e) hex8_quadrature(element_coords(*this, e), z);
}

double Mesh::volume() const
{
  std::array<Vec3, 8> z;
  z.fill(Vec3::Zero());
  double v = 0.0;
  for (std::size_t e = 0; e < elements.size(); ++e)
    for (const auto& qp : hex8_quadrature(element_coords(*this, e), z)) v += qp.w_detJ;
  return v;
}

GlobalState initial_state(const Mesh& mesh, const std::vector<Vec3>& fibers)
{
  if (fibers.size() != mesh.num_qp()) throw std::invalid_argument("initial_state: one fiber per QP required");
  GlobalState s;
  s.u.assign(mesh.nodes.size(), Vec3::Zero());
  s.gp.reserve(fibers.size());
  for (const Vec3& a : fibers) s.gp.push_back(GaussPointState::initial(a));
  return s;
}

Model::Model(Mesh mesh, std::vector<DirichletProgram> programs, MaterialParams params, SolverOptions opts)
    : mesh_(std::move(mesh)), programs_(std::move(programs)), params_(params), opts_(opts)
{
  mesh_.validate();
  params_.validate();
  std::array<Vec3, 8> z;
  z.fill(Vec3::Zero());
  ref_.reserve(mesh_.elements.size());
  for (std::size_t e = 0; e < mesh_.elements.size(); ++e) ref_.push_back(hex8_quadrature(element_coords(mesh_, e), z));

  std::vector<bool> fixed(num_dofs(), false);
  for (const auto& prog : programs_)
  {
    auto it = mesh_.node_sets.find(prog.node_set);
    if (it == mesh_.node_sets.end()) throw std::invalid_argument("unknown node set '" + prog.node_set + "'");
    for (int n : it->second)
      for (int c = 0; c < 3; ++c)
        if (prog.mask[c]) fixed[3 * n + c] = true;
  }
  free_index_.assign(num_dofs(), -1);
  for (std::size_t d = 0; d < num_dofs(); ++d)
    if (!fixed[d]) free_index_[d] = num_free_++;
}

void Model::apply_dirichlet(std::vector<Vec3>& u, double t) const
{
  for (const auto& prog : programs_)
  {
    const Vec3 v = prog.value(t);
    for (int n : mesh_.node_sets.at(prog.node_set))
      for (int c = 0; c < 3; ++c)
        if (prog.mask[c]) u[n][c] = v[c];
  }
}

AssemblyResult Model::assemble(const std::vector<Vec3>& u, const std::vector<GaussPointState>& gp_old,
                               const std::vector<GaussPointState>* guess, double t_new, double dt,
                               bool with_tangent) const
{
  const int ne = static_cast<int>(mesh_.elements.size());
  AssemblyResult out;
  out.trial.resize(mesh_.num_qp());
  out.stress.resize(mesh_.num_qp());
  std::vector<ElemVec> fe(ne);
  std::vector<ElemMat> ke(with_tangent ? ne : 0);

  LocalOptions lo = opts_.local;
  lo.compute_tangent = with_tangent;
  lo.compute_dissipation = false;

  parallel_for(ne, opts_.threads, [&](int e) {
    const auto disp = element_disp(mesh_, u, e);
    ElemVec f = ElemVec::Zero();
    ElemMat k = ElemMat::Zero();
    for (int q = 0; q < kQuadPerElement; ++q)
    {
      const QuadraturePoint& rq = ref_[e][q];
      const Ten2 F = deformation_gradient(rq.dNdX, disp);
      if (!(F.determinant() > 0.0)) throw StepRejected("element " + std::to_string(e) + " inverted");
      const std::size_t g = static_cast<std::size_t>(e) * kQuadPerElement + q;
      StepResult r;
      try
      {
        r = integrate_point(F, t_new, dt, gp_old[g], params_, lo, guess ? &(*guess)[g] : nullptr);
      }
      catch (const LocalSolveError& err)
      {
        throw StepRejected("QP " + std::to_string(g) + " local solve: " + err.what());
      }
      catch (const std::domain_error& err)
      {
        throw StepRejected("QP " + std::to_string(g) + " local evaluation: " + err.what());
      }
      catch (const std::invalid_argument& err)
      {
        throw StepRejected("QP " + std::to_string(g) + " local evaluation: " + err.what());
      }

      // B maps nodal displacement increments to strain-like Voigt δE.
      Eigen::Matrix<double, 6, 24> B;
      for (int a = 0; a < 8; ++a)
      {
        const Eigen::RowVector3d dN = rq.dNdX.row(a);
        for (int c = 0; c < 3; ++c)
        {
          const int col = 3 * a + c;
          for (int I = 0; I < 6; ++I)
          {
            const int i = kVoigtPairs[I][0], j = kVoigtPairs[I][1];
            B(I, col) = (i == j) ? F(c, i) * dN(i) : F(c, i) * dN(j) + F(c, j) * dN(i);
          }
        }
      }
      const double w = rq.w_detJ;
      f.noalias() += w * B.transpose() * r.stress.S.stress_voigt();
      if (with_tangent)
      {
        const Mat6 D = 2.0 * r.tangent.matrix();
        k.noalias() += w * B.transpose() * D * B;
        const Ten2 S = r.stress.S.matrix();
        for (int a = 0; a < 8; ++a)
          for (int b = 0; b < 8; ++b)
          {
            const double gab = w * rq.dNdX.row(a) * S * rq.dNdX.row(b).transpose();
            for (int c = 0; c < 3; ++c) k(3 * a + c, 3 * b + c) += gab;
          }
      }
      out.trial[g] = r.state_new;
      out.stress[g] = r.stress;
    }
    fe[e] = f;
    if (with_tangent) ke[e] = k;
  });

  out.residual = Eigen::VectorXd::Zero(num_dofs());
  if (with_tangent) out.triplets.reserve(static_cast<std::size_t>(ne) * 576);
  for (int e = 0; e < ne; ++e)
  {
    const auto& el = mesh_.elements[e];
    for (int a = 0; a < 8; ++a)
      for (int c = 0; c < 3; ++c) out.residual[3 * el[a] + c] += fe[e][3 * a + c];
    if (!with_tangent) continue;
    for (int a = 0; a < 8; ++a)
      for (int c = 0; c < 3; ++c)
        for (int b = 0; b < 8; ++b)
          for (int d = 0; d < 3; ++d)
            out.triplets.emplace_back(3 * el[a] + c, 3 * el[b] + d, ke[e](3 * a + c, 3 * b + d));
  }
  return out;
}

std::map<std::string, Vec3> Model::reactions(const Eigen::VectorXd& f_int) const
{
  std::map<std::string, Vec3> out;
  for (const auto& prog : programs_)
  {
    Vec3& r = out.try_emplace(prog.node_set, Vec3::Zero()).first->second;
    std::set<int> nodes(mesh_.node_sets.at(prog.node_set).begin(), mesh_.node_sets.at(prog.node_set).end());
    for (int n : nodes)
      for (int c = 0; c < 3; ++c)
        if (prog.mask[c]) r[c] += f_int[3 * n + c];
  }
  return out;
}

bool Model::newton(const GlobalState& state, double t_new, GlobalState& out, TimeSeriesRow& row) const
{
  const double dt = t_new - state.time;
  const std::size_t nd = num_dofs();
  std::vector<Vec3> u = state.u;
  std::vector<Vec3> target = state.u;
  apply_dirichlet(target, t_new);

  // Prescribed increment on constrained dofs, applied through the first
  // linear solve so the boundary layer is not distorted in one jump.
  Eigen::VectorXd du_c = Eigen::VectorXd::Zero(nd);
  for (std::size_t d = 0; d < nd; ++d)
    if (free_index_[d] < 0) du_c[d] = target[d / 3][d % 3] - u[d / 3][d % 3];

  std::vector<GaussPointState> guess = state.gp;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;

  for (int it = 0; it <= opts_.max_newton; ++it)
  {
    AssemblyResult A = assemble(u, state.gp, &guess, t_new, dt, true);
    guess = A.trial;

    Eigen::VectorXd r(num_free_);
    for (std::size_t d = 0; d < nd; ++d)
      if (free_index_[d] >= 0) r[free_index_[d]] = A.residual[d];
    const bool pending = it == 0 && du_c.lpNorm<Eigen::Infinity>() > 0.0;
    const double scale = A.residual.lpNorm<Eigen::Infinity>();
    if (!r.allFinite()) return false;
    if (!pending && r.lpNorm<Eigen::Infinity>() <= std::max(opts_.rel_tol * scale, opts_.abs_tol))
    {
      out.u = u;
      out.gp = std::move(A.trial);
      out.time = t_new;
      row.time = t_new;
      row.reactions = reactions(A.residual);
      row.newton_iterations += it;
      return true;
    }
    if (it == opts_.max_newton) break;
    if (num_free_ == 0)
    {
      for (std::size_t d = 0; d < nd; ++d) u[d / 3][d % 3] += du_c[d];
      continue;
    }

    std::vector<Eigen::Triplet<double>> kff;
    kff.reserve(A.triplets.size());
    for (const auto& tr : A.triplets)
    {
      const int fi = free_index_[tr.row()];
      if (fi < 0) continue;
      const int fj = free_index_[tr.col()];
      if (fj >= 0)
        kff.emplace_back(fi, fj, tr.value());
      else if (pending)
        r[fi] += tr.value() * du_c[tr.col()];
    }
    Eigen::SparseMatrix<double> K(num_free_, num_free_);
    K.setFromTriplets(kff.begin(), kff.end());
    if (!analyzed)
    {
      lu.analyzePattern(K);
      analyzed = true;
    }
    lu.factorize(K);
    if (lu.info() != Eigen::Success) return false;
    const Eigen::VectorXd dx = lu.solve(-r);
    if (lu.info() != Eigen::Success || !dx.allFinite()) return false;
    for (std::size_t d = 0; d < nd; ++d)
    {
      const int fi = free_index_[d];
      u[d / 3][d % 3] += fi >= 0 ? dx[fi] : (pending ? du_c[d] : 0.0);
    }
  }
  return false;
}

std::pair<GlobalState, TimeSeriesRow> Model::attempt(const GlobalState& state, double t_new, int depth) const
{
  GlobalState out;
  TimeSeriesRow row;
  bool ok = false;
  try
  {
    ok = newton(state, t_new, out, row);
  }
  catch (const StepRejected&)
  {
    ok = false;
  }
  if (ok) return {std::move(out), std::move(row)};
  if (depth >= opts_.max_bisections)
    throw StepRejected("step to t = " + std::to_string(t_new) + " failed after " + std::to_string(depth) +
                       " bisections");
  const double t_mid = 0.5 * (state.time + t_new);
  auto [mid, row1] = attempt(state, t_mid, depth + 1);
  auto [end, row2] = attempt(mid, t_new, depth + 1);
  row2.newton_iterations += row1.newton_iterations;
  row2.substeps += row1.substeps;
  return {std::move(end), std::move(row2)};
}

std::pair<GlobalState, TimeSeriesRow> Model::solve_step(const GlobalState& state, double t_new) const
{
  if (state.u.size() != mesh_.nodes.size() || state.gp.size() != mesh_.num_qp())
    throw std::invalid_argument("solve_step: state does not match mesh");
  if (!(t_new >= state.time)) throw std::invalid_argument("solve_step: time must not decrease");
  auto res = attempt(state, t_new, 0);
  std::tie(res.second.mean_rho_co0, res.second.mean_J) = means(res.first);
  return res;
}

std::pair<double, double> Model::means(const GlobalState& state) const
{
  double vol = 0.0, rho = 0.0, jac = 0.0;
  for (std::size_t e = 0; e < mesh_.elements.size(); ++e)
  {
    const auto disp = element_disp(mesh_, state.u, static_cast<int>(e));
    for (int q = 0; q < kQuadPerElement; ++q)
    {
      const QuadraturePoint& rq = ref_[e][q];
      const double w = rq.w_detJ;
      vol += w;
      rho += w * state.gp[e * kQuadPerElement + q].rho_co0;
      jac += w * deformation_gradient(rq.dNdX, disp).determinant();
    }
  }
  return {rho / vol, jac / vol};
}

std::vector<StressBundle> Model::stresses(const GlobalState& state) const
{
  std::vector<StressBundle> out(mesh_.num_qp());
  parallel_for(static_cast<int>(mesh_.elements.size()), opts_.threads, [&](int e) {
    const auto disp = element_disp(mesh_, state.u, e);
    for (int q = 0; q < kQuadPerElement; ++q)
    {
      const std::size_t g = static_cast<std::size_t>(e) * kQuadPerElement + q;
      out[g] = evaluate_stress(deformation_gradient(ref_[e][q].dNdX, disp), state.gp[g], params_);
    }
  });
  return out;
}

std::vector<TimeSeriesRow> run_simulation(const Model& model, GlobalState state, const RunOptions& opts,
                                          const RunCallbacks& cb)
{
  constexpr double kSnap = 1e-9;
  auto on_grid = [](double t) { return std::round(t * 1e9) / 1e9; };
  std::vector<double> hits(opts.event_times);
  hits.insert(hits.end(), opts.snapshot_times.begin(), opts.snapshot_times.end());
  hits.push_back(opts.horizon);
  std::sort(hits.begin(), hits.end());

  auto is_snapshot = [&](double t) {
    return std::any_of(opts.snapshot_times.begin(), opts.snapshot_times.end(),
                       [&](double s) { return std::abs(s - t) < kSnap; });
  };
  if (cb.on_snapshot && is_snapshot(state.time)) cb.on_snapshot(state, state.time);

  std::vector<TimeSeriesRow> rows;
  double dt = opts.dt_base;
  int accepted = 0;
  while (state.time < opts.horizon - kSnap)
  {
    const double t = state.time;
    const double next = *std::upper_bound(hits.begin(), hits.end(), t + kSnap);
    double t_new = on_grid(t + dt);
    if (t_new > next - kSnap) t_new = next;
    auto [s, row] = model.solve_step(state, t_new);
    const double taken = t_new - t;
    state = std::move(s);
    if (cb.on_step) cb.on_step(state, row, taken);
    const bool bisected = row.substeps > 1;
    rows.push_back(std::move(row));
    if (cb.on_snapshot && is_snapshot(t_new)) cb.on_snapshot(state, t_new);

    if (bisected)
    {
      dt = std::max(0.5 * dt, opts.dt_base / 64.0);
      accepted = 0;
    }
    else if (++accepted >= opts.grow_after && dt < opts.dt_max)
    {
      dt = std::min(dt * opts.grow_factor, opts.dt_max);
      accepted = 0;
    }
  }
  return rows;
}

}  // namespace tegr
