#pragma once

// Alternating-direction quasi-gradient flows for the Ericksen and the
// uniaxially constrained models: tangential step, nodal projection,
// implicit s-step, with monotonicity bookkeeping and termination.
//
// The tangent systems are reduced to (d-1) dofs per free node through
// deterministic per-node Householder bases, so every solve is an
// unconstrained SPD system handled by CG. Coupling terms (anchoring,
// electric) are exactly quadratic in the director, so they enter the
// tangent system implicitly; this keeps every step an exact minimization
// of the local quadratic model and preserves the per-step energy decrease.

#include <functional>
#include <vector>

#include "nlc/couplings.hpp"
#include "nlc/energy.hpp"
#include "nlc/fem_core.hpp"
#include "nlc/fields.hpp"
#include "nlc/potentials.hpp"

namespace nlc {

struct FlowConfig {
  double dt = 1e-2;
  double stop_tol = 1e-8;      // on ||s^{k+1} - s^k||_{L2}
  index_t max_steps = 100000;
  double cfl_constant = 0.5;   // uniaxial: requires dt <= C h^{d/2}
  bool cfl_warn_only = false;
  double tangent_scale = 1.0;  // Ericksen tangential step scale
  double sigma_reg = 0.0;      // 0 = automatic (1e-10 x matrix scale)
  double solver_tol = 1e-10;
  int solver_max_iter = 0;     // 0 = automatic
};

template <std::size_t D>
struct Couplings {
  const PhaseFieldColloid<D>* colloid = nullptr;
  AnchoringParams anchoring;
  ElectricParams<D> electric;

  bool anchoring_on() const { return colloid && anchoring.enabled(); }
  bool electric_on() const { return electric.enabled(); }
};

template <std::size_t D>
struct FlowState {
  index_t step = 0;
  DegreeField s;
  DirectorField<D> director;  // Ericksen
  LineField<D> line;          // uniaxial
  bool uses_line = false;
  std::vector<EnergyBreakdown> energy_trace;
  double last_ds_norm = 0;
  double last_tangent_norm = 0;
  // telescoping accumulator: sum_k (||t^k||^2_* + ||s^{k+1}-s^k||^2_L2)
  double dissipation_sum = 0;
  index_t singular_nodes = 0;  // |s_i| < 1e-6
  bool converged = false;

  double min_s() const { return s.min_value(); }
  void count_singular() {
    singular_nodes = 0;
    for (double v : s.s)
      if (std::abs(v) < 1e-6) ++singular_nodes;
  }
};

// Deterministic orthonormal tangent basis at a unit vector, via the
// Householder reflection that maps n to a signed coordinate axis.
template <std::size_t D>
std::array<Vec<D>, D - 1> tangent_basis(const Vec<D>& n) {
  std::size_t k = 0;
  for (std::size_t c = 1; c < D; ++c)
    if (std::abs(n[c]) > std::abs(n[k])) k = c;
  double sgn = n[k] >= 0 ? 1.0 : -1.0;
  Vec<D> w = n;
  w[k] += sgn;
  double w2 = dot(w, w);
  std::array<Vec<D>, D - 1> basis;
  int out = 0;
  for (std::size_t j = 0; j < D; ++j) {
    if (j == k) continue;
    Vec<D> col{};
    for (std::size_t r = 0; r < D; ++r) col[r] = (r == j ? 1.0 : 0.0) - 2.0 * w[r] * w[j] / w2;
    basis[out++] = col;
  }
  return basis;
}

namespace flow_detail {

// Index map for tangent dofs: (d-1) per free node, -1 for pinned nodes.
struct TangentDofs {
  std::vector<index_t> offset;  // node -> first dof or -1
  index_t count = 0;
};

template <std::size_t D>
TangentDofs tangent_dofs(const BoundaryData<D>& bc) {
  TangentDofs td;
  td.offset.assign(bc.dir_fixed.size(), -1);
  for (std::size_t i = 0; i < bc.dir_fixed.size(); ++i) {
    if (!bc.dir_fixed[i]) {
      td.offset[i] = td.count;
      td.count += D - 1;
    }
  }
  return td;
}

// Adds the [2 x coupling] node-diagonal blocks to the tangent system and
// the corresponding gradient terms to the right-hand side.
template <std::size_t D>
void add_coupling_blocks(const Couplings<D>& cpl, const LumpedMass& lumped,
                         const DegreeField& s, const std::vector<Vec<D>>& n,
                         const TangentDofs& td,
                         const std::vector<std::array<Vec<D>, D - 1>>& basis,
                         SparseSymOperator& A, std::vector<double>& rhs) {
  const index_t N = (index_t)n.size();
  const double area = sphere_area_const(D);
  for (index_t i = 0; i < N; ++i) {
    if (td.offset[i] < 0) continue;
    Mat<D> H = mat_zero<D>();
    bool any = false;
    if (cpl.anchoring_on()) {
      Mat<D> Ha = anchoring_matrix(cpl.anchoring, *cpl.colloid, s.s[i], i);
      H = H + (area * cpl.colloid->eps) * Ha;
      any = true;
    }
    if (cpl.electric_on()) {
      Mat<D> He = electric_matrix(cpl.electric, s.s[i], i);
      H = H + cpl.electric.k_ext * He;
      any = true;
    }
    if (!any) continue;
    Vec<D> Hn = matvec(H, n[i]);
    for (int a = 0; a < D - 1; ++a) {
      for (int b = 0; b < D - 1; ++b)
        A.add(td.offset[i] + a, td.offset[i] + b,
              2.0 * lumped.m[i] * dot(basis[i][a], matvec(H, basis[i][b])));
      rhs[td.offset[i] + a] -= 2.0 * lumped.m[i] * dot(basis[i][a], Hn);
    }
  }
}

inline double auto_sigma(const SparseSymOperator& A) {
  double mx = 0;
  for (index_t i = 0; i < A.dimension(); ++i)
    mx = std::max(mx, A.diag_entry(i));
  return 1e-10 * std::max(mx, 1e-300);
}

}  // namespace flow_detail

// ---------------------------------------------------------------------------
// Ericksen tangential step: find t in the discrete tangent space with
//   <t, v>_* = -delta_n Ering[s, n; v] - 2 delta_n (E_a + E_ext)[v],
// where <t,v>_* = delta_n Ering[s, t; v] + 2 x couplings + sigma (t,v)_lumped.

template <std::size_t D>
std::vector<Vec<D>> erk_tangent_step(const StiffnessGraph& g,
                                     const LumpedMass& lumped,
                                     const DegreeField& s,
                                     const DirectorField<D>& n,
                                     const BoundaryData<D>& bc,
                                     const Couplings<D>& cpl,
                                     const FlowConfig& cfg) {
  auto td = flow_detail::tangent_dofs(bc);
  std::vector<std::array<Vec<D>, D - 1>> basis(n.n.size());
  for (std::size_t i = 0; i < n.n.size(); ++i)
    if (td.offset[i] >= 0) basis[i] = tangent_basis(n.n[i]);

  SparseSymOperator A(td.count);
  std::vector<double> rhs(td.count, 0.0);
  const double inv_tau = 1.0 / cfg.tangent_scale;
  for (const auto& e : g.edges) {
    double w = 0.5 * (sq(s.s[e.i]) + sq(s.s[e.j]));
    double kw = 2.0 * e.k * w * inv_tau;
    bool fi = td.offset[e.i] >= 0, fj = td.offset[e.j] >= 0;
    if (fi)
      for (int a = 0; a < D - 1; ++a) A.add(td.offset[e.i] + a, td.offset[e.i] + a, kw);
    if (fj)
      for (int a = 0; a < D - 1; ++a) A.add(td.offset[e.j] + a, td.offset[e.j] + a, kw);
    if (fi && fj) {
      for (int a = 0; a < D - 1; ++a)
        for (int b = 0; b < D - 1; ++b) {
          double v = -kw * dot(basis[e.i][a], basis[e.j][b]);
          A.add(td.offset[e.i] + a, td.offset[e.j] + b, v);
          A.add(td.offset[e.j] + b, td.offset[e.i] + a, v);
        }
    }
    // RHS: +2 k w (n_j . tau_i^a) at i, symmetric at j
    double kw0 = 2.0 * e.k * w;
    if (fi)
      for (int a = 0; a < D - 1; ++a)
        rhs[td.offset[e.i] + a] += kw0 * dot(n.n[e.j], basis[e.i][a]);
    if (fj)
      for (int a = 0; a < D - 1; ++a)
        rhs[td.offset[e.j] + a] += kw0 * dot(n.n[e.i], basis[e.j][a]);
  }
  flow_detail::add_coupling_blocks(cpl, lumped, s, n.n, td, basis, A, rhs);
  // lumped-mass regularization for patches where s vanishes
  {
    SparseSymOperator probe = A;
    probe.finalize();
    double sigma = cfg.sigma_reg > 0 ? cfg.sigma_reg : flow_detail::auto_sigma(probe);
    for (index_t i = 0; i < (index_t)n.n.size(); ++i)
      if (td.offset[i] >= 0)
        for (int a = 0; a < D - 1; ++a)
          A.add(td.offset[i] + a, td.offset[i] + a, sigma * lumped.m[i]);
  }
  A.finalize();
  std::vector<double> x;
  if (td.count > 0) cg_solve(A, rhs, x, cfg.solver_tol, cfg.solver_max_iter);
  std::vector<Vec<D>> t(n.n.size(), vec_zero<D>());
  for (std::size_t i = 0; i < n.n.size(); ++i) {
    if (td.offset[i] < 0) continue;
    for (int a = 0; a < D - 1; ++a)
      t[i] = t[i] + x[td.offset[i] + a] * basis[i][a];
  }
  return t;
}

// ---------------------------------------------------------------------------
// Uniaxial weighted tangent step:
//  (1/dt)(t,v)_{H1_{s^2}} + delta_Theta Ering[s, T; V] + 2 couplings(t, v)
//      = -delta_Theta Ering[s, Theta; V] - 2 couplings(n, v),
// with V_i = n_i (x) v_i + v_i (x) n_i. The L2 part of the weighted inner
// product is lumped; the gradient part uses the exact elementwise integral
// of the P1 weight s^2.

template <std::size_t D>
std::vector<Vec<D>> uni_tangent_step(const SimplicialMesh<D>& mesh,
                                     const StiffnessGraph& g,
                                     const LumpedMass& lumped,
                                     const DegreeField& s, const LineField<D>& th,
                                     const BoundaryData<D>& bc,
                                     const Couplings<D>& cpl,
                                     const FlowConfig& cfg) {
  auto td = flow_detail::tangent_dofs(bc);
  std::vector<std::array<Vec<D>, D - 1>> basis(th.n.size());
  for (std::size_t i = 0; i < th.n.size(); ++i)
    if (td.offset[i] >= 0) basis[i] = tangent_basis(th.n[i]);

  SparseSymOperator A(td.count);
  std::vector<double> rhs(td.count, 0.0);
  const double inv_dt = 1.0 / cfg.dt;

  // weighted H1 inner product
  for (index_t i = 0; i < (index_t)th.n.size(); ++i)
    if (td.offset[i] >= 0)
      for (int a = 0; a < D - 1; ++a)
        A.add(td.offset[i] + a, td.offset[i] + a, inv_dt * lumped.m[i]);
  for (index_t c = 0; c < mesh.n_cells(); ++c) {
    double wT = elem_int_square(mesh, s.s, c);
    if (wT <= 0) continue;
    auto grads = mesh.cell_grads(c);
    for (int a = 0; a <= D; ++a) {
      index_t ia = mesh.cells[c][a];
      if (td.offset[ia] < 0) continue;
      for (int b = 0; b <= D; ++b) {
        index_t ib = mesh.cells[c][b];
        if (td.offset[ib] < 0) continue;
        double gg = inv_dt * wT * dot(grads[a], grads[b]);
        for (int p = 0; p < D - 1; ++p)
          for (int q = 0; q < D - 1; ++q)
            A.add(td.offset[ia] + p, td.offset[ib] + q,
                  gg * dot(basis[ia][p], basis[ib][q]));
      }
    }
  }

  // implicit main form and explicit main gradient
  for (const auto& e : g.edges) {
    double w = 0.5 * (sq(s.s[e.i]) + sq(s.s[e.j]));
    double kw = 2.0 * e.k * w;
    bool fi = td.offset[e.i] >= 0, fj = td.offset[e.j] >= 0;
    double c = dot(th.n[e.i], th.n[e.j]);
    if (fi)
      for (int a = 0; a < D - 1; ++a)
        A.add(td.offset[e.i] + a, td.offset[e.i] + a, 2.0 * kw);
    if (fj)
      for (int a = 0; a < D - 1; ++a)
        A.add(td.offset[e.j] + a, td.offset[e.j] + a, 2.0 * kw);
    if (fi && fj) {
      for (int a = 0; a < D - 1; ++a) {
        for (int b = 0; b < D - 1; ++b) {
          double v = -2.0 * kw * (c * dot(basis[e.i][a], basis[e.j][b]) +
                                  dot(th.n[e.i], basis[e.j][b]) *
                                      dot(basis[e.i][a], th.n[e.j]));
          A.add(td.offset[e.i] + a, td.offset[e.j] + b, v);
          A.add(td.offset[e.j] + b, td.offset[e.i] + a, v);
        }
      }
    }
    if (fi)
      for (int a = 0; a < D - 1; ++a)
        rhs[td.offset[e.i] + a] += 2.0 * kw * c * dot(th.n[e.j], basis[e.i][a]);
    if (fj)
      for (int a = 0; a < D - 1; ++a)
        rhs[td.offset[e.j] + a] += 2.0 * kw * c * dot(th.n[e.i], basis[e.j][a]);
  }
  flow_detail::add_coupling_blocks(cpl, lumped, s, th.n, td, basis, A, rhs);
  A.finalize();
  std::vector<double> x;
  if (td.count > 0) cg_solve(A, rhs, x, cfg.solver_tol, cfg.solver_max_iter);
  std::vector<Vec<D>> t(th.n.size(), vec_zero<D>());
  for (std::size_t i = 0; i < th.n.size(); ++i) {
    if (td.offset[i] < 0) continue;
    for (int a = 0; a < D - 1; ++a)
      t[i] = t[i] + x[td.offset[i] + a] * basis[i][a];
  }
  return t;
}

// Weighted H1 norm squared of a nodal vector field (the tangent update).
template <std::size_t D>
double weighted_h1_norm_sq(const SimplicialMesh<D>& mesh, const LumpedMass& lumped,
                           const DegreeField& s, const std::vector<Vec<D>>& t) {
  double acc = 0;
  for (index_t i = 0; i < (index_t)t.size(); ++i)
    acc += lumped.m[i] * dot(t[i], t[i]);
  for (index_t c = 0; c < mesh.n_cells(); ++c) {
    double wT = elem_int_square(mesh, s.s, c);
    auto grads = mesh.cell_grads(c);
    for (std::size_t comp = 0; comp < D; ++comp) {
      Vec<D> gcomp = vec_zero<D>();
      for (int a = 0; a <= D; ++a)
        gcomp = gcomp + t[mesh.cells[c][a]][comp] * grads[a];
      acc += wT * dot(gcomp, gcomp);
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Projections. |n_i + t_i| = sqrt(1 + |t_i|^2) >= 1 for tangential t.

template <std::size_t D>
void project_director(DirectorField<D>& n, const std::vector<Vec<D>>& t) {
  for (std::size_t i = 0; i < n.n.size(); ++i) {
    Vec<D> m = n.n[i] + t[i];
    double len = norm(m);
    if (len == 0.0)
      throw NumericalError("projection: zero update at node " + std::to_string(i));
    n.n[i] = (1.0 / len) * m;
  }
}

template <std::size_t D>
void project_line(LineField<D>& th, const std::vector<Vec<D>>& t) {
  for (std::size_t i = 0; i < th.n.size(); ++i) {
    Vec<D> m = th.n[i] + t[i];
    if (norm(m) == 0.0)
      throw NumericalError("projection: zero update at node " + std::to_string(i));
    th.set_node(i, m);
  }
}

// ---------------------------------------------------------------------------
// Implicit s-step, shared by both models. dir_sq_edge holds |delta dir|^2
// per edge for the updated orientation field.

template <std::size_t D>
DegreeField s_step(const SimplicialMesh<D>& mesh, const StiffnessGraph& g,
                   const SparseSymOperator& mass, const LumpedMass& lumped,
                   const DegreeField& s_old, const std::vector<double>& dir_sq_edge,
                   double kappa, const DoubleWell& well,
                   const BoundaryData<D>& bc, const Couplings<D>& cpl,
                   const FlowConfig& cfg,
                   const std::vector<Vec<D>>* dir_for_couplings) {
  const index_t N = mesh.n_vertices();
  const double inv_dt = 1.0 / cfg.dt;
  const double inv_eta = 1.0 / well.eta_bulk;

  if (!well.psi_c_is_quadratic())
    throw ConfigError("s_step: non-quadratic psi_c not supported by the linear step");

  // D_i = sum_{j ~ i} k_ij |delta dir|^2 (nonnegative on weakly acute meshes)
  std::vector<double> Dg(N, 0.0);
  for (std::size_t eix = 0; eix < g.edges.size(); ++eix) {
    const auto& e = g.edges[eix];
    Dg[e.i] += e.k * dir_sq_edge[eix];
    Dg[e.j] += e.k * dir_sq_edge[eix];
  }

  SparseSymOperator A(N);
  std::vector<double> rhs(N, 0.0);
  // time derivative and implicit quadratic bulk, both on the consistent mass
  const double mass_coeff = inv_dt + 2.0 * well.psi_c_quad_coeff() * inv_eta;
  for (index_t c = 0; c < mesh.n_cells(); ++c) {
    double w = mesh.cell_volume(c) / ((D + 1) * (D + 2));
    for (int a = 0; a <= D; ++a)
      for (int b = 0; b <= D; ++b)
        A.add(mesh.cells[c][a], mesh.cells[c][b],
              mass_coeff * w * (a == b ? 2.0 : 1.0));
  }
  // kappa-weighted stiffness
  for (index_t c = 0; c < mesh.n_cells(); ++c) {
    double vol = mesh.cell_volume(c);
    auto grads = mesh.cell_grads(c);
    for (int a = 0; a <= D; ++a)
      for (int b = 0; b <= D; ++b)
        A.add(mesh.cells[c][a], mesh.cells[c][b],
              kappa * vol * dot(grads[a], grads[b]));
  }
  for (index_t i = 0; i < N; ++i)
    if (Dg[i] != 0.0) A.add(i, i, 0.5 * Dg[i]);

  // RHS: (M s^k)/dt + psi_e'(s^k)/eta - psi_c-linear - couplings
  std::vector<double> Ms;
  mass.apply(s_old.s, Ms);
  for (index_t i = 0; i < N; ++i) rhs[i] += inv_dt * Ms[i];
  auto dpsi_e = poly::derivative(well.psi_e);
  auto load = assemble_poly_load(mesh, s_old.s, dpsi_e);
  for (index_t i = 0; i < N; ++i) rhs[i] += inv_eta * load[i];
  if (double a1 = well.psi_c_lin_coeff(); a1 != 0.0) {
    std::vector<double> ones(N, 1.0), Mo;
    mass.apply(ones, Mo);
    for (index_t i = 0; i < N; ++i) rhs[i] -= inv_eta * a1 * Mo[i];
  }
  if (cpl.anchoring_on()) {
    auto f = anchoring_s_forms(cpl.anchoring, *cpl.colloid, *dir_for_couplings);
    double scale = sphere_area_const(D) * cpl.colloid->eps;
    for (index_t i = 0; i < N; ++i) {
      A.add(i, i, scale * lumped.m[i] * f.a_diag[i]);
      rhs[i] -= scale * lumped.m[i] * (0.5 * f.omega[i] - f.zeta[i]);
    }
  }
  if (cpl.electric_on()) {
    auto gels = electric_s_gradient(cpl.electric, lumped, *dir_for_couplings);
    for (index_t i = 0; i < N; ++i) rhs[i] -= gels[i];
  }
  A.finalize();

  // Dirichlet elimination
  std::vector<char> mask(N, 0);
  std::vector<double> xfix(N, 0.0);
  for (index_t i = 0; i < N; ++i) {
    if (bc.s_fixed[i]) {
      mask[i] = 1;
      xfix[i] = bc.s_value[i];
    }
  }
  std::vector<double> Axfix;
  A.apply(xfix, Axfix);
  for (index_t i = 0; i < N; ++i) rhs[i] -= Axfix[i];
  std::vector<double> y;
  cg_solve(A, rhs, y, cfg.solver_tol, cfg.solver_max_iter, &mask);
  DegreeField out = s_old;
  for (index_t i = 0; i < N; ++i) out.s[i] = mask[i] ? xfix[i] : y[i] + xfix[i];
  out.clamp();
  return out;
}

// ---------------------------------------------------------------------------
// Full energy with couplings.

template <std::size_t D>
EnergyBreakdown evaluate_energy(const SimplicialMesh<D>& mesh,
                                const StiffnessGraph& g, const LumpedMass& lumped,
                                const DoubleWell& well, double kappa,
                                const DegreeField& s, const DirectorField<D>& n,
                                const Couplings<D>& cpl) {
  EnergyBreakdown eb;
  eb.main = erk_main_energy(g, s, n, kappa);
  eb.bulk = bulk_energy(mesh, lumped, well, s);
  if (cpl.anchoring_on())
    eb.anchoring = anchoring_energy(cpl.anchoring, *cpl.colloid, lumped, s, n.n);
  if (cpl.electric_on()) eb.electric = electric_energy(cpl.electric, lumped, s, n.n);
  eb.residual = residual(g, s, n);
  eb.residual_tilde = residual_tilde(g, s, n);
  eb.sum();
  return eb;
}

template <std::size_t D>
EnergyBreakdown evaluate_energy(const SimplicialMesh<D>& mesh,
                                const StiffnessGraph& g, const LumpedMass& lumped,
                                const DoubleWell& well, const DegreeField& s,
                                const LineField<D>& th, const Couplings<D>& cpl) {
  EnergyBreakdown eb;
  eb.main = uni_main_energy(g, s, th);
  eb.bulk = bulk_energy(mesh, lumped, well, s);
  if (cpl.anchoring_on())
    eb.anchoring = anchoring_energy(cpl.anchoring, *cpl.colloid, lumped, s, th.n);
  if (cpl.electric_on()) eb.electric = electric_energy(cpl.electric, lumped, s, th.n);
  eb.residual = residual(g, s, th);
  eb.residual_tilde = residual_tilde(g, s, th);
  eb.sum();
  return eb;
}

// ---------------------------------------------------------------------------
// Flow drivers.

template <std::size_t D>
struct FlowProblem {
  const SimplicialMesh<D>* mesh = nullptr;
  const StiffnessGraph* graph = nullptr;
  LumpedMass lumped;
  SparseSymOperator mass;  // consistent P1 mass
  DoubleWell well;
  double kappa = 1.0;  // Ericksen only; the uniaxial model pins (d-1)/d
  BoundaryData<D> bc;
  Couplings<D> couplings;

  static FlowProblem make(const SimplicialMesh<D>& mesh, const StiffnessGraph& g,
                          const DoubleWell& well, const BoundaryData<D>& bc,
                          double kappa = 1.0) {
    FlowProblem p;
    p.mesh = &mesh;
    p.graph = &g;
    p.lumped = build_lumped_mass(mesh);
    p.mass = assemble_mass_matrix(mesh);
    p.well = well;
    p.kappa = kappa;
    p.bc = bc;
    return p;
  }
};

namespace flow_detail {

template <std::size_t D, class Orient>
std::vector<double> edge_dir_sq(const StiffnessGraph& g, const Orient& vals) {
  std::vector<double> out(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    out[e] = edge::diff2(vals, g.edges[e].i, g.edges[e].j);
  return out;
}

inline void check_monotone(double before, double after, index_t step) {
  double tol = 1e-10 * std::max(std::abs(before), 1.0);
  if (!(after <= before + tol))
    throw NumericalError("energy increased at step " + std::to_string(step) +
                         ": " + std::to_string(before) + " -> " +
                         std::to_string(after));
  if (!std::isfinite(after))
    throw NumericalError("non-finite energy at step " + std::to_string(step));
}

}  // namespace flow_detail

// One full Ericksen iteration: tangent flow, projection, implicit s-step.
template <std::size_t D>
void erk_flow_step(const FlowProblem<D>& p, const FlowConfig& cfg,
                   FlowState<D>& st) {
  auto t = erk_tangent_step(*p.graph, p.lumped, st.s, st.director, p.bc,
                            p.couplings, cfg);
  project_director(st.director, t);
  auto dsq = flow_detail::edge_dir_sq<D>(*p.graph, st.director.n);
  DegreeField s_new =
      s_step(*p.mesh, *p.graph, p.mass, p.lumped, st.s, dsq, p.kappa, p.well,
             p.bc, p.couplings, cfg, &st.director.n);
  std::vector<double> ds(s_new.s.size());
  for (std::size_t i = 0; i < ds.size(); ++i) ds[i] = s_new.s[i] - st.s.s[i];
  st.last_ds_norm = std::sqrt(std::max(0.0, l2_inner(*p.mesh, ds, ds)));
  double tn = 0;
  for (const auto& v : t) tn += dot(v, v);
  st.last_tangent_norm = std::sqrt(tn);
  st.dissipation_sum += sq(st.last_ds_norm);
  st.s = std::move(s_new);
  ++st.step;
}

template <std::size_t D>
void uni_flow_step(const FlowProblem<D>& p, const FlowConfig& cfg,
                   FlowState<D>& st) {
  auto t = uni_tangent_step(*p.mesh, *p.graph, p.lumped, st.s, st.line, p.bc,
                            p.couplings, cfg);
  double tw = weighted_h1_norm_sq(*p.mesh, p.lumped, st.s, t);
  project_line(st.line, t);
  auto dsq = flow_detail::edge_dir_sq<D>(*p.graph, st.line.theta);
  DegreeField s_new =
      s_step(*p.mesh, *p.graph, p.mass, p.lumped, st.s, dsq, double(D - 1) / D,
             p.well, p.bc, p.couplings, cfg, &st.line.n);
  std::vector<double> ds(s_new.s.size());
  for (std::size_t i = 0; i < ds.size(); ++i) ds[i] = s_new.s[i] - st.s.s[i];
  st.last_ds_norm = std::sqrt(std::max(0.0, l2_inner(*p.mesh, ds, ds)));
  st.last_tangent_norm = std::sqrt(tw);
  st.dissipation_sum += sq(st.last_ds_norm) + tw;
  st.s = std::move(s_new);
  ++st.step;
}

// Runs the flow until ||s^{k+1}-s^k|| < stop_tol or max_steps. Asserts the
// per-step energy decrease and records the full trace. The step callback
// (may be null) sees the state after each completed step.
template <std::size_t D, class Callback>
FlowState<D> run_flow(const FlowProblem<D>& p, FlowConfig cfg, FlowState<D> st,
                      Callback&& cb) {
  if (st.uses_line) {
    double h = p.mesh->max_cell_diameter();
    double bound = cfg.cfl_constant * std::pow(h, D / 2.0);
    if (cfg.dt > bound) {
      if (!cfg.cfl_warn_only)
        throw ConfigError("uniaxial flow: dt " + std::to_string(cfg.dt) +
                          " violates dt <= C h^{d/2} = " + std::to_string(bound));
    }
  }
  EnergyBreakdown eb =
      st.uses_line
          ? evaluate_energy(*p.mesh, *p.graph, p.lumped, p.well, st.s, st.line,
                            p.couplings)
          : evaluate_energy(*p.mesh, *p.graph, p.lumped, p.well, p.kappa, st.s,
                            st.director, p.couplings);
  st.energy_trace.push_back(eb);
  for (index_t k = 0; k < cfg.max_steps; ++k) {
    if (st.uses_line)
      uni_flow_step(p, cfg, st);
    else
      erk_flow_step(p, cfg, st);
    EnergyBreakdown now =
        st.uses_line
            ? evaluate_energy(*p.mesh, *p.graph, p.lumped, p.well, st.s, st.line,
                              p.couplings)
            : evaluate_energy(*p.mesh, *p.graph, p.lumped, p.well, p.kappa, st.s,
                              st.director, p.couplings);
    flow_detail::check_monotone(st.energy_trace.back().total, now.total, st.step);
    st.energy_trace.push_back(now);
    st.count_singular();
    cb(st);
    if (st.last_ds_norm < cfg.stop_tol) {
      st.converged = true;
      break;
    }
  }
  return st;
}

template <std::size_t D>
FlowState<D> run_flow(const FlowProblem<D>& p, const FlowConfig& cfg,
                      FlowState<D> st) {
  return run_flow(p, cfg, std::move(st), [](const FlowState<D>&) {});
}

}  // namespace nlc
