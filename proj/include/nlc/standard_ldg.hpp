#pragma once

// The standard (unconstrained) Landau-deGennes model in the traceless
// symmetric parametrization: elastic bilinear form with L1, L2, L3 plus
// coercivity audit, Rapini-Papoular surface anchoring, optional phase-field
// colloid anchoring and dielectric forcing, and the semi-implicit
// convex-splitting gradient flow.

#include <map>
#include <vector>

#include "nlc/couplings.hpp"
#include "nlc/fem_core.hpp"
#include "nlc/fields.hpp"
#include "nlc/flow.hpp"
#include "nlc/potentials.hpp"

namespace nlc {

// Component basis of the traceless symmetric space: Q = sum_c q_c B_c with
// components (q11,q12,q13,q22,q23) in 3D, (q11,q12) in 2D.
template <std::size_t D>
std::array<Mat<D>, q_components<D>()> q_basis() {
  std::array<Mat<D>, q_components<D>()> B;
  for (auto& m : B) m = mat_zero<D>();
  if constexpr (D == 3) {
    B[0][0][0] = 1;
    B[0][2][2] = -1;
    B[1][0][1] = B[1][1][0] = 1;
    B[2][0][2] = B[2][2][0] = 1;
    B[3][1][1] = 1;
    B[3][2][2] = -1;
    B[4][1][2] = B[4][2][1] = 1;
  } else {
    B[0][0][0] = 1;
    B[0][1][1] = -1;
    B[1][0][1] = B[1][1][0] = 1;
  }
  return B;
}

struct LdgElasticParams {
  double L1 = 1.0, L2 = 0.0, L3 = 0.0;
  double eta_bulk = 0.25;
  double eta_gamma = 0.0;  // Rapini-Papoular surface weight

  bool coercive() const {
    return 0.0 < L1 && -L1 < L3 && L3 < 2.0 * L1 &&
           -(3.0 / 5.0) * L1 - (1.0 / 10.0) * L3 < L2;
  }
};

// a(Q,P) = int L1 gradQ:gradP + L2 (div Q).(div P) + L3 cross-contraction.
// All integrands are piecewise constant for P1 components, so per-element
// assembly is exact.
template <std::size_t D>
SparseSymOperator assemble_elastic_form(const LdgElasticParams& prm,
                                        const SimplicialMesh<D>& mesh,
                                        bool override_coercivity = false) {
  if (!prm.coercive() && !override_coercivity)
    throw ConfigError("elastic constants fail the coercivity conditions");
  constexpr int NC = q_components<D>();
  auto B = q_basis<D>();
  double gram[NC][NC];
  for (int c = 0; c < NC; ++c)
    for (int e = 0; e < NC; ++e) gram[c][e] = frob(B[c], B[e]);

  const index_t N = mesh.n_vertices();
  std::map<std::pair<index_t, index_t>, std::array<double, NC * NC>> blocks;
  for (index_t cell = 0; cell < mesh.n_cells(); ++cell) {
    double vol = mesh.cell_volume(cell);
    auto g = mesh.cell_grads(cell);
    for (int a = 0; a <= D; ++a) {
      for (int b = 0; b <= D; ++b) {
        index_t i = mesh.cells[cell][a], j = mesh.cells[cell][b];
        auto& blk = blocks[{i, j}];
        double gij = dot(g[a], g[b]);
        for (int c = 0; c < NC; ++c) {
          for (int e = 0; e < NC; ++e) {
            double v = prm.L1 * gij * gram[c][e];
            if (prm.L2 != 0.0)
              v += prm.L2 * dot(matvec(B[c], g[a]), matvec(B[e], g[b]));
            if (prm.L3 != 0.0)
              v += prm.L3 * dot(g[a], matvec(matmul(B[e], B[c]), g[b]));
            blk[c * NC + e] += vol * v;
          }
        }
      }
    }
  }
  SparseSymOperator A(N * NC);
  for (const auto& [key, blk] : blocks)
    for (int c = 0; c < NC; ++c)
      for (int e = 0; e < NC; ++e)
        if (blk[c * NC + e] != 0.0)
          A.add(key.first * NC + c, key.second * NC + e, blk[c * NC + e]);
  A.finalize();
  return A;
}

template <std::size_t D>
double elastic_energy(const SparseSymOperator& A, const QTensorField<D>& Q) {
  std::vector<double> y;
  A.apply(Q.q, y);
  double s = 0;
  for (std::size_t k = 0; k < Q.q.size(); ++k) s += Q.q[k] * y[k];
  return 0.5 * s;
}

// ---------------------------------------------------------------------------
// Flow problem: the implicit operator is constant across steps.

template <std::size_t D>
struct LdgProblem {
  const SimplicialMesh<D>* mesh = nullptr;
  LdgElasticParams elastic;
  LdgBulkParams bulk;
  LumpedMass lumped;
  std::vector<double> bmass;  // boundary lumped mass (surface anchoring)
  // Dirichlet data
  std::vector<char> q_fixed;          // per node
  QTensorField<D> q_dirichlet;        // values where fixed
  // Rapini-Papoular preferred tensor (used when eta_gamma > 0)
  QTensorField<D> q_gamma;
  // optional phase-field colloid with uniaxial normal anchoring
  const PhaseFieldColloid<D>* colloid = nullptr;
  double colloid_k = 0.0;       // K_a^nu
  double colloid_s_star = 0.7;  // preferred degree on the inclusion
  // dielectric forcing
  ElectricParams<D> electric;

  SparseSymOperator elastic_op;
  SparseSymOperator implicit_op;
  std::vector<char> dof_mask;

  static LdgProblem make(const SimplicialMesh<D>& mesh, const LdgElasticParams& ep,
                         const LdgBulkParams& bp) {
    LdgProblem p;
    p.mesh = &mesh;
    p.elastic = ep;
    p.bulk = bp;
    p.lumped = build_lumped_mass(mesh);
    p.bmass = build_boundary_lumped_mass(mesh);
    p.q_fixed.assign(mesh.n_vertices(), 0);
    p.q_dirichlet = QTensorField<D>(mesh.n_vertices());
    p.q_gamma = QTensorField<D>(mesh.n_vertices());
    p.elastic_op = assemble_elastic_form(ep, mesh);
    return p;
  }

  // Preferred tensor on the colloid surface: s* (nu (x) nu - I/d) with
  // nu = grad phi / |grad phi|.
  Mat<D> colloid_preferred(index_t i) const {
    const Vec<D>& gp = colloid->grad_phi[i];
    double g2 = colloid->grad_phi_sq[i];
    Mat<D> Qn = mat_zero<D>();
    if (g2 > 1e-30) {
      Vec<D> nu = (1.0 / std::sqrt(g2)) * gp;
      Qn = colloid_s_star * (outer(nu, nu) - (1.0 / D) * identity<D>());
    }
    return Qn;
  }

  // Assembles the constant implicit operator
  //   M/dt + elastic + (A+D)/eta_B M + eta_G M_Gamma + colloid blocks,
  // with lumped masses (diagonal in nodes, Gram-coupled in components).
  void build_implicit(double dt) {
    constexpr int NC = q_components<D>();
    auto B = q_basis<D>();
    double gram[NC][NC];
    for (int c = 0; c < NC; ++c)
      for (int e = 0; e < NC; ++e) gram[c][e] = frob(B[c], B[e]);
    const index_t N = mesh->n_vertices();
    SparseSymOperator A(N * NC);
    {
      std::map<std::pair<index_t, index_t>, std::array<double, NC * NC>> blocks;
      for (index_t cell = 0; cell < mesh->n_cells(); ++cell) {
        double vol = mesh->cell_volume(cell);
        auto g = mesh->cell_grads(cell);
        for (int a = 0; a <= D; ++a) {
          for (int b = 0; b <= D; ++b) {
            index_t i = mesh->cells[cell][a], j = mesh->cells[cell][b];
            auto& blk = blocks[{i, j}];
            double gij = dot(g[a], g[b]);
            for (int c = 0; c < NC; ++c) {
              for (int e = 0; e < NC; ++e) {
                double v = elastic.L1 * gij * gram[c][e];
                if (elastic.L2 != 0.0)
                  v += elastic.L2 * dot(matvec(B[c], g[a]), matvec(B[e], g[b]));
                if (elastic.L3 != 0.0)
                  v += elastic.L3 * dot(g[a], matvec(matmul(B[e], B[c]), g[b]));
                blk[c * NC + e] += vol * v;
              }
            }
          }
        }
      }
      double bulk_coeff = (bulk.A + bulk.D) / elastic.eta_bulk;
      for (index_t i = 0; i < N; ++i) {
        auto& blk = blocks[{i, i}];
        double w = lumped.m[i] * (1.0 / dt + bulk_coeff);
        if (elastic.eta_gamma > 0) w += elastic.eta_gamma * bmass[i];
        if (colloid && colloid_k > 0)
          w += colloid_k * sphere_area_const(D) * colloid->eps * lumped.m[i] *
               colloid->grad_phi_sq[i];
        for (int c = 0; c < NC; ++c)
          for (int e = 0; e < NC; ++e) blk[c * NC + e] += w * gram[c][e];
      }
      for (const auto& [key, blk] : blocks)
        for (int c = 0; c < NC; ++c)
          for (int e = 0; e < NC; ++e)
            if (blk[c * NC + e] != 0.0)
              A.add(key.first * NC + c, key.second * NC + e, blk[c * NC + e]);
    }
    A.finalize();
    implicit_op = std::move(A);
    dof_mask.assign(N * NC, 0);
    for (index_t i = 0; i < N; ++i)
      if (q_fixed[i])
        for (int c = 0; c < NC; ++c) dof_mask[i * NC + c] = 1;
  }
};

// Lumped L2 norm of a Q increment.
template <std::size_t D>
double ldg_increment_norm(const LdgProblem<D>& p, const QTensorField<D>& a,
                          const QTensorField<D>& b) {
  double acc = 0;
  for (index_t i = 0; i < a.n_nodes(); ++i) {
    Mat<D> d = a.node(i) - b.node(i);
    acc += p.lumped.m[i] * frob(d, d);
  }
  return std::sqrt(acc);
}

template <std::size_t D>
EnergyBreakdown ldg_total_energy(const LdgProblem<D>& p, const QTensorField<D>& Q) {
  EnergyBreakdown eb;
  eb.main = elastic_energy(p.elastic_op, Q);
  double bulk = 0, surf = 0, anchor = 0, elec = 0;
  const index_t N = Q.n_nodes();
  for (index_t i = 0; i < N; ++i) {
    Mat<D> Qi = Q.node(i);
    bulk += p.lumped.m[i] * ldg_bulk_psi(p.bulk, Qi);
    if (p.elastic.eta_gamma > 0 && p.bmass[i] > 0) {
      Mat<D> d = Qi - p.q_gamma.node(i);
      surf += 0.5 * p.elastic.eta_gamma * p.bmass[i] * frob(d, d);
    }
    if (p.colloid && p.colloid_k > 0) {
      Mat<D> d = Qi - p.colloid_preferred(i);
      anchor += 0.5 * p.colloid_k * sphere_area_const(D) * p.colloid->eps *
                p.lumped.m[i] * p.colloid->grad_phi_sq[i] * frob(d, d);
    }
    if (p.electric.enabled()) {
      Vec<D> E = p.electric.at(i);
      elec -= 0.5 * p.electric.k_ext * p.lumped.m[i] *
              (p.electric.eps_bar() * dot(E, E) +
               p.electric.eps_a() * dot(E, matvec(Qi, E)));
    }
  }
  eb.bulk = bulk / p.elastic.eta_bulk + surf;  // surface folded into bulk slot
  eb.anchoring = anchor;
  eb.electric = elec;
  eb.sum();
  return eb;
}

// One semi-implicit convex-splitting step. The explicit side carries the
// concave bulk part, surface data, colloid data and the dielectric forcing.
template <std::size_t D>
QTensorField<D> ldg_flow_step(const LdgProblem<D>& p, const QTensorField<D>& Qk,
                              double dt, double solver_tol = 1e-10) {
  constexpr int NC = q_components<D>();
  auto B = q_basis<D>();
  const index_t N = Qk.n_nodes();
  std::vector<double> rhs(N * NC, 0.0);
  const double inv_eta = 1.0 / p.elastic.eta_bulk;
  for (index_t i = 0; i < N; ++i) {
    Mat<D> Qi = Qk.node(i);
    Mat<D> W = (1.0 / dt) * Qi;
    Mat<D> expl = ldg_bulk_dpsi_e(p.bulk, Qi);
    W = W + inv_eta * expl;
    if (p.elastic.eta_gamma > 0 && p.bmass[i] > 0) {
      // boundary term scales with the boundary mass instead of m_i
      Mat<D> QG = p.q_gamma.node(i);
      for (int c = 0; c < NC; ++c)
        rhs[i * NC + c] += p.elastic.eta_gamma * p.bmass[i] * frob(QG, B[c]);
    }
    if (p.colloid && p.colloid_k > 0) {
      Mat<D> Qn = p.colloid_preferred(i);
      double w = p.colloid_k * sphere_area_const(D) * p.colloid->eps *
                 p.lumped.m[i] * p.colloid->grad_phi_sq[i];
      for (int c = 0; c < NC; ++c) rhs[i * NC + c] += w * frob(Qn, B[c]);
    }
    if (p.electric.enabled()) {
      Vec<D> E = p.electric.at(i);
      Mat<D> EE = outer(E, E);
      Mat<D> dev = EE - (trace(EE) / D) * identity<D>();
      W = W + (0.5 * p.electric.k_ext * p.electric.eps_a()) * dev;
    }
    for (int c = 0; c < NC; ++c)
      rhs[i * NC + c] += p.lumped.m[i] * frob(W, B[c]);
  }
  // Dirichlet elimination
  std::vector<double> xfix(N * NC, 0.0);
  for (index_t i = 0; i < N; ++i)
    if (p.q_fixed[i])
      for (int c = 0; c < NC; ++c) xfix[i * NC + c] = p.q_dirichlet.q[i * NC + c];
  std::vector<double> Ax;
  p.implicit_op.apply(xfix, Ax);
  for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] -= Ax[k];
  std::vector<double> y = Qk.q;  // warm start
  for (std::size_t k = 0; k < y.size(); ++k)
    if (p.dof_mask[k]) y[k] = 0.0;
  cg_solve(p.implicit_op, rhs, y, solver_tol, 0, &p.dof_mask);
  QTensorField<D> out(N);
  for (std::size_t k = 0; k < y.size(); ++k)
    out.q[k] = p.dof_mask[k] ? xfix[k] : y[k] + xfix[k];
  return out;
}

struct LdgRunResult {
  index_t steps = 0;
  bool converged = false;
  std::vector<double> energy_trace;
};

template <std::size_t D, class Callback>
LdgRunResult ldg_run_flow(LdgProblem<D>& p, QTensorField<D>& Q, double dt,
                          double stop_tol, index_t max_steps, Callback&& cb) {
  p.build_implicit(dt);
  LdgRunResult res;
  res.energy_trace.push_back(ldg_total_energy(p, Q).total);
  for (index_t k = 0; k < max_steps; ++k) {
    QTensorField<D> Qn = ldg_flow_step(p, Q, dt);
    double dq = ldg_increment_norm(p, Qn, Q);
    Q = std::move(Qn);
    double E = ldg_total_energy(p, Q).total;
    double before = res.energy_trace.back();
    if (!(E <= before + 1e-8 * std::max(1.0, std::abs(before))))
      throw NumericalError("ldg flow: energy increased at step " +
                           std::to_string(k));
    res.energy_trace.push_back(E);
    res.steps = k + 1;
    cb(k, E, dq);
    if (dq < stop_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

template <std::size_t D>
LdgRunResult ldg_run_flow(LdgProblem<D>& p, QTensorField<D>& Q, double dt,
                          double stop_tol, index_t max_steps) {
  return ldg_run_flow(p, Q, dt, stop_tol, max_steps,
                      [](index_t, double, double) {});
}

// ---------------------------------------------------------------------------
// Cross-model comparison.

struct CrossModelReport {
  double e_uni_at_uni = 0;    // uniaxial energy of the uniaxial minimizer
  double e_ldg_at_uni = 0;    // LdG energy evaluated at the uniaxial minimizer
  double e_ldg_at_ldg = 0;    // LdG energy of the LdG minimizer
  double gap_model = 0;       // (e_uni - e_ldg_at_uni) / e_uni
  double gap_final = 0;       // (e_uni - e_ldg_at_ldg) / e_uni
  double max_q_diff = 0;      // max nodal |Q_uni - Q_ldg|
  double max_biaxiality = 0;  // over nodes of the LdG minimizer
  std::vector<double> q_diff; // nodal |Q_uni - Q_ldg|
  std::vector<double> beta;   // nodal biaxiality of Q_ldg
};

template <std::size_t D>
CrossModelReport cross_model_compare(const LdgProblem<D>& p, double e_uni,
                                     const QTensorField<D>& q_uni,
                                     const QTensorField<D>& q_ldg) {
  if (q_uni.n_nodes() != q_ldg.n_nodes())
    throw NumericalError("cross_model_compare: mesh mismatch");
  CrossModelReport r;
  r.e_uni_at_uni = e_uni;
  r.e_ldg_at_uni = ldg_total_energy(p, q_uni).total;
  r.e_ldg_at_ldg = ldg_total_energy(p, q_ldg).total;
  r.gap_model = (e_uni - r.e_ldg_at_uni) / std::abs(e_uni);
  r.gap_final = (e_uni - r.e_ldg_at_ldg) / std::abs(e_uni);
  const index_t N = q_uni.n_nodes();
  r.q_diff.resize(N);
  r.beta.resize(N);
  for (index_t i = 0; i < N; ++i) {
    Mat<D> d = q_uni.node(i) - q_ldg.node(i);
    r.q_diff[i] = frob_norm(d);
    r.beta[i] = biaxiality(q_ldg.node(i));
    r.max_q_diff = std::max(r.max_q_diff, r.q_diff[i]);
    r.max_biaxiality = std::max(r.max_biaxiality, r.beta[i]);
  }
  return r;
}

}  // namespace nlc
