#pragma once

// Phase-field colloids with mass-lumped weak anchoring, and the electric
// field energy. All nodal forms are diagonal in the lumped-mass sense so the
// projection step of the flows stays monotone.

#include <vector>

#include "nlc/energy.hpp"
#include "nlc/fem_core.hpp"
#include "nlc/fields.hpp"

namespace nlc {

inline double sphere_area_const(int d) {
  // |S^{d-1}|: 2*pi in 2D, 4*pi in 3D.
  const double pi = 3.14159265358979323846;
  return d == 2 ? 2.0 * pi : 4.0 * pi;
}

// Diffuse representation of an inclusion: phi_eps = 1/2 on its surface,
// -> 1 inside, -> 0 outside, with transition thickness eps.
template <std::size_t D>
struct PhaseFieldColloid {
  double eps = 0.06;
  std::vector<double> phi;          // nodal phi_eps
  std::vector<Vec<D>> grad_phi;     // volume-weighted nodal average of grad
  std::vector<double> grad_phi_sq;  // |grad_phi|^2 at nodes (of the average)

  bool inside(index_t i) const { return phi[i] > 0.5; }
};

inline double phase_field_ref(double t, double eps) {
  const double pi = 3.14159265358979323846;
  return 0.5 * ((2.0 / pi) * std::atan(-t / eps) + 1.0);
}

// Builds phi_eps from a signed distance (negative inside). Nodal gradients
// are volume-weighted averages of the per-element gradients of the P1
// interpolant, which keeps every anchoring form diagonal.
template <std::size_t D, class SignedDistance>
PhaseFieldColloid<D> build_phase_field(const SimplicialMesh<D>& mesh,
                                       const SignedDistance& dist, double eps) {
  if (eps <= 0) throw ConfigError("phase field: eps must be positive");
  PhaseFieldColloid<D> c;
  c.eps = eps;
  const index_t n = mesh.n_vertices();
  c.phi.resize(n);
  for (index_t i = 0; i < n; ++i) c.phi[i] = phase_field_ref(dist(mesh.vertices[i]), eps);
  c.grad_phi.assign(n, vec_zero<D>());
  std::vector<double> wsum(n, 0.0);
  for (index_t t = 0; t < mesh.n_cells(); ++t) {
    double vol = mesh.cell_volume(t);
    auto g = mesh.cell_grads(t);
    Vec<D> gp = vec_zero<D>();
    for (int a = 0; a <= D; ++a) gp = gp + c.phi[mesh.cells[t][a]] * g[a];
    for (int a = 0; a <= D; ++a) {
      index_t v = mesh.cells[t][a];
      c.grad_phi[v] = c.grad_phi[v] + vol * gp;
      wsum[v] += vol;
    }
  }
  c.grad_phi_sq.resize(n);
  for (index_t i = 0; i < n; ++i) {
    if (wsum[i] > 0) c.grad_phi[i] = (1.0 / wsum[i]) * c.grad_phi[i];
    c.grad_phi_sq[i] = dot(c.grad_phi[i], c.grad_phi[i]);
  }
  return c;
}

template <std::size_t D>
PhaseFieldColloid<D> build_phase_field_sphere(const SimplicialMesh<D>& mesh,
                                              const Vec<D>& center, double radius,
                                              double eps) {
  return build_phase_field(
      mesh, [&](const Vec<D>& x) { return norm(x - center) - radius; }, eps);
}

// J_eps(f) = eps |S^{d-1}|/2 int f |grad phi|^2; recovers the surface
// integral of f over the inclusion boundary as eps -> 0. Uses the lumped
// nodal gradients for consistency with the anchoring forms.
template <std::size_t D>
double surface_functional(const SimplicialMesh<D>& mesh, const LumpedMass& lumped,
                          const PhaseFieldColloid<D>& c,
                          const std::vector<double>& f) {
  double acc = 0;
  for (index_t i = 0; i < (index_t)f.size(); ++i)
    acc += lumped.m[i] * f[i] * c.grad_phi_sq[i];
  return c.eps * sphere_area_const(D) / 2.0 * acc;
}

// ---------------------------------------------------------------------------
// Weak anchoring. Normal (homeotropic) part with weight Ka_nu and preferred
// degree s*, plus the two planar-degenerate parts.

struct AnchoringParams {
  double ka_normal = 0;
  double ka_planar1 = 0;
  double ka_planar2 = 0;
  double s_star = 0.7;

  bool enabled() const { return ka_normal > 0 || ka_planar1 > 0 || ka_planar2 > 0; }
  void validate() const {
    if (ka_normal < 0 || ka_planar1 < 0 || ka_planar2 < 0)
      throw ConfigError("anchoring weights must be nonnegative");
  }
};

// The nodal anchoring matrix H_i = H_nu + H_perp1 + H_perp2 (symmetric PSD):
//   H_nu    = (2 s s~ + (d-1)/d (s - s~)^2) (I - nu nu^T) |g|^2-scaled parts,
//   H_perp1 = 2 s^2 g g^T,
//   H_perp2 = 4 s~^2 (s - s~)^2 |g|^2 I,  with g = grad phi_eps at the node.
template <std::size_t D>
Mat<D> anchoring_matrix(const AnchoringParams& p, const PhaseFieldColloid<D>& c,
                        double s, index_t i) {
  const double ss = p.s_star;
  const Vec<D>& g = c.grad_phi[i];
  const double g2 = c.grad_phi_sq[i];
  Mat<D> H = mat_zero<D>();
  const double kd = double(D - 1) / D;
  if (p.ka_normal > 0) {
    double a = 2.0 * s * ss;
    double b = kd * sq(s - ss);
    // a (|g|^2 I - g g^T) + b |g|^2 I
    for (int r = 0; r < D; ++r) {
      for (int q = 0; q < D; ++q) {
        double v = -a * g[r] * g[q];
        if (r == q) v += (a + b) * g2;
        H[r][q] += p.ka_normal * v;
      }
    }
  }
  if (p.ka_planar1 > 0)
    for (int r = 0; r < D; ++r)
      for (int q = 0; q < D; ++q)
        H[r][q] += p.ka_planar1 * 2.0 * sq(s) * g[r] * g[q];
  if (p.ka_planar2 > 0) {
    double v = p.ka_planar2 * 4.0 * sq(ss) * sq(s - ss) * g2;
    for (int r = 0; r < D; ++r) H[r][r] += v;
  }
  return H;
}

// a_h^n(n, v) with the state's s frozen: sum_i m_i n_i . H_i v_i.
template <std::size_t D>
double anchoring_form_nn(const AnchoringParams& p, const PhaseFieldColloid<D>& c,
                         const LumpedMass& lumped, const DegreeField& s,
                         const std::vector<Vec<D>>& n,
                         const std::vector<Vec<D>>& v) {
  double acc = 0;
  for (index_t i = 0; i < (index_t)n.size(); ++i) {
    Mat<D> H = anchoring_matrix(p, c, s.s[i], i);
    acc += lumped.m[i] * dot(n[i], matvec(H, v[i]));
  }
  return acc;
}

// Anchoring energy |S^{d-1}| eps a_h^n(n,n) / 2.
template <std::size_t D>
double anchoring_energy(const AnchoringParams& p, const PhaseFieldColloid<D>& c,
                        const LumpedMass& lumped, const DegreeField& s,
                        const std::vector<Vec<D>>& n) {
  if (!p.enabled()) return 0.0;
  return sphere_area_const(D) * c.eps * 0.5 *
         anchoring_form_nn(p, c, lumped, s, n, n);
}

// The three s-side pieces of the same energy:
//   a_h^s(s, z): diagonal coefficient per node (independent of s),
//   omega_h^s(z), zeta_h^s(z): linear functionals.
template <std::size_t D>
struct AnchoringSForms {
  std::vector<double> a_diag;  // a_h^s(s,z) = sum_i a_diag_i m_i s_i z_i
  std::vector<double> omega;   // omega_h^s(z) = sum_i omega_i m_i z_i
  std::vector<double> zeta;    // zeta_h^s(z) = sum_i zeta_i m_i z_i
};

template <std::size_t D>
AnchoringSForms<D> anchoring_s_forms(const AnchoringParams& p,
                                     const PhaseFieldColloid<D>& c,
                                     const std::vector<Vec<D>>& n) {
  const double kd = double(D - 1) / D;
  const double ss = p.s_star;
  AnchoringSForms<D> f;
  const index_t N = (index_t)n.size();
  f.a_diag.assign(N, 0.0);
  f.omega.assign(N, 0.0);
  f.zeta.assign(N, 0.0);
  for (index_t i = 0; i < N; ++i) {
    const Vec<D>& g = c.grad_phi[i];
    double g2 = c.grad_phi_sq[i];
    double n2 = dot(n[i], n[i]);
    double ng = dot(n[i], g);
    f.a_diag[i] = p.ka_normal * g2 * kd * n2 + p.ka_planar1 * 2.0 * sq(ng) +
                  p.ka_planar2 * g2 * 4.0 * sq(ss) * n2;
    f.omega[i] = p.ka_normal * 2.0 * ss * (n2 * g2 - sq(ng));
    f.zeta[i] = p.ka_normal * ss * g2 * kd * n2 +
                p.ka_planar2 * ss * g2 * 4.0 * sq(ss) * n2;
  }
  return f;
}

// a_h^n(n,n) reassembled from the s-side pieces; the identity
// a^n(n,n) = a^s(s,s) + omega(s) + zeta(s* - 2s) holds exactly.
template <std::size_t D>
double anchoring_energy_from_s_forms(const AnchoringSForms<D>& f,
                                     const LumpedMass& lumped,
                                     const PhaseFieldColloid<D>& c,
                                     const AnchoringParams& p,
                                     const std::vector<double>& s) {
  double acc = 0;
  for (index_t i = 0; i < (index_t)s.size(); ++i)
    acc += lumped.m[i] * (f.a_diag[i] * sq(s[i]) + f.omega[i] * s[i] +
                          f.zeta[i] * (p.s_star - 2.0 * s[i]));
  return sphere_area_const(D) * c.eps * 0.5 * acc;
}

// ---------------------------------------------------------------------------
// Electric coupling.

template <std::size_t D>
struct ElectricParams {
  Vec<D> field = vec_zero<D>();         // constant E
  std::vector<Vec<D>> nodal;            // optional nodal E (overrides field)
  double k_ext = 1.0;
  double eps_par = 1.0, eps_perp = 1.0;

  bool enabled() const {
    if (!nodal.empty()) return k_ext != 0;
    return k_ext != 0 && dot(field, field) > 0;
  }
  double eps_bar() const { return (eps_par + (D - 1) * eps_perp) / D; }
  double eps_a() const { return eps_par - eps_perp; }
  double gamma_a() const { return eps_a() / (D * eps_bar()); }
  Vec<D> at(index_t i) const { return nodal.empty() ? field : nodal[i]; }
};

// e_h(s, n, v) = int I_h[ |eps_a||E|^2 n.v - eps_a s (E.n)(E.v) ].
// H = |eps_a||E|^2 I - eps_a s E(x)E is PSD whenever |s| <= 1.
template <std::size_t D>
double electric_form(const ElectricParams<D>& p, const LumpedMass& lumped,
                     const DegreeField& s, const std::vector<Vec<D>>& n,
                     const std::vector<Vec<D>>& v) {
  double ea = p.eps_a();
  double acc = 0;
  for (index_t i = 0; i < (index_t)n.size(); ++i) {
    Vec<D> E = p.at(i);
    double e2 = dot(E, E);
    acc += lumped.m[i] * (std::abs(ea) * e2 * dot(n[i], v[i]) -
                          ea * s.s[i] * dot(E, n[i]) * dot(E, v[i]));
  }
  return acc;
}

// Discrete electric energy
//   K/2 ( -eps_bar int (1 - s gamma_a)|E|^2 + e_h(s,n,n) - |eps_a| int |E|^2 ).
template <std::size_t D>
double electric_energy(const ElectricParams<D>& p, const LumpedMass& lumped,
                       const DegreeField& s, const std::vector<Vec<D>>& n) {
  if (!p.enabled()) return 0.0;
  double eb = p.eps_bar(), ga = p.gamma_a(), ea = p.eps_a();
  double lin = 0;
  for (index_t i = 0; i < (index_t)s.s.size(); ++i) {
    double e2 = dot(p.at(i), p.at(i));
    lin += lumped.m[i] * (-eb * (1.0 - s.s[i] * ga) * e2 - std::abs(ea) * e2);
  }
  return 0.5 * p.k_ext * (lin + electric_form(p, lumped, s, n, n));
}

// delta_s of the electric energy against z (independent of s itself):
// K/2 ( eps_bar gamma_a int z |E|^2 - eps_a int I_h[z (E.n)^2] ).
template <std::size_t D>
std::vector<double> electric_s_gradient(const ElectricParams<D>& p,
                                        const LumpedMass& lumped,
                                        const std::vector<Vec<D>>& n) {
  std::vector<double> g(n.size(), 0.0);
  if (!p.enabled()) return g;
  double eb = p.eps_bar(), ga = p.gamma_a(), ea = p.eps_a();
  for (index_t i = 0; i < (index_t)n.size(); ++i) {
    Vec<D> E = p.at(i);
    g[i] = 0.5 * p.k_ext * lumped.m[i] *
           (eb * ga * dot(E, E) - ea * sq(dot(E, n[i])));
  }
  return g;
}

// Nodal electric H-matrix (for the tangent systems):
// H_i = |eps_a||E|^2 I - eps_a s_i E (x) E.
template <std::size_t D>
Mat<D> electric_matrix(const ElectricParams<D>& p, double s, index_t i) {
  Vec<D> E = p.at(i);
  double ea = p.eps_a();
  Mat<D> H = mat_zero<D>();
  double e2 = dot(E, E);
  for (int r = 0; r < D; ++r) {
    for (int q = 0; q < D; ++q) {
      H[r][q] = -ea * s * E[r] * E[q];
      if (r == q) H[r][q] += std::abs(ea) * e2;
    }
  }
  return H;
}

// Monotonicity check of a lumped-mass form m_h(n,n) = sum m_i n_i.H_i n_i
// under nodal normalization, for |n_i| >= 1 and PSD H_i.
template <std::size_t D>
struct MonotonicityReport {
  bool holds = true;
  double worst_slack = 0;  // min over nodes of (before - after)
  std::vector<index_t> violating_nodes;
};

template <std::size_t D>
MonotonicityReport<D> anchoring_projection_monotone(
    const std::vector<Mat<D>>& H, const LumpedMass& lumped,
    const std::vector<Vec<D>>& n, double tol = 1e-12) {
  MonotonicityReport<D> rep;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  for (index_t i = 0; i < (index_t)n.size(); ++i) {
    double before = lumped.m[i] * dot(n[i], matvec(H[i], n[i]));
    Vec<D> u = normalized(n[i]);
    double after = lumped.m[i] * dot(u, matvec(H[i], u));
    double slack = before - after;
    rep.worst_slack = std::min(rep.worst_slack, slack);
    if (slack < -tol) {
      rep.holds = false;
      rep.violating_nodes.push_back(i);
    }
  }
  return rep;
}

}  // namespace nlc
