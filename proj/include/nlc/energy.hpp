#pragma once

// Discrete energies for the Ericksen and uniaxially constrained models,
// their auxiliary (tilde) forms, consistency residuals, and first
// variations. Everything is computed from the StiffnessGraph edge sums;
// the degenerate term s^2 |grad dir|^2 is never quadratured directly.

#include <vector>

#include "nlc/fem_core.hpp"
#include "nlc/fields.hpp"
#include "nlc/potentials.hpp"

namespace nlc {

struct EnergyBreakdown {
  double main = 0;
  double bulk = 0;
  double anchoring = 0;
  double electric = 0;
  double total = 0;
  double residual = 0;        // R_h
  double residual_tilde = 0;  // R_h with I_h|s|

  void sum() { total = main + bulk + anchoring + electric; }
};

namespace edge {

template <std::size_t D>
inline double diff2(const std::vector<Vec<D>>& v, index_t i, index_t j) {
  return dot(v[i] - v[j], v[i] - v[j]);
}

template <std::size_t D>
inline double diff2(const std::vector<Mat<D>>& v, index_t i, index_t j) {
  Mat<D> d = v[i] - v[j];
  return frob(d, d);
}

}  // namespace edge

// int |grad z_h|^2 via the edge identity, for scalar / vector / tensor
// nodal fields.
inline double grad_sq(const StiffnessGraph& g, const std::vector<double>& z) {
  return g.dirichlet(z);
}

template <std::size_t D>
double grad_sq(const StiffnessGraph& g, const std::vector<Vec<D>>& z) {
  double s = 0;
  for (const auto& e : g.edges) s += e.k * edge::diff2(z, e.i, e.j);
  return s;
}

template <std::size_t D>
double grad_sq(const StiffnessGraph& g, const std::vector<Mat<D>>& z) {
  double s = 0;
  for (const auto& e : g.edges) s += e.k * edge::diff2(z, e.i, e.j);
  return s;
}

// E-ring: sum over edges of k_ij (s_i^2+s_j^2)/2 |delta dir|^2.
template <std::size_t D>
double ering(const StiffnessGraph& g, const DegreeField& s,
             const DirectorField<D>& n) {
  double acc = 0;
  for (const auto& e : g.edges)
    acc += e.k * 0.5 * (sq(s.s[e.i]) + sq(s.s[e.j])) * edge::diff2(n.n, e.i, e.j);
  return acc;
}

template <std::size_t D>
double ering(const StiffnessGraph& g, const DegreeField& s,
             const LineField<D>& th) {
  double acc = 0;
  for (const auto& e : g.edges)
    acc += e.k * 0.5 * (sq(s.s[e.i]) + sq(s.s[e.j])) *
           edge::diff2(th.theta, e.i, e.j);
  return acc;
}

// Main part of the Ericksen energy, kappa (grad s)-term plus E-ring/2.
template <std::size_t D>
double erk_main_energy(const StiffnessGraph& g, const DegreeField& s,
                       const DirectorField<D>& n, double kappa) {
  return 0.5 * kappa * grad_sq(g, s.s) + 0.5 * ering(g, s, n);
}

// Uniaxial main energy; the s-weight is pinned to (d-1)/d.
template <std::size_t D>
double uni_main_energy(const StiffnessGraph& g, const DegreeField& s,
                       const LineField<D>& th) {
  double kappa = double(D - 1) / D;
  return 0.5 * kappa * grad_sq(g, s.s) + 0.5 * ering(g, s, th);
}

// Auxiliary energies E-tilde in terms of (s, u) resp. (s, U).
template <std::size_t D>
double erk_aux_energy(const StiffnessGraph& g, const std::vector<double>& s,
                      const std::vector<Vec<D>>& u, double kappa) {
  return 0.5 * ((kappa - 1.0) * grad_sq(g, s) + grad_sq(g, u));
}

template <std::size_t D>
double uni_aux_energy(const StiffnessGraph& g, const std::vector<double>& s,
                      const std::vector<Mat<D>>& U) {
  return 0.5 * (-(1.0 / D) * grad_sq(g, s) + grad_sq(g, U));
}

// Consistency residual R_h = 1/4 sum_e k_e (delta s)^2 |delta dir|^2
// (equals the 1/8 double sum over ordered pairs).
template <std::size_t D>
double residual(const StiffnessGraph& g, const DegreeField& s,
                const DirectorField<D>& n) {
  double acc = 0;
  for (const auto& e : g.edges)
    acc += e.k * sq(s.s[e.i] - s.s[e.j]) * edge::diff2(n.n, e.i, e.j);
  return 0.25 * acc;
}

template <std::size_t D>
double residual(const StiffnessGraph& g, const DegreeField& s,
                const LineField<D>& th) {
  double acc = 0;
  for (const auto& e : g.edges)
    acc += e.k * sq(s.s[e.i] - s.s[e.j]) * edge::diff2(th.theta, e.i, e.j);
  return 0.25 * acc;
}

template <std::size_t D>
double residual_tilde(const StiffnessGraph& g, const DegreeField& s,
                      const LineField<D>& th) {
  double acc = 0;
  for (const auto& e : g.edges)
    acc += e.k * sq(std::abs(s.s[e.i]) - std::abs(s.s[e.j])) *
           edge::diff2(th.theta, e.i, e.j);
  return 0.25 * acc;
}

template <std::size_t D>
double residual_tilde(const StiffnessGraph& g, const DegreeField& s,
                      const DirectorField<D>& n) {
  double acc = 0;
  for (const auto& e : g.edges)
    acc += e.k * sq(std::abs(s.s[e.i]) - std::abs(s.s[e.j])) *
           edge::diff2(n.n, e.i, e.j);
  return 0.25 * acc;
}

// Bulk energy: exact integration of the polynomial part, lumped quadrature
// for the (normally inactive) barrier.
template <std::size_t D>
double bulk_energy(const SimplicialMesh<D>& mesh, const LumpedMass& lumped,
                   const DoubleWell& well, const DegreeField& s) {
  double v = integrate_poly_of_field(mesh, s.s, well.psi());
  double lo = well.lo, hi = well.hi;
  for (std::size_t i = 0; i < s.s.size(); ++i) {
    double si = s.s[i];
    if (si < lo || si > hi) v += lumped.m[i] * well.barrier_term(si);
  }
  return v / well.eta_bulk;
}

// ---------------------------------------------------------------------------
// First variations (main + bulk). The tangential variations take a nodal
// test field; z must vanish on Dirichlet-s nodes, v must be tangent to n.

// delta_s of the main energy against z: kappa sum_e k (ds)(dz)
// + 1/2 sum_e k |d dir|^2 (s_i z_i + s_j z_j).
template <std::size_t D, class OrientVals>
double first_variation_s_main(const StiffnessGraph& g, const DegreeField& s,
                              const OrientVals& dir_vals, double kappa,
                              const std::vector<double>& z) {
  double acc = 0;
  for (const auto& e : g.edges) {
    double d2 = edge::diff2(dir_vals, e.i, e.j);
    acc += kappa * e.k * (s.s[e.i] - s.s[e.j]) * (z[e.i] - z[e.j]);
    acc += 0.5 * e.k * d2 * (s.s[e.i] * z[e.i] + s.s[e.j] * z[e.j]);
  }
  return acc;
}

template <std::size_t D>
double first_variation_s(const StiffnessGraph& g, const SimplicialMesh<D>& mesh,
                         const DegreeField& s, const DirectorField<D>& n,
                         double kappa, const DoubleWell& well,
                         const std::vector<double>& z) {
  double acc = first_variation_s_main<D>(g, s, n.n, kappa, z);
  auto dpsi = poly::subtract(poly::derivative(well.psi_c),
                             poly::derivative(well.psi_e));
  std::vector<double> load = assemble_poly_load(mesh, s.s, dpsi);
  for (std::size_t i = 0; i < z.size(); ++i) acc += load[i] * z[i] / well.eta_bulk;
  return acc;
}

template <std::size_t D>
double first_variation_s(const StiffnessGraph& g, const SimplicialMesh<D>& mesh,
                         const DegreeField& s, const LineField<D>& th,
                         const DoubleWell& well, const std::vector<double>& z) {
  double kappa = double(D - 1) / D;
  double acc = first_variation_s_main<D>(g, s, th.theta, kappa, z);
  auto dpsi = poly::subtract(poly::derivative(well.psi_c),
                             poly::derivative(well.psi_e));
  std::vector<double> load = assemble_poly_load(mesh, s.s, dpsi);
  for (std::size_t i = 0; i < z.size(); ++i) acc += load[i] * z[i] / well.eta_bulk;
  return acc;
}

// Tangential variation of the energy's orientation part,
// (1/2) delta_n Ering[s, n; v] = sum_e k w_e (dn).(dv).
template <std::size_t D>
double first_variation_dir(const StiffnessGraph& g, const DegreeField& s,
                           const DirectorField<D>& n,
                           const std::vector<Vec<D>>& v) {
  double acc = 0;
  for (const auto& e : g.edges) {
    double w = 0.5 * (sq(s.s[e.i]) + sq(s.s[e.j]));
    acc += e.k * w * dot(n.n[e.i] - n.n[e.j], v[e.i] - v[e.j]);
  }
  return acc;
}

// Same for the line field along V_i = n_i (x) v_i + v_i (x) n_i.
template <std::size_t D>
double first_variation_dir(const StiffnessGraph& g, const DegreeField& s,
                           const LineField<D>& th,
                           const std::vector<Vec<D>>& v) {
  double acc = 0;
  for (const auto& e : g.edges) {
    double w = 0.5 * (sq(s.s[e.i]) + sq(s.s[e.j]));
    Mat<D> Vi = outer(th.n[e.i], v[e.i]) + outer(v[e.i], th.n[e.i]);
    Mat<D> Vj = outer(th.n[e.j], v[e.j]) + outer(v[e.j], th.n[e.j]);
    acc += e.k * w * frob(th.theta[e.i] - th.theta[e.j], Vi - Vj);
  }
  return acc;
}

}  // namespace nlc
