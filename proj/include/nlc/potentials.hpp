#pragma once

// Double-well bulk potentials with convex-concave splitting, for the scalar
// (degree of orientation) models and the tensorial Landau-deGennes bulk.

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "nlc/core.hpp"
#include "nlc/fields.hpp"

namespace nlc {

namespace poly {

inline double eval(const std::vector<double>& c, double x) {
  double v = 0;
  for (std::size_t k = c.size(); k-- > 0;) v = v * x + c[k];
  return v;
}

inline std::vector<double> derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(c[k] * (double)k);
  if (d.empty()) d.push_back(0.0);
  return d;
}

inline std::vector<double> subtract(std::vector<double> a,
                                    const std::vector<double>& b) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t k = 0; k < b.size(); ++k) a[k] -= b[k];
  return a;
}

}  // namespace poly

// psi = psi_c - psi_e on the admissible interval, both parts convex there.
// Outside the interval a steep quartic barrier (value- and slope-matched,
// assigned to the convex part) guards transient overshoot before clamping.
struct DoubleWell {
  Model model = Model::ericksen;
  std::vector<double> psi_c;  // coefficients, psi_c[k] * s^k
  std::vector<double> psi_e;
  double s_star = 0;    // global minimizer on the interval
  double eta_bulk = 1;  // bulk weight is 1/eta_bulk
  double lo = -0.5, hi = 1.0;
  double barrier = 1e4;

  std::vector<double> psi() const { return poly::subtract(psi_c, psi_e); }

  double barrier_term(double s) const {
    if (s > hi) return barrier * sq(sq(s - hi));
    if (s < lo) return barrier * sq(sq(lo - s));
    return 0.0;
  }
  double barrier_deriv(double s) const {
    if (s > hi) return 4.0 * barrier * (s - hi) * sq(s - hi);
    if (s < lo) return -4.0 * barrier * (lo - s) * sq(lo - s);
    return 0.0;
  }

  double eval_psi(double s) const {
    return poly::eval(psi_c, s) - poly::eval(psi_e, s) + barrier_term(s);
  }
  double eval_psi_c(double s) const { return poly::eval(psi_c, s) + barrier_term(s); }
  double eval_psi_e(double s) const { return poly::eval(psi_e, s); }
  double eval_dpsi(double s) const {
    return poly::eval(poly::derivative(psi_c), s) -
           poly::eval(poly::derivative(psi_e), s) + barrier_deriv(s);
  }
  // Convex-split derivative: psi_c'(s_new) - psi_e'(s_old).
  double eval_dpsi_split(double s_new, double s_old) const {
    return poly::eval(poly::derivative(psi_c), s_new) + barrier_deriv(s_new) -
           poly::eval(poly::derivative(psi_e), s_old);
  }

  bool psi_c_is_quadratic() const {
    for (std::size_t k = 3; k < psi_c.size(); ++k)
      if (psi_c[k] != 0.0) return false;
    return true;
  }
  // For quadratic psi_c = a0 + a1 s + a2 s^2: the linear-in-s part of psi_c'.
  double psi_c_quad_coeff() const { return psi_c.size() > 2 ? psi_c[2] : 0.0; }
  double psi_c_lin_coeff() const { return psi_c.size() > 1 ? psi_c[1] : 0.0; }
};

// The quartic well used in the planar +3 defect experiment:
// psi_c = 63 s^2, psi_e = -16 s^4 + (64/3) s^3 + 57 s^2,
// global minimum at s* = 0.750025.
inline DoubleWell erk_example_well() {
  DoubleWell w;
  w.model = Model::ericksen;
  w.psi_c = {0.0, 0.0, 63.0};
  w.psi_e = {0.0, 0.0, 57.0, 21.33333333333333, -16.0};
  w.s_star = 0.750025;
  w.eta_bulk = 1.0;
  w.lo = -0.5;
  w.hi = 1.0;
  return w;
}

// The uniaxial-model well with global minimum at s* = 0.700005531 and
// psi(s*) = 0: psi_c = 36.7709 s^2 + 1,
// psi_e = -7.39101 s^4 + 4.51673 s^3 + 39.27161 s^2.
inline DoubleWell uni_example_well(int dim = 3) {
  DoubleWell w;
  w.model = Model::uniaxial_ldg;
  w.psi_c = {1.0, 0.0, 36.7709};
  w.psi_e = {0.0, 0.0, 39.27161, 4.51673, -7.39101};
  w.s_star = 0.700005531;
  w.eta_bulk = 1.0 / 16.0;
  w.lo = -1.0 / (dim - 1);
  w.hi = 1.0;
  return w;
}

// Same well with the digits used alongside the conforming-mesh colloid runs.
inline DoubleWell uni_saturn_well(int dim = 3) {
  DoubleWell w = uni_example_well(dim);
  w.psi_c = {1.0, 0.0, 36.770913};
  w.psi_e = {0.0, 0.0, 39.271614, 4.5167269, -7.3910077};
  w.s_star = 0.7;
  return w;
}

// ---------------------------------------------------------------------------
// Tensorial Landau-deGennes bulk
//   psi(Q) = K + (A/2) tr(Q^2) - (B/3) tr(Q^3) + (C/4) (tr Q^2)^2,
// split as psi_c = K + (A+D)/2 tr(Q^2),
//          psi_e = D/2 tr(Q^2) + B/3 tr(Q^3) - C/4 (tr Q^2)^2.

struct LdgBulkParams {
  double K = 1.0;
  double A = -7.502104;
  double B = 60.975813;
  double C = 66.519069;
  double D = 552.230967;
};

template <std::size_t D>
double ldg_bulk_psi(const LdgBulkParams& p, const Mat<D>& Q) {
  Mat<D> Q2 = matmul(Q, Q);
  double t2 = trace(Q2), t3 = trace(matmul(Q2, Q));
  return p.K + 0.5 * p.A * t2 - p.B / 3.0 * t3 + 0.25 * p.C * t2 * t2;
}

// Variation of the bulk against traceless P: A Q - B dev(Q^2) + C tr(Q^2) Q.
// The deviatoric projection of Q^2 keeps the result in the traceless space;
// against traceless test tensors it agrees with the unprojected form.
template <std::size_t D>
Mat<D> ldg_bulk_dpsi(const LdgBulkParams& p, const Mat<D>& Q) {
  Mat<D> Q2 = matmul(Q, Q);
  double t2 = trace(Q2);
  Mat<D> dev = Q2 - (t2 / D) * identity<D>();
  return p.A * Q - p.B * dev + p.C * t2 * Q;
}

// Explicit (concave) part used by the semi-implicit flow:
// D Q + B dev(Q^2) - C tr(Q^2) Q.
template <std::size_t D>
Mat<D> ldg_bulk_dpsi_e(const LdgBulkParams& p, const Mat<D>& Q) {
  Mat<D> Q2 = matmul(Q, Q);
  double t2 = trace(Q2);
  Mat<D> dev = Q2 - (t2 / D) * identity<D>();
  return p.D * Q + p.B * dev - p.C * t2 * Q;
}

// Restriction of the tensor bulk to uniaxial Q = s (Theta - I/d), as a
// polynomial in s. In 3D: tr Q^2 = (2/3) s^2, tr Q^3 = (2/9) s^3; in 2D the
// cubic invariant vanishes.
inline std::vector<double> ldg_bulk_uniaxial_poly(const LdgBulkParams& p, int d) {
  if (d == 3)
    return {p.K, 0.0, p.A / 3.0, -2.0 * p.B / 27.0, p.C / 9.0};
  return {p.K, 0.0, p.A / 4.0, 0.0, p.C / 16.0};
}

inline DoubleWell ldg_well_from_params(const LdgBulkParams& p, int d,
                                       double eta_bulk) {
  DoubleWell w;
  w.model = Model::uniaxial_ldg;
  if (d == 3) {
    w.psi_c = {p.K, 0.0, (p.A + p.D) / 3.0};
    w.psi_e = {0.0, 0.0, p.D / 3.0, 2.0 * p.B / 27.0, -p.C / 9.0};
  } else {
    w.psi_c = {p.K, 0.0, (p.A + p.D) / 4.0};
    w.psi_e = {0.0, 0.0, p.D / 4.0, 0.0, -p.C / 16.0};
  }
  w.eta_bulk = eta_bulk;
  w.lo = -1.0 / (d - 1);
  w.hi = 1.0;
  // locate the well minimum by direct scan + Newton polish
  auto psi = w.psi();
  auto dpsi = poly::derivative(psi);
  auto ddpsi = poly::derivative(dpsi);
  double best = 0, bestv = poly::eval(psi, 0.0);
  for (int k = 0; k <= 2000; ++k) {
    double s = w.lo + (w.hi - w.lo) * k / 2000.0;
    double v = poly::eval(psi, s);
    if (v < bestv) {
      bestv = v;
      best = s;
    }
  }
  for (int it = 0; it < 50; ++it) {
    double g = poly::eval(dpsi, best), h = poly::eval(ddpsi, best);
    if (h <= 0) break;
    double step = g / h;
    best -= step;
    if (std::abs(step) < 1e-15) break;
  }
  w.s_star = std::clamp(best, w.lo, w.hi);
  return w;
}

// ---------------------------------------------------------------------------
// Convexity audit: sample second derivatives of both split parts on a grid.

struct ConvexityReport {
  double min_curvature_c = 0;
  double min_curvature_e = 0;
  bool both_convex = false;
};

inline ConvexityReport convexity_audit(const DoubleWell& w, double lo, double hi,
                                       int samples = 1000) {
  auto ddc = poly::derivative(poly::derivative(w.psi_c));
  auto dde = poly::derivative(poly::derivative(w.psi_e));
  ConvexityReport r;
  r.min_curvature_c = r.min_curvature_e = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= samples; ++k) {
    double s = lo + (hi - lo) * k / samples;
    r.min_curvature_c = std::min(r.min_curvature_c, poly::eval(ddc, s));
    r.min_curvature_e = std::min(r.min_curvature_e, poly::eval(dde, s));
  }
  r.both_convex = r.min_curvature_c >= -1e-10 && r.min_curvature_e >= -1e-10;
  return r;
}

}  // namespace nlc
