#pragma once

// Shared test utilities: random admissible states and finite-difference
// oracles for the first-variation checks.

#include <random>
#include <vector>

#include "nlc/energy.hpp"
#include "nlc/fields.hpp"
#include "nlc/flow.hpp"

namespace testutil {

using namespace nlc;

inline std::vector<double> random_scalars(std::mt19937_64& rng, std::size_t n,
                                          double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <int D>
std::vector<Vec<D>> random_units(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0, 1);
  std::vector<Vec<D>> v(n);
  for (auto& x : v) {
    double len = 0;
    while (len < 1e-3) {
      for (std::size_t c = 0; c < D; ++c) x[c] = g(rng);
      len = norm(x);
    }
    x = (1.0 / len) * x;
  }
  return v;
}

// Random tangent test field: unit-orthogonal to n at every node, zero where
// the boundary pins the direction.
template <int D>
std::vector<Vec<D>> random_tangents(std::mt19937_64& rng,
                                    const std::vector<Vec<D>>& n,
                                    const BoundaryData<D>* bc = nullptr) {
  std::normal_distribution<double> g(0, 1);
  std::vector<Vec<D>> v(n.size(), vec_zero<D>());
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (bc && bc->dir_fixed[i]) continue;
    Vec<D> raw;
    for (std::size_t c = 0; c < D; ++c) raw[c] = g(rng);
    Vec<D> t = raw - dot(raw, n[i]) * n[i];
    if (norm(t) > 1e-8) v[i] = (1.0 / norm(t)) * t;
  }
  return v;
}

// Central finite difference of a scalar functional along a path.
template <class F>
double central_fd(const F& f, double tau) {
  return (f(tau) - f(-tau)) / (2.0 * tau);
}

// Checks that |analytic - central FD| behaves like O(tau^2): either the
// error is at rounding level for every tau (exactly quadratic energies) or
// the fitted order is >= 1.9.
template <class F>
bool fd_matches_second_order(const F& path_energy, double analytic,
                             const std::vector<double>& taus, double scale,
                             double* worst_order = nullptr) {
  std::vector<double> errs;
  for (double tau : taus)
    errs.push_back(std::abs(central_fd(path_energy, tau) - analytic));
  bool all_tiny = true;
  for (double e : errs)
    if (e > 1e-8 * std::max(1.0, scale)) all_tiny = false;
  if (all_tiny) {
    if (worst_order) *worst_order = 2.0;
    return true;
  }
  double worst = 1e9;
  for (std::size_t k = 0; k + 1 < taus.size(); ++k) {
    // pairs whose finer error sits at the cancellation floor eps*E/tau are
    // unobservable; a genuinely wrong gradient stays orders above the floor
    double floor = 1e-13 * std::max(1.0, scale) / taus[k + 1];
    if (errs[k + 1] <= floor) continue;
    double order = std::log(errs[k] / errs[k + 1]) /
                   std::log(taus[k] / taus[k + 1]);
    worst = std::min(worst, order);
  }
  if (worst_order) *worst_order = worst == 1e9 ? 2.0 : worst;
  return worst >= 1.9;
}

}  // namespace testutil
