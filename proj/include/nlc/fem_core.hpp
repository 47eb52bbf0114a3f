#pragma once

// Shared linear-algebra and quadrature kernels: CSR symmetric operators,
// Jacobi-preconditioned CG with constrained-dof projection, mass lumping,
// and exact integration of polynomials of P1 fields on simplices.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "nlc/mesh.hpp"

namespace nlc {

// ---------------------------------------------------------------------------
// Sparse symmetric operator. Built from triplets, finalized to CSR.

class SparseSymOperator {
 public:
  explicit SparseSymOperator(index_t n = 0) : n_(n) {}

  index_t dimension() const { return n_; }

  void add(index_t i, index_t j, double v) { trip_.push_back({i, j, v}); }

  void finalize() {
    std::sort(trip_.begin(), trip_.end(), [](const T& a, const T& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    row_ptr_.assign(n_ + 1, 0);
    col_.clear();
    val_.clear();
    for (std::size_t k = 0; k < trip_.size();) {
      std::size_t e = k;
      double s = 0;
      while (e < trip_.size() && trip_[e].i == trip_[k].i && trip_[e].j == trip_[k].j)
        s += trip_[e++].v;
      col_.push_back(trip_[k].j);
      val_.push_back(s);
      row_ptr_[trip_[k].i + 1]++;
      k = e;
    }
    for (index_t i = 0; i < n_; ++i) row_ptr_[i + 1] += row_ptr_[i];
    trip_.clear();
    trip_.shrink_to_fit();
    finalized_ = true;
  }

  bool finalized() const { return finalized_; }

  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(n_, 0.0);
    parallel_for(n_, [&](index_t b, index_t e) {
      for (index_t i = b; i < e; ++i) {
        double s = 0;
        for (index_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
          s += val_[k] * x[col_[k]];
        y[i] = s;
      }
    });
  }

  double diag_entry(index_t i) const {
    for (index_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (col_[k] == i) return val_[k];
    return 0.0;
  }

  // Max relative asymmetry, scanning stored entries.
  double asymmetry() const {
    double worst = 0, scale = 1e-300;
    for (index_t i = 0; i < n_; ++i) {
      for (index_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        index_t j = col_[k];
        scale = std::max(scale, std::abs(val_[k]));
        if (j < i) continue;
        double vji = 0;
        for (index_t k2 = row_ptr_[j]; k2 < row_ptr_[j + 1]; ++k2)
          if (col_[k2] == i) {
            vji = val_[k2];
            break;
          }
        worst = std::max(worst, std::abs(val_[k] - vji));
      }
    }
    return worst / scale;
  }

  double rayleigh(const std::vector<double>& x) const {
    std::vector<double> y;
    apply(x, y);
    double num = 0, den = 0;
    for (index_t i = 0; i < n_; ++i) {
      num += x[i] * y[i];
      den += x[i] * x[i];
    }
    return num / den;
  }

 private:
  struct T {
    index_t i, j;
    double v;
  };
  index_t n_;
  std::vector<T> trip_;
  std::vector<index_t> row_ptr_;
  std::vector<index_t> col_;
  std::vector<double> val_;
  bool finalized_ = false;
};

// ---------------------------------------------------------------------------
// Conjugate gradients with Jacobi preconditioner. Constrained dofs (mask
// true) are held at zero; the caller eliminates boundary values into the
// right-hand side.

struct CgResult {
  bool converged = false;
  int iterations = 0;
  double residual = 0;  // final relative residual
  std::vector<double> residual_history;
};

inline CgResult cg_solve(const SparseSymOperator& A, const std::vector<double>& b,
                         std::vector<double>& x, double tol = 1e-10,
                         int max_iter = 0,
                         const std::vector<char>* constrained = nullptr) {
  const index_t n = A.dimension();
  if (max_iter <= 0) max_iter = (int)std::max<index_t>(1000, 4 * n);
  auto project = [&](std::vector<double>& v) {
    if (constrained)
      for (index_t i = 0; i < n; ++i)
        if ((*constrained)[i]) v[i] = 0.0;
  };
  std::vector<double> pre(n, 1.0);
  for (index_t i = 0; i < n; ++i) {
    double d = A.diag_entry(i);
    pre[i] = d > 0 ? 1.0 / d : 1.0;
  }
  if (x.empty()) x.assign(n, 0.0);
  project(x);
  std::vector<double> r(n), z(n), p(n), Ap(n);
  A.apply(x, Ap);
  double bnorm = 0;
  std::vector<double> br = b;
  project(br);
  for (index_t i = 0; i < n; ++i) {
    r[i] = br[i] - Ap[i];
    bnorm += br[i] * br[i];
  }
  project(r);
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0) {
    x.assign(n, 0.0);
    return {true, 0, 0.0, {0.0}};
  }
  CgResult res;
  double rz = 0;
  for (index_t i = 0; i < n; ++i) {
    z[i] = pre[i] * r[i];
    rz += r[i] * z[i];
  }
  project(z);
  p = z;
  double rnorm = 0;
  for (index_t i = 0; i < n; ++i) rnorm += r[i] * r[i];
  rnorm = std::sqrt(rnorm);
  res.residual_history.push_back(rnorm / bnorm);
  for (int it = 0; it < max_iter; ++it) {
    if (rnorm / bnorm <= tol) {
      res.converged = true;
      break;
    }
    A.apply(p, Ap);
    project(Ap);
    double pAp = 0;
    for (index_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
    if (!std::isfinite(pAp) || pAp <= 0)
      throw NumericalError("cg_solve: operator not SPD on free subspace");
    double alpha = rz / pAp;
    for (index_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    double rz_new = 0;
    for (index_t i = 0; i < n; ++i) {
      z[i] = pre[i] * r[i];
    }
    project(z);
    for (index_t i = 0; i < n; ++i) rz_new += r[i] * z[i];
    double beta = rz_new / rz;
    rz = rz_new;
    for (index_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rnorm = 0;
    for (index_t i = 0; i < n; ++i) rnorm += r[i] * r[i];
    rnorm = std::sqrt(rnorm);
    if (!std::isfinite(rnorm)) throw NumericalError("cg_solve: non-finite residual");
    res.iterations = it + 1;
    res.residual_history.push_back(rnorm / bnorm);
  }
  res.residual = rnorm / bnorm;
  if (!res.converged && rnorm / bnorm <= tol) res.converged = true;
  if (!res.converged) {
    std::string msg = "cg_solve: max_iter exceeded, relative residual " +
                      std::to_string(res.residual);
    throw NumericalError(msg);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Mass lumping: m_i = sum_{T owning x_i} |T|/(d+1). Exact for P1 integrands.

struct LumpedMass {
  std::vector<double> m;
  double total = 0;

  double integral(const std::vector<double>& f) const {
    if (f.size() != m.size()) throw NumericalError("lumped_integral: size mismatch");
    double s = 0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m[i] * f[i];
    return s;
  }
};

template <std::size_t D>
LumpedMass build_lumped_mass(const SimplicialMesh<D>& mesh) {
  LumpedMass lm;
  lm.m.assign(mesh.n_vertices(), 0.0);
  for (index_t c = 0; c < mesh.n_cells(); ++c) {
    double w = mesh.cell_volume(c) / (D + 1);
    for (int a = 0; a <= D; ++a) lm.m[mesh.cells[c][a]] += w;
  }
  lm.total = std::accumulate(lm.m.begin(), lm.m.end(), 0.0);
  return lm;
}

template <std::size_t D>
double lumped_integral(const SimplicialMesh<D>& mesh, const std::vector<double>& f) {
  return build_lumped_mass(mesh).integral(f);
}

// Boundary lumped mass over a set of labels (empty set = all boundary facets).
template <std::size_t D>
std::vector<double> build_boundary_lumped_mass(
    const SimplicialMesh<D>& mesh, const std::set<std::string>& labels = {}) {
  std::vector<double> m(mesh.n_vertices(), 0.0);
  for (const auto& f : mesh.boundary_facets) {
    if (!labels.empty() && !labels.count(f.label)) continue;
    double area;
    if constexpr (D == 2) {
      area = norm(mesh.vertices[f.nodes[1]] - mesh.vertices[f.nodes[0]]);
    } else {
      Vec<3> e1 = mesh.vertices[f.nodes[1]] - mesh.vertices[f.nodes[0]];
      Vec<3> e2 = mesh.vertices[f.nodes[2]] - mesh.vertices[f.nodes[0]];
      Vec<3> cr{e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
                e1[0] * e2[1] - e1[1] * e2[0]};
      area = 0.5 * norm(cr);
    }
    for (auto n : f.nodes) m[n] += area / D;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Exact integration of polynomials of a P1 field on a simplex, via
//   int_T (sum_i a_i lambda_i)^m dx = |T| (m! d! / (m+d)!) h_m(a),
// with h_m the complete homogeneous symmetric polynomial, and
//   int_T s^m lambda_j dx = |T| (m! d! / (m+d+1)!) g_mj(a),
//   g_mj = h_m + a_j g_{m-1,j}.

namespace detail {
constexpr int kMaxPolyDeg = 8;

inline double hpoly(int m, const double* a, int n) {
  // DP over variables; h[k] = complete homogeneous symmetric of degree k.
  double h[kMaxPolyDeg + 1] = {1.0};
  for (int k = 1; k <= m; ++k) h[k] = 0.0;
  for (int v = 0; v < n; ++v)
    for (int k = 1; k <= m; ++k) h[k] += a[v] * h[k - 1];
  return h[m];
}

inline double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}
}  // namespace detail

// int_T s^m dx for nodal values a[0..D] on a cell of volume vol.
template <std::size_t D>
double elem_int_power(double vol, const std::array<double, D + 1>& a, int m) {
  if (m == 0) return vol;
  double coeff = detail::factorial(m) * detail::factorial(D) /
                 detail::factorial(m + D);
  return vol * coeff * detail::hpoly(m, a.data(), D + 1);
}

// int_T s^m lambda_j dx.
template <std::size_t D>
double elem_int_power_hat(double vol, const std::array<double, D + 1>& a, int m,
                          int j) {
  double coeff = detail::factorial(m) * detail::factorial(D) /
                 detail::factorial(m + D + 1);
  double g = 1.0;  // g_{0,j}
  for (int k = 1; k <= m; ++k)
    g = detail::hpoly(k, a.data(), D + 1) + a[j] * g;
  return vol * coeff * g;
}

// int_Omega p(s_h) dx for a polynomial p given by coefficients (c[k] s^k).
template <std::size_t D>
double integrate_poly_of_field(const SimplicialMesh<D>& mesh,
                               const std::vector<double>& s,
                               const std::vector<double>& coeffs) {
  double total = 0;
  for (index_t c = 0; c < mesh.n_cells(); ++c) {
    double vol = mesh.cell_volume(c);
    std::array<double, D + 1> a;
    for (int k = 0; k <= D; ++k) a[k] = s[mesh.cells[c][k]];
    for (std::size_t m = 0; m < coeffs.size(); ++m)
      if (coeffs[m] != 0.0) total += coeffs[m] * elem_int_power<D>(vol, a, (int)m);
  }
  return total;
}

// Assembles the load vector b_i = int_Omega p(s_h) phi_i dx exactly.
template <std::size_t D>
std::vector<double> assemble_poly_load(const SimplicialMesh<D>& mesh,
                                       const std::vector<double>& s,
                                       const std::vector<double>& coeffs) {
  std::vector<double> b(mesh.n_vertices(), 0.0);
  for (index_t c = 0; c < mesh.n_cells(); ++c) {
    double vol = mesh.cell_volume(c);
    std::array<double, D + 1> a;
    for (int k = 0; k <= D; ++k) a[k] = s[mesh.cells[c][k]];
    for (int j = 0; j <= D; ++j) {
      double v = 0;
      for (std::size_t m = 0; m < coeffs.size(); ++m)
        if (coeffs[m] != 0.0)
          v += coeffs[m] * elem_int_power_hat<D>(vol, a, (int)m, j);
      b[mesh.cells[c][j]] += v;
    }
  }
  return b;
}

// int_T s^2 dx per cell, used as the elementwise weight of the weighted H1
// inner product.
template <std::size_t D>
double elem_int_square(const SimplicialMesh<D>& mesh, const std::vector<double>& s,
                       index_t c) {
  std::array<double, D + 1> a;
  for (int k = 0; k <= D; ++k) a[k] = s[mesh.cells[c][k]];
  return elem_int_power<D>(mesh.cell_volume(c), a, 2);
}

// ---------------------------------------------------------------------------
// Standard scalar P1 matrices.

template <std::size_t D>
SparseSymOperator assemble_stiffness_matrix(const SimplicialMesh<D>& mesh) {
  SparseSymOperator A(mesh.n_vertices());
  for (index_t c = 0; c < mesh.n_cells(); ++c) {
    double vol = mesh.cell_volume(c);
    auto g = mesh.cell_grads(c);
    for (int a = 0; a <= D; ++a)
      for (int b = 0; b <= D; ++b)
        A.add(mesh.cells[c][a], mesh.cells[c][b], vol * dot(g[a], g[b]));
  }
  A.finalize();
  return A;
}

// Consistent P1 mass matrix: elemental |T|/((d+1)(d+2)) (1 + delta_ab).
template <std::size_t D>
SparseSymOperator assemble_mass_matrix(const SimplicialMesh<D>& mesh) {
  SparseSymOperator M(mesh.n_vertices());
  for (index_t c = 0; c < mesh.n_cells(); ++c) {
    double w = mesh.cell_volume(c) / ((D + 1) * (D + 2));
    for (int a = 0; a <= D; ++a)
      for (int b = 0; b <= D; ++b)
        M.add(mesh.cells[c][a], mesh.cells[c][b], w * (a == b ? 2.0 : 1.0));
  }
  M.finalize();
  return M;
}

// L2 inner product of P1 fields via the consistent mass (exact).
template <std::size_t D>
double l2_inner(const SimplicialMesh<D>& mesh, const std::vector<double>& f,
                const std::vector<double>& g) {
  double total = 0;
  for (index_t c = 0; c < mesh.n_cells(); ++c) {
    double w = mesh.cell_volume(c) / ((D + 1) * (D + 2));
    for (int a = 0; a <= D; ++a)
      for (int b = 0; b <= D; ++b)
        total += w * (a == b ? 2.0 : 1.0) * f[mesh.cells[c][a]] * g[mesh.cells[c][b]];
  }
  return total;
}

}  // namespace nlc
