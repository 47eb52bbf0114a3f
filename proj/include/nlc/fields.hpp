#pragma once

// Nodal P1 field containers carrying the per-node structural constraints:
// degree of orientation s, unit directors n, rank-one line fields Theta,
// the auxiliary product fields u = I_h(s n) / U = I_h(s Theta), and the
// traceless-symmetric Q-tensor representation.

#include <optional>
#include <vector>

#include "nlc/core.hpp"
#include "nlc/mesh.hpp"

namespace nlc {

enum class Model { ericksen, uniaxial_ldg, standard_ldg };

inline double admissible_min(Model model, int d) {
  return model == Model::ericksen ? -0.5 : -1.0 / (d - 1);
}
inline double admissible_max(Model, int) { return 1.0; }

// Degree-of-orientation field. Nodal values are clamped into the model's
// closed admissible range on construction (and the flows re-clamp after
// every step).
struct DegreeField {
  std::vector<double> s;
  Model model = Model::ericksen;
  int dim = 3;

  DegreeField() = default;
  DegreeField(std::vector<double> values, Model m, int d)
      : s(std::move(values)), model(m), dim(d) {
    clamp();
  }

  double lo() const { return admissible_min(model, dim); }
  double hi() const { return admissible_max(model, dim); }

  void clamp() {
    double a = lo(), b = hi();
    for (auto& v : s) v = std::clamp(v, a, b);
  }

  double min_value() const {
    double m = hi();
    for (double v : s) m = std::min(m, v);
    return m;
  }
};

template <std::size_t D>
struct DirectorField {
  std::vector<Vec<D>> n;

  DirectorField() = default;
  explicit DirectorField(std::vector<Vec<D>> values) : n(std::move(values)) {
    for (auto& v : n) v = normalized(v);
  }

  double max_unit_violation() const {
    double w = 0;
    for (const auto& v : n) w = std::max(w, std::abs(norm(v) - 1.0));
    return w;
  }
};

// Line field Theta = n (x) n, stored as the generating unit vector with the
// projector cached. Theta(n) == Theta(-n) by construction.
template <std::size_t D>
struct LineField {
  std::vector<Vec<D>> n;
  std::vector<Mat<D>> theta;

  LineField() = default;
  explicit LineField(std::vector<Vec<D>> gen) : n(std::move(gen)) {
    theta.resize(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
      n[i] = normalized(n[i]);
      theta[i] = outer(n[i], n[i]);
    }
  }

  static LineField from_director(const DirectorField<D>& d) {
    return LineField(d.n);
  }

  void set_node(index_t i, const Vec<D>& v) {
    n[i] = normalized(v);
    theta[i] = outer(n[i], n[i]);
  }
};

// Auxiliary vector field u_i = s_i n_i (and the tilde variant with |s_i|).
template <std::size_t D>
struct AuxVectorField {
  std::vector<Vec<D>> u;
};

template <std::size_t D>
struct AuxTensorField {
  std::vector<Mat<D>> U;
};

template <std::size_t D>
AuxVectorField<D> make_aux(const DegreeField& s, const DirectorField<D>& dir,
                           bool absolute = false) {
  if (s.s.size() != dir.n.size()) throw NumericalError("make_aux: size mismatch");
  AuxVectorField<D> a;
  a.u.resize(s.s.size());
  for (std::size_t i = 0; i < s.s.size(); ++i) {
    double si = absolute ? std::abs(s.s[i]) : s.s[i];
    a.u[i] = si * dir.n[i];
  }
  return a;
}

template <std::size_t D>
AuxTensorField<D> make_aux(const DegreeField& s, const LineField<D>& line,
                           bool absolute = false) {
  if (s.s.size() != line.theta.size())
    throw NumericalError("make_aux: size mismatch");
  AuxTensorField<D> a;
  a.U.resize(s.s.size());
  for (std::size_t i = 0; i < s.s.size(); ++i) {
    double si = absolute ? std::abs(s.s[i]) : s.s[i];
    a.U[i] = si * line.theta[i];
  }
  return a;
}

// Nodewise truncation away from the range endpoints (rho in [0, c0]).
inline DegreeField truncate_nodewise(const DegreeField& s, double rho,
                                     double c0 = 0.5) {
  if (rho < 0 || rho > c0)
    throw ConfigError("truncate_nodewise: rho outside [0, c0]");
  DegreeField out = s;
  double a = s.lo() + rho, b = s.hi() - rho;
  for (auto& v : out.s) v = std::clamp(v, a, b);
  return out;
}

// ---------------------------------------------------------------------------
// Q-tensor fields. Components (q11, q12, q13, q22, q23) with
// q33 = -q11 - q22 in 3D; (q11, q12) with q22 = -q11 in 2D.

template <std::size_t D>
constexpr int q_components() {
  return D == 3 ? 5 : 2;
}

template <std::size_t D>
Mat<D> q_from_components(const std::array<double, q_components<D>()>& q) {
  Mat<D> Q{};
  if constexpr (D == 3) {
    Q[0][0] = q[0];
    Q[0][1] = Q[1][0] = q[1];
    Q[0][2] = Q[2][0] = q[2];
    Q[1][1] = q[3];
    Q[1][2] = Q[2][1] = q[4];
    Q[2][2] = -q[0] - q[3];
  } else {
    Q[0][0] = q[0];
    Q[0][1] = Q[1][0] = q[1];
    Q[1][1] = -q[0];
  }
  return Q;
}

template <std::size_t D>
std::array<double, q_components<D>()> q_to_components(const Mat<D>& Q) {
  if constexpr (D == 3)
    return {Q[0][0], Q[0][1], Q[0][2], Q[1][1], Q[1][2]};
  else
    return {Q[0][0], Q[0][1]};
}

template <std::size_t D>
struct QTensorField {
  static constexpr int NC = q_components<D>();
  // Layout: node-major, NC components per node.
  std::vector<double> q;

  QTensorField() = default;
  explicit QTensorField(index_t n_nodes) : q(n_nodes * NC, 0.0) {}

  index_t n_nodes() const { return (index_t)q.size() / NC; }

  Mat<D> node(index_t i) const {
    std::array<double, NC> c;
    for (int k = 0; k < NC; ++k) c[k] = q[i * NC + k];
    return q_from_components<D>(c);
  }

  void set_node(index_t i, const Mat<D>& Q) {
    auto c = q_to_components<D>(Q);
    for (int k = 0; k < NC; ++k) q[i * NC + k] = c[k];
  }
};

// Uniaxial composition Q = s (Theta - I/d).
template <std::size_t D>
QTensorField<D> uniaxial_compose(const DegreeField& s, const LineField<D>& line) {
  QTensorField<D> out((index_t)s.s.size());
  for (index_t i = 0; i < (index_t)s.s.size(); ++i) {
    Mat<D> Q = s.s[i] * (line.theta[i] - (1.0 / D) * identity<D>());
    out.set_node(i, Q);
  }
  return out;
}

// Biaxiality parameter beta = 1 - 6 (tr Q^3)^2 / (tr Q^2)^3, in [0,1];
// beta := 0 at Q = 0.
template <std::size_t D>
double biaxiality(const Mat<D>& Q) {
  Mat<D> Q2 = matmul(Q, Q);
  double t2 = trace(Q2);
  if (t2 < 1e-24) return 0.0;
  double t3 = trace(matmul(Q2, Q));
  double beta = 1.0 - 6.0 * t3 * t3 / (t2 * t2 * t2);
  return std::clamp(beta, 0.0, 1.0);
}

struct UniaxialDecomposition {
  DegreeField s_eff;
  LineField<3> line;
  std::vector<double> beta;
};

// Per-node dominant eigenpair of Q: the eigenvalue of largest magnitude
// (positive on ties) so that uniaxial inputs round-trip for either sign of
// s. s_eff = (3/2) lambda, Theta = v (x) v.
inline UniaxialDecomposition uniaxial_decompose(const QTensorField<3>& Q) {
  const index_t n = Q.n_nodes();
  std::vector<double> seff(n, 0.0), beta(n, 0.0);
  std::vector<Vec<3>> gen(n, Vec<3>{0, 0, 1});
  std::optional<Vec<3>> prev;
  for (index_t i = 0; i < n; ++i) {
    Mat<3> Qi = Q.node(i);
    std::array<double, 3> ev;
    Mat<3> V;
    sym_eigen(Qi, ev, V);
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      double dk = std::abs(ev[k]) - std::abs(ev[best]);
      if (dk > 1e-15 || (std::abs(dk) <= 1e-15 && ev[k] > ev[best])) best = k;
    }
    // Degenerate dominant magnitude: fall back to the previous node's
    // direction (projected into the near-dominant eigenspace) for visual
    // continuity, else the lexicographically smallest candidate.
    double scale = std::max({std::abs(ev[0]), std::abs(ev[1]), std::abs(ev[2]), 1e-30});
    std::vector<int> cands;
    for (int k = 0; k < 3; ++k)
      if (std::abs(std::abs(ev[k]) - std::abs(ev[best])) <= 1e-10 * scale)
        cands.push_back(k);
    Vec<3> v{V[0][best], V[1][best], V[2][best]};
    if (cands.size() > 1) {
      if (prev) {
        Vec<3> proj{0, 0, 0};
        for (int k : cands) {
          Vec<3> ek{V[0][k], V[1][k], V[2][k]};
          proj = proj + dot(*prev, ek) * ek;
        }
        if (norm(proj) > 1e-12) v = normalized(proj);
      } else {
        for (int k : cands) {
          Vec<3> ek{V[0][k], V[1][k], V[2][k]};
          int big = 0;
          for (int c = 1; c < 3; ++c)
            if (std::abs(ek[c]) > std::abs(ek[big])) big = c;
          if (ek[big] < 0) ek = -1.0 * ek;
          if (std::lexicographical_compare(ek.begin(), ek.end(), v.begin(), v.end()))
            v = ek;
        }
      }
    }
    // Deterministic sign: largest-magnitude component positive.
    int big = 0;
    for (int c = 1; c < 3; ++c)
      if (std::abs(v[c]) > std::abs(v[big])) big = c;
    if (v[big] < 0) v = -1.0 * v;
    gen[i] = normalized(v);
    prev = gen[i];
    seff[i] = 1.5 * ev[best];
    beta[i] = biaxiality(Qi);
  }
  UniaxialDecomposition out;
  out.s_eff = DegreeField(std::move(seff), Model::uniaxial_ldg, 3);
  out.line = LineField<3>(std::move(gen));
  out.beta = std::move(beta);
  return out;
}

// ---------------------------------------------------------------------------
// Winding number of a line field along an ordered closed node loop, watched
// in the plane orthogonal to `axis` (axis 2 means the xy-plane). Directions
// are tracked modulo pi so half-integer windings are visible. Returns a
// multiple of 1/2.

template <std::size_t D>
double winding_number(const LineField<D>& line, const std::vector<index_t>& loop,
                      int axis = 2, const DegreeField* s_guard = nullptr,
                      double s_min = 1e-6) {
  if (loop.size() < 3) throw NumericalError("winding_number: loop too short");
  int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
  if constexpr (D == 2) {
    a1 = 0;
    a2 = 1;
  }
  auto angle_of = [&](index_t node) {
    const Vec<D>& v = line.n[node];
    double x = v[a1 % D], y = v[a2 % D];
    if (std::hypot(x, y) < 1e-10)
      throw NumericalError("winding_number: direction orthogonal to plane at node " +
                           std::to_string(node));
    return std::atan2(y, x);
  };
  if (s_guard) {
    for (index_t node : loop)
      if (std::abs(s_guard->s[node]) < s_min)
        throw NumericalError("winding_number: |s| below guard on loop at node " +
                             std::to_string(node));
  }
  const double pi = 3.14159265358979323846;
  double total = 0;
  double prev = angle_of(loop.front());
  for (std::size_t k = 1; k <= loop.size(); ++k) {
    double cur = angle_of(loop[k % loop.size()]);
    double d = cur - prev;
    // principal increment modulo pi, in (-pi/2, pi/2]
    while (d > pi / 2) d -= pi;
    while (d <= -pi / 2) d += pi;
    total += d;
    prev = cur;
  }
  double w = total / (2.0 * pi);
  // snap to the nearest half integer
  return std::round(w * 2.0) / 2.0;
}

template <std::size_t D>
double winding_number(const DirectorField<D>& dir, const std::vector<index_t>& loop,
                      int axis = 2, const DegreeField* s_guard = nullptr,
                      double s_min = 1e-6) {
  return winding_number(LineField<D>::from_director(dir), loop, axis, s_guard, s_min);
}

// ---------------------------------------------------------------------------
// Dirichlet data per boundary label: nodal values for s and the direction.

template <std::size_t D>
struct BoundaryData {
  // Nodes where s (resp. the director/line field) is pinned, with values.
  std::vector<char> s_fixed;       // size n_nodes
  std::vector<double> s_value;     // valid where s_fixed
  std::vector<char> dir_fixed;     // size n_nodes
  std::vector<Vec<D>> dir_value;   // unit vectors, valid where dir_fixed
  double c0 = 0.05;

  explicit BoundaryData(index_t n = 0)
      : s_fixed(n, 0), s_value(n, 0.0), dir_fixed(n, 0),
        dir_value(n, Vec<D>{}), c0(0.05) {}

  void apply(DegreeField& s, LineField<D>& line) const {
    for (index_t i = 0; i < (index_t)s.s.size(); ++i) {
      if (s_fixed[i]) s.s[i] = s_value[i];
      if (dir_fixed[i]) line.set_node(i, dir_value[i]);
    }
  }

  void apply(DegreeField& s, DirectorField<D>& dir) const {
    for (index_t i = 0; i < (index_t)s.s.size(); ++i) {
      if (s_fixed[i]) s.s[i] = s_value[i];
      if (dir_fixed[i]) dir.n[i] = normalized(dir_value[i]);
    }
  }

  // Directors must be pinned only where s is pinned, and prescribed values
  // must satisfy the structural conditions.
  void validate() const {
    for (std::size_t i = 0; i < s_fixed.size(); ++i) {
      if (dir_fixed[i] && !s_fixed[i])
        throw ConfigError("boundary data: direction pinned without s at node " +
                          std::to_string(i));
      if (dir_fixed[i] && std::abs(norm(dir_value[i]) - 1.0) > 1e-10)
        throw ConfigError("boundary data: non-unit direction at node " +
                          std::to_string(i));
    }
  }
};

}  // namespace nlc
