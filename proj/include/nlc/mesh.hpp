#pragma once

// Simplicial meshes, weakly-acute structured generators, the plain-text
// mesh format, and the edge-weight graph k_ij = -int grad(phi_i).grad(phi_j)
// that every discrete energy in this library is built on.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nlc/core.hpp"

namespace nlc {

template <std::size_t D>
struct SimplicialMesh {
  static constexpr std::size_t dim = D;
  std::vector<Vec<D>> vertices;
  std::vector<std::array<index_t, D + 1>> cells;
  struct BFacet {
    std::array<index_t, D> nodes;
    std::string label;
  };
  std::vector<BFacet> boundary_facets;
  // Union of incident boundary facet labels, per vertex.
  std::vector<std::set<std::string>> node_labels;

  index_t n_vertices() const { return (index_t)vertices.size(); }
  index_t n_cells() const { return (index_t)cells.size(); }

  bool node_has_label(index_t i, const std::string& l) const {
    return node_labels[i].count(l) > 0;
  }

  double cell_signed_volume(index_t c) const {
    const auto& cell = cells[c];
    Mat<D> e;
    for (int k = 0; k < D; ++k)
      for (int j = 0; j < D; ++j)
        e[j][k] = vertices[cell[k + 1]][j] - vertices[cell[0]][j];
    if constexpr (D == 2) {
      return 0.5 * (e[0][0] * e[1][1] - e[0][1] * e[1][0]);
    } else {
      double det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1]) -
                   e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0]) +
                   e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
      return det / 6.0;
    }
  }

  double cell_volume(index_t c) const { return std::abs(cell_signed_volume(c)); }

  // Gradients of the barycentric (hat) functions on a cell; constant per cell.
  std::array<Vec<D>, D + 1> cell_grads(index_t c) const {
    const auto& cell = cells[c];
    Mat<D> e;  // columns are edge vectors from vertex 0
    for (int k = 0; k < D; ++k)
      for (int j = 0; j < D; ++j)
        e[j][k] = vertices[cell[k + 1]][j] - vertices[cell[0]][j];
    Mat<D> inv = invert(e);
    std::array<Vec<D>, D + 1> g;
    g[0] = vec_zero<D>();
    for (int k = 0; k < D; ++k) {
      for (int j = 0; j < D; ++j) g[k + 1][j] = inv[k][j];
      g[0] = g[0] - g[k + 1];
    }
    return g;
  }

  double max_cell_diameter() const {
    double h = 0;
    for (index_t c = 0; c < n_cells(); ++c) {
      for (int a = 0; a <= D; ++a)
        for (int b = a + 1; b <= D; ++b)
          h = std::max(h, norm(vertices[cells[c][a]] - vertices[cells[c][b]]));
    }
    return h;
  }

  double domain_volume() const {
    double v = 0;
    for (index_t c = 0; c < n_cells(); ++c) v += cell_volume(c);
    return v;
  }

  void rebuild_node_labels() {
    node_labels.assign(vertices.size(), {});
    for (const auto& f : boundary_facets)
      for (auto n : f.nodes) node_labels[n].insert(f.label);
  }

  std::vector<index_t> nodes_with_label(const std::string& l) const {
    std::vector<index_t> out;
    for (index_t i = 0; i < n_vertices(); ++i)
      if (node_has_label(i, l)) out.push_back(i);
    return out;
  }

  // Orientation fix plus conformity checks. Returns number of reoriented cells.
  int validate() {
    int flipped = 0;
    double vmax = 0;
    for (index_t c = 0; c < n_cells(); ++c) vmax = std::max(vmax, cell_volume(c));
    for (index_t c = 0; c < n_cells(); ++c) {
      double sv = cell_signed_volume(c);
      if (std::abs(sv) <= 1e-14 * std::max(vmax, 1.0))
        throw NumericalError("degenerate cell " + std::to_string(c));
      if (sv < 0) {
        std::swap(cells[c][0], cells[c][1]);
        ++flipped;
      }
    }
    // Every boundary facet must be a face of exactly one cell.
    std::map<std::vector<index_t>, int> face_count;
    for (index_t c = 0; c < n_cells(); ++c) {
      for (int skip = 0; skip <= D; ++skip) {
        std::vector<index_t> f;
        for (int a = 0; a <= D; ++a)
          if (a != skip) f.push_back(cells[c][a]);
        std::sort(f.begin(), f.end());
        face_count[f]++;
      }
    }
    for (const auto& bf : boundary_facets) {
      std::vector<index_t> f(bf.nodes.begin(), bf.nodes.end());
      std::sort(f.begin(), f.end());
      auto it = face_count.find(f);
      if (it == face_count.end())
        throw IoError("boundary facet not a face of any cell");
      if (it->second != 1)
        throw IoError("boundary facet shared by more than one cell");
    }
    rebuild_node_labels();
    return flipped;
  }

 private:
  static Mat<D> invert(const Mat<D>& m) {
    Mat<D> r;
    if constexpr (D == 2) {
      double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
      if (det == 0) throw NumericalError("singular cell map");
      r[0][0] = m[1][1] / det;
      r[0][1] = -m[0][1] / det;
      r[1][0] = -m[1][0] / det;
      r[1][1] = m[0][0] / det;
    } else {
      double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                   m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
      if (det == 0) throw NumericalError("singular cell map");
      r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
      r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
      r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
      r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
      r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
      r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
      r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
      r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
      r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    }
    return r;
  }
};

// ---------------------------------------------------------------------------
// StiffnessGraph: sparse symmetric edge weights k_ij (i<j) plus diagonal,
// with the partition-of-unity and weak-acuteness certificates.

struct StiffnessGraph {
  index_t n_nodes = 0;
  struct Edge {
    index_t i, j;  // i < j
    double k;
  };
  std::vector<Edge> edges;
  std::vector<double> diag;              // k_ii = -sum_j k_ij
  std::vector<std::vector<index_t>> adj; // incident edge ids per node
  bool row_sums_zero = false;
  bool weakly_acute = false;
  double max_abs_k = 0;
  double min_offdiag_k = 0;

  // int grad(z).grad(z) = 1/2 sum_ij k_ij (z_i - z_j)^2, as an edge sum.
  double dirichlet(const std::vector<double>& z) const {
    double s = 0;
    for (const auto& e : edges) s += e.k * sq(z[e.i] - z[e.j]);
    return s;
  }
};

template <std::size_t D>
StiffnessGraph build_stiffness(const SimplicialMesh<D>& mesh) {
  StiffnessGraph g;
  g.n_nodes = mesh.n_vertices();
  std::map<std::pair<index_t, index_t>, double> acc;

  // Fixed chunking keeps the merge order independent of the thread count.
  const index_t nc = mesh.n_cells();
  const index_t chunk = 4096;
  const index_t nchunks = (nc + chunk - 1) / chunk;
  std::vector<std::map<std::pair<index_t, index_t>, double>> partial(nchunks);
  parallel_for(nchunks, [&](index_t cb, index_t ce) {
    for (index_t ci = cb; ci < ce; ++ci) {
      auto& local = partial[ci];
      for (index_t c = ci * chunk; c < std::min(nc, (ci + 1) * chunk); ++c) {
        double vol = mesh.cell_volume(c);
        if (vol <= 0)
          throw NumericalError("degenerate cell " + std::to_string(c));
        auto grads = mesh.cell_grads(c);
        for (int a = 0; a <= D; ++a) {
          for (int b = a + 1; b <= D; ++b) {
            index_t i = mesh.cells[c][a], j = mesh.cells[c][b];
            double kij = -vol * dot(grads[a], grads[b]);
            auto key = std::minmax(i, j);
            local[{key.first, key.second}] += kij;
          }
        }
      }
    }
  });
  for (const auto& p : partial)
    for (const auto& [key, v] : p) acc[key] += v;

  g.diag.assign(g.n_nodes, 0.0);
  g.adj.assign(g.n_nodes, {});
  g.edges.reserve(acc.size());
  double maxabs = 0, minoff = 0;
  for (const auto& [key, k] : acc) {
    StiffnessGraph::Edge e{key.first, key.second, k};
    g.adj[e.i].push_back((index_t)g.edges.size());
    g.adj[e.j].push_back((index_t)g.edges.size());
    g.edges.push_back(e);
    g.diag[e.i] -= k;
    g.diag[e.j] -= k;
    maxabs = std::max(maxabs, std::abs(k));
    minoff = std::min(minoff, k);
  }
  maxabs = std::max(maxabs, 1e-300);
  g.max_abs_k = maxabs;
  g.min_offdiag_k = minoff;
  // Row sums of the full matrix (diagonal included) vanish by construction;
  // certify against accumulated roundoff.
  std::vector<double> rs(g.n_nodes, 0.0);
  for (const auto& e : g.edges) {
    rs[e.i] += e.k;
    rs[e.j] += e.k;
  }
  double worst = 0;
  for (index_t i = 0; i < g.n_nodes; ++i)
    worst = std::max(worst, std::abs(rs[i] + g.diag[i]));
  g.row_sums_zero = worst <= 1e-12 * maxabs;
  g.weakly_acute = minoff >= -1e-14 * maxabs;
  return g;
}

struct AcutenessReport {
  bool weakly_acute = false;
  struct Violation {
    index_t i, j;
    double k;            // offending negative weight
    double angle_sum;    // 2D only: opposite angle sum (radians), else NaN
  };
  std::vector<Violation> violations;
  double min_offdiag_k = 0;
  double max_abs_k = 0;
};

template <std::size_t D>
AcutenessReport check_weak_acuteness(const SimplicialMesh<D>& mesh) {
  StiffnessGraph g = build_stiffness(mesh);
  AcutenessReport rep;
  rep.weakly_acute = g.weakly_acute;
  rep.min_offdiag_k = g.min_offdiag_k;
  rep.max_abs_k = g.max_abs_k;
  double tol = -1e-14 * g.max_abs_k;

  std::map<std::pair<index_t, index_t>, double> angle_sums;
  if constexpr (D == 2) {
    for (index_t c = 0; c < mesh.n_cells(); ++c) {
      for (int a = 0; a < 3; ++a) {
        index_t p = mesh.cells[c][a];
        index_t q = mesh.cells[c][(a + 1) % 3];
        index_t r = mesh.cells[c][(a + 2) % 3];
        // angle at p, opposite to edge (q, r)
        Vec<2> u = mesh.vertices[q] - mesh.vertices[p];
        Vec<2> v = mesh.vertices[r] - mesh.vertices[p];
        double ang = std::acos(std::clamp(
            dot(u, v) / (norm(u) * norm(v)), -1.0, 1.0));
        auto key = std::minmax(q, r);
        angle_sums[{key.first, key.second}] += ang;
      }
    }
  }
  for (const auto& e : g.edges) {
    if (e.k < tol) {
      AcutenessReport::Violation v{e.i, e.j, e.k,
                                   std::numeric_limits<double>::quiet_NaN()};
      if constexpr (D == 2) {
        auto it = angle_sums.find({e.i, e.j});
        if (it != angle_sums.end()) v.angle_sum = it->second;
      }
      rep.violations.push_back(v);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Structured weakly-acute generators.

// Each rectangle is split into 4 triangles about its centroid. Weak acuteness
// holds for square cells (opposite centroid angles sum to exactly pi).
inline SimplicialMesh<2> generate_crisscross_2d(index_t nx, index_t ny,
                                                const std::array<double, 4>& bbox) {
  if (nx < 1 || ny < 1) throw ConfigError("crisscross: nx, ny must be >= 1");
  SimplicialMesh<2> m;
  const double x0 = bbox[0], x1 = bbox[1], y0 = bbox[2], y1 = bbox[3];
  auto vid = [&](index_t i, index_t j) { return j * (nx + 1) + i; };
  for (index_t j = 0; j <= ny; ++j)
    for (index_t i = 0; i <= nx; ++i)
      m.vertices.push_back({x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny});
  index_t cbase = m.n_vertices();
  auto cid = [&](index_t i, index_t j) { return cbase + j * nx + i; };
  for (index_t j = 0; j < ny; ++j)
    for (index_t i = 0; i < nx; ++i)
      m.vertices.push_back({x0 + (x1 - x0) * (i + 0.5) / nx,
                            y0 + (y1 - y0) * (j + 0.5) / ny});
  for (index_t j = 0; j < ny; ++j) {
    for (index_t i = 0; i < nx; ++i) {
      index_t v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1),
              v11 = vid(i + 1, j + 1), vc = cid(i, j);
      m.cells.push_back({v00, v10, vc});
      m.cells.push_back({v10, v11, vc});
      m.cells.push_back({v11, v01, vc});
      m.cells.push_back({v01, v00, vc});
    }
  }
  for (index_t i = 0; i < nx; ++i) {
    m.boundary_facets.push_back({{vid(i, 0), vid(i + 1, 0)}, "bottom"});
    m.boundary_facets.push_back({{vid(i, ny), vid(i + 1, ny)}, "top"});
  }
  for (index_t j = 0; j < ny; ++j) {
    m.boundary_facets.push_back({{vid(0, j), vid(0, j + 1)}, "left"});
    m.boundary_facets.push_back({{vid(nx, j), vid(nx, j + 1)}, "right"});
  }
  m.validate();
  return m;
}

// Kuhn subdivision: each box is cut into 6 tetrahedra along the main
// diagonal. For cubic cells the tetrahedra are non-obtuse, hence the mesh
// is weakly acute.
inline SimplicialMesh<3> generate_kuhn_3d(index_t nx, index_t ny, index_t nz,
                                          const std::array<double, 6>& bbox) {
  if (nx < 1 || ny < 1 || nz < 1) throw ConfigError("kuhn: nx, ny, nz must be >= 1");
  SimplicialMesh<3> m;
  const double x0 = bbox[0], x1 = bbox[1], y0 = bbox[2], y1 = bbox[3],
               z0 = bbox[4], z1 = bbox[5];
  auto vid = [&](index_t i, index_t j, index_t k) {
    return (k * (ny + 1) + j) * (nx + 1) + i;
  };
  for (index_t k = 0; k <= nz; ++k)
    for (index_t j = 0; j <= ny; ++j)
      for (index_t i = 0; i <= nx; ++i)
        m.vertices.push_back({x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny,
                              z0 + (z1 - z0) * k / nz});
  // The 6 tets trace the permutations of unit steps from corner (0,0,0) to
  // (1,1,1); all share the main diagonal.
  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                  {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (index_t k = 0; k < nz; ++k) {
    for (index_t j = 0; j < ny; ++j) {
      for (index_t i = 0; i < nx; ++i) {
        for (const auto& p : perms) {
          std::array<index_t, 4> tet;
          index_t ci = i, cj = j, ck = k;
          tet[0] = vid(ci, cj, ck);
          for (int step = 0; step < 3; ++step) {
            if (p[step] == 0) ++ci;
            if (p[step] == 1) ++cj;
            if (p[step] == 2) ++ck;
            tet[step + 1] = vid(ci, cj, ck);
          }
          m.cells.push_back(tet);
        }
      }
    }
  }
  // Boundary faces: subdivide each boundary quad consistently with the Kuhn
  // pattern (diagonal from the low corner to the high corner of the face).
  auto add_face = [&](index_t a, index_t b, index_t c, index_t dd,
                      const std::string& label) {
    // quad a-b-d-c with a the low corner and dd the high corner
    m.boundary_facets.push_back({{a, b, dd}, label});
    m.boundary_facets.push_back({{a, dd, c}, label});
  };
  for (index_t j = 0; j < ny; ++j)
    for (index_t i = 0; i < nx; ++i) {
      add_face(vid(i, j, 0), vid(i + 1, j, 0), vid(i, j + 1, 0),
               vid(i + 1, j + 1, 0), "bottom");
      add_face(vid(i, j, nz), vid(i + 1, j, nz), vid(i, j + 1, nz),
               vid(i + 1, j + 1, nz), "top");
    }
  for (index_t k = 0; k < nz; ++k)
    for (index_t i = 0; i < nx; ++i) {
      add_face(vid(i, 0, k), vid(i + 1, 0, k), vid(i, 0, k + 1),
               vid(i + 1, 0, k + 1), "front");
      add_face(vid(i, ny, k), vid(i + 1, ny, k), vid(i, ny, k + 1),
               vid(i + 1, ny, k + 1), "back");
    }
  for (index_t k = 0; k < nz; ++k)
    for (index_t j = 0; j < ny; ++j) {
      add_face(vid(0, j, k), vid(0, j + 1, k), vid(0, j, k + 1),
               vid(0, j + 1, k + 1), "left");
      add_face(vid(nx, j, k), vid(nx, j + 1, k), vid(nx, j, k + 1),
               vid(nx, j + 1, k + 1), "right");
    }
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Plain-text mesh format.
//   header: dim n_vertices n_cells n_bfacets
//   vertex lines (d floats), cell lines (d+1 indices, 0-based),
//   boundary facet lines (d indices + label)
// Floats carry 17 significant digits so write/read round-trips bit exactly.

template <std::size_t D>
void write_mesh(const SimplicialMesh<D>& m, std::ostream& os) {
  os << D << " " << m.n_vertices() << " " << m.n_cells() << " "
     << m.boundary_facets.size() << "\n";
  char buf[32];
  for (const auto& v : m.vertices) {
    for (int k = 0; k < D; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", v[k]);
      os << (k ? " " : "") << buf;
    }
    os << "\n";
  }
  for (const auto& c : m.cells) {
    for (int k = 0; k <= D; ++k) os << (k ? " " : "") << c[k];
    os << "\n";
  }
  for (const auto& f : m.boundary_facets) {
    for (int k = 0; k < D; ++k) os << f.nodes[k] << " ";
    os << f.label << "\n";
  }
}

template <std::size_t D>
void write_mesh_file(const SimplicialMesh<D>& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open mesh file for writing: " + path);
  write_mesh(m, os);
}

inline int peek_mesh_dim(std::istream& is) {
  int d = 0;
  if (!(is >> d)) throw IoError("mesh: cannot read header");
  return d;
}

template <std::size_t D>
SimplicialMesh<D> read_mesh(std::istream& is) {
  int d;
  index_t nv, nc, nf;
  if (!(is >> d >> nv >> nc >> nf)) throw IoError("mesh: bad header");
  if (d != D) throw IoError("mesh: dimension mismatch");
  SimplicialMesh<D> m;
  m.vertices.resize(nv);
  for (index_t i = 0; i < nv; ++i)
    for (int k = 0; k < D; ++k)
      if (!(is >> m.vertices[i][k])) throw IoError("mesh: bad vertex line");
  m.cells.resize(nc);
  for (index_t i = 0; i < nc; ++i)
    for (int k = 0; k <= D; ++k) {
      if (!(is >> m.cells[i][k])) throw IoError("mesh: bad cell line");
      if (m.cells[i][k] < 0 || m.cells[i][k] >= nv)
        throw IoError("mesh: cell index out of range");
    }
  m.boundary_facets.resize(nf);
  for (index_t i = 0; i < nf; ++i) {
    for (int k = 0; k < D; ++k) {
      if (!(is >> m.boundary_facets[i].nodes[k]))
        throw IoError("mesh: bad facet line");
      if (m.boundary_facets[i].nodes[k] < 0 || m.boundary_facets[i].nodes[k] >= nv)
        throw IoError("mesh: facet index out of range");
    }
    if (!(is >> m.boundary_facets[i].label)) throw IoError("mesh: facet label");
  }
  m.validate();
  return m;
}

template <std::size_t D>
SimplicialMesh<D> read_mesh_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open mesh file: " + path);
  return read_mesh<D>(is);
}

// Loader for externally generated meshes around inclusions (e.g. a spherical
// hole labeled Gamma_i). Attaches an acuteness audit; arbitrary-domain acute
// meshing itself is out of scope.
template <std::size_t D>
struct LoadedMesh {
  SimplicialMesh<D> mesh;
  AcutenessReport audit;
};

template <std::size_t D>
LoadedMesh<D> load_mesh_with_audit(const std::string& path) {
  LoadedMesh<D> out;
  out.mesh = read_mesh_file<D>(path);
  out.audit = check_weak_acuteness(out.mesh);
  return out;
}

}  // namespace nlc
