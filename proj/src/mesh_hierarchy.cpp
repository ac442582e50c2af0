#include "stmlmc/mesh_hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace stmlmc {

namespace {

double determinant(const std::array<std::array<double, 3>, 3>& a, int d) {
  switch (d) {
  case 1:
    return a[0][0];
  case 2:
    return a[0][0] * a[1][1] - a[0][1] * a[1][0];
  default:
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  }
}

double factorial(int d) { return d == 1 ? 1.0 : d == 2 ? 2.0 : 6.0; }

// Edge matrix rows x_k - x_0 for k = 1..d.
std::array<std::array<double, 3>, 3> edge_matrix(const LevelMesh& mesh, Index e) {
  std::array<std::array<double, 3>, 3> a{};
  const auto& el = mesh.elements[e];
  const Point& x0 = mesh.nodes[el[0]];
  for (int k = 1; k <= mesh.dim(); ++k) {
    const Point& xk = mesh.nodes[el[k]];
    for (int c = 0; c < 3; ++c) a[k - 1][c] = xk[c] - x0[c];
  }
  return a;
}

LevelMesh build_level(int dim, int level, Index cells, double extent, double end_time, Index steps) {
  LevelMesh mesh;
  const Index pts = cells + 1;
  Index n_nodes = 1;
  Index n_cells = 1;
  for (int k = 0; k < dim; ++k) {
    n_nodes *= pts;
    n_cells *= cells;
  }
  const int simplices_per_cell = static_cast<int>(factorial(dim));

  LevelSpec& s = mesh.spec;
  s.level_index = level;
  s.spatial_dim = dim;
  s.n_nodes = n_nodes;
  s.n_elements = n_cells * simplices_per_cell;
  s.cells_per_dim = cells;
  s.extent = extent;
  s.mesh_size = extent / static_cast<double>(cells);
  s.n_timesteps = steps;
  s.end_time = end_time;
  s.dt = end_time / static_cast<double>(steps);

  mesh.nodes.resize(n_nodes);
  mesh.lattice.resize(n_nodes);
  for (Index id = 0; id < n_nodes; ++id) {
    std::array<Index, 3> ijk{0, 0, 0};
    Index rest = id;
    for (int k = 0; k < dim; ++k) {
      ijk[k] = rest % pts;
      rest /= pts;
    }
    mesh.lattice[id] = ijk;
    Point x{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k)
      x[k] = extent * static_cast<double>(ijk[k]) / static_cast<double>(cells);
    mesh.nodes[id] = x;
  }

  // Kuhn subdivision: one simplex per permutation of the axes, walking from
  // the lower cell corner along unit steps in permutation order.
  std::array<int, 3> perm{0, 1, 2};
  std::vector<std::array<int, 3>> perms;
  std::sort(perm.begin(), perm.begin() + dim);
  do {
    perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.begin() + dim));

  mesh.elements.reserve(s.n_elements);
  for (Index c = 0; c < n_cells; ++c) {
    std::array<Index, 3> corner{0, 0, 0};
    Index rest = c;
    for (int k = 0; k < dim; ++k) {
      corner[k] = rest % cells;
      rest /= cells;
    }
    for (const auto& p : perms) {
      std::array<Index, 4> el{0, 0, 0, 0};
      std::array<Index, 3> v = corner;
      el[0] = mesh.node_at(v);
      for (int k = 0; k < dim; ++k) {
        ++v[p[k]];
        el[k + 1] = mesh.node_at(v);
      }
      mesh.elements.push_back(el);
    }
  }
  return mesh;
}

} // namespace

Index LevelMesh::node_at(const std::array<Index, 3>& ijk) const {
  const Index pts = spec.cells_per_dim + 1;
  Index id = 0;
  for (int k = dim() - 1; k >= 0; --k) id = id * pts + ijk[k];
  return id;
}

double LevelMesh::element_volume(Index e) const {
  return std::abs(determinant(edge_matrix(*this, e), dim())) / factorial(dim());
}

double LevelMesh::domain_volume() const { return std::pow(spec.extent, dim()); }

std::vector<Index> MeshHierarchy::injection_map(int coarse, int fine) const {
  if (coarse > fine) throw MeshError("injection_map: coarse level above fine level");
  std::vector<Index> map(static_cast<std::size_t>(level(coarse).n_nodes()));
  std::iota(map.begin(), map.end(), Index{0});
  for (int l = coarse + 1; l <= fine; ++l) {
    const auto& parent = level(l).parent_node_map;
    for (auto& idx : map) idx = parent[idx];
  }
  return map;
}

MeshHierarchy build_hierarchy(int dim, int finest_level, int base_elements_per_dim,
                              double domain_extent, double end_time, int base_timesteps) {
  if (dim < 1 || dim > 3)
    throw ConfigError("build_hierarchy: spatial dimension must be 1, 2 or 3 (got " +
                      std::to_string(dim) + ")");
  if (finest_level < 0) throw ConfigError("build_hierarchy: number of levels must be >= 0");
  if (base_elements_per_dim < 1) throw ConfigError("build_hierarchy: base elements per dimension must be >= 1");
  if (base_timesteps < 1) throw ConfigError("build_hierarchy: base time steps must be >= 1");
  if (!(domain_extent > 0.0) || !(end_time > 0.0))
    throw ConfigError("build_hierarchy: domain extent and end time must be positive");

  // Size check on the finest level before allocating anything.
  {
    const double scale = std::ldexp(1.0, finest_level);
    const double cells = base_elements_per_dim * scale;
    const double nodes = std::pow(cells + 1.0, dim);
    const double steps = base_timesteps * scale;
    const double st = nodes * steps;
    if (cells > 1e9 || st > static_cast<double>(kMaxSpaceTimeSize)) {
      // Jacobian rows hold roughly 2*(3^d) entries (value + column index).
      const double nnz_per_row = 2.0 * std::pow(3.0, dim);
      const double bytes = st * (nnz_per_row * 12.0 + 8.0 * 40.0);
      std::ostringstream msg;
      msg << "build_hierarchy: level " << finest_level << " needs n*m = " << st
          << " space-time unknowns (limit " << kMaxSpaceTimeSize << "); estimated memory "
          << bytes / 1e9 << " GB";
      throw ConfigError(msg.str());
    }
  }

  MeshHierarchy h;
  for (int l = 0; l <= finest_level; ++l) {
    const Index cells = base_elements_per_dim << l;
    const Index steps = base_timesteps << l;
    h.levels.push_back(build_level(dim, l, cells, domain_extent, end_time, steps));
    if (l > 0) {
      const LevelMesh& coarse = h.levels[l - 1];
      LevelMesh& fine = h.levels.back();
      fine.parent_node_map.resize(coarse.n_nodes());
      for (Index i = 0; i < coarse.n_nodes(); ++i) {
        auto ijk = coarse.lattice[i];
        for (auto& v : ijk) v *= 2;
        fine.parent_node_map[i] = fine.node_at(ijk);
      }
    }
  }
  return h;
}

namespace {

// Barycentric coordinates of x in element e (d+1 values).
std::array<double, 4> barycentric(const LevelMesh& mesh, Index e, const Point& x) {
  const int d = mesh.dim();
  auto a = edge_matrix(mesh, e); // rows: edges
  const Point& x0 = mesh.nodes[mesh.elements[e][0]];
  // Solve sum_k lambda_k * edge_k = x - x0 by Cramer's rule on the transpose.
  std::array<std::array<double, 3>, 3> m{};
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m[r][c] = a[c][r];
  const double det = determinant(m, d);
  std::array<double, 4> lambda{0, 0, 0, 0};
  double sum = 0.0;
  for (int k = 0; k < d; ++k) {
    auto mk = m;
    for (int r = 0; r < d; ++r) mk[r][k] = x[r] - x0[r];
    lambda[k + 1] = determinant(mk, d) / det;
    sum += lambda[k + 1];
  }
  lambda[0] = 1.0 - sum;
  return lambda;
}

} // namespace

bool verify_nesting(const MeshHierarchy& hierarchy) {
  constexpr double tol = 1e-12;
  for (int l = 1; l <= hierarchy.finest(); ++l) {
    const LevelMesh& coarse = hierarchy.level(l - 1);
    const LevelMesh& fine = hierarchy.level(l);
    const int d = fine.dim();
    if (static_cast<Index>(fine.parent_node_map.size()) != coarse.n_nodes()) return false;

    std::vector<char> used(fine.n_nodes(), 0);
    for (Index i = 0; i < coarse.n_nodes(); ++i) {
      const Index f = fine.parent_node_map[i];
      if (f < 0 || f >= fine.n_nodes() || used[f]) return false;
      used[f] = 1;
      const Point& xc = coarse.nodes[i];
      const Point& xf = fine.nodes[f];
      double dist2 = 0.0;
      for (int k = 0; k < 3; ++k) dist2 += (xc[k] - xf[k]) * (xc[k] - xf[k]);
      if (std::sqrt(dist2) > tol) return false;
    }

    // Every fine element must sit inside one coarse element; the coarse
    // volumes must be exactly covered. The structured cell lookup only narrows
    // the search to the d! candidate simplices of one grid cell.
    const int per_cell = static_cast<int>(factorial(d));
    const double hc = coarse.spec.mesh_size;
    std::vector<double> covered(coarse.n_elements(), 0.0);
    for (Index e = 0; e < fine.n_elements(); ++e) {
      const auto& el = fine.elements[e];
      Point centroid{0, 0, 0};
      for (int v = 0; v <= d; ++v)
        for (int k = 0; k < d; ++k)
          centroid[k] += fine.nodes[el[v]][k] / (d + 1);
      Index cell = 0;
      Index stride = 1;
      for (int k = 0; k < d; ++k) {
        Index ck = static_cast<Index>(std::floor(centroid[k] / hc));
        ck = std::clamp<Index>(ck, 0, coarse.spec.cells_per_dim - 1);
        cell += ck * stride;
        stride *= coarse.spec.cells_per_dim;
      }
      Index owner = -1;
      for (int s = 0; s < per_cell && owner < 0; ++s) {
        const Index ce = cell * per_cell + s;
        bool inside = true;
        for (int v = 0; v <= d && inside; ++v) {
          const auto lam = barycentric(coarse, ce, fine.nodes[el[v]]);
          for (int k = 0; k <= d; ++k)
            if (lam[k] < -tol) inside = false;
        }
        if (inside) owner = ce;
      }
      if (owner < 0) return false;
      covered[owner] += fine.element_volume(e);
    }
    for (Index ce = 0; ce < coarse.n_elements(); ++ce) {
      const double vol = coarse.element_volume(ce);
      if (std::abs(covered[ce] - vol) > 1e-12 * std::max(1.0, vol)) return false;
    }
  }
  return true;
}

void write_vtk(std::ostream& out, const LevelMesh& mesh, std::span<const double> point_data,
               const std::string& field_name, const std::string& title) {
  if (!point_data.empty() && point_data.size() != static_cast<std::size_t>(mesh.n_nodes()))
    throw MeshError("write_vtk: " + std::to_string(point_data.size()) + " values for " +
                    std::to_string(mesh.n_nodes()) + " nodes");
  const int d = mesh.dim();
  out << "# vtk DataFile Version 3.0\n";
  std::string t = title;
  std::replace(t.begin(), t.end(), '\n', ' ');
  out << t.substr(0, 255) << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out.precision(17);
  out << "POINTS " << mesh.n_nodes() << " double\n";
  for (const auto& x : mesh.nodes) out << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
  const int nv = d + 1;
  out << "CELLS " << mesh.n_elements() << ' ' << mesh.n_elements() * (nv + 1) << '\n';
  for (const auto& el : mesh.elements) {
    out << nv;
    for (int v = 0; v < nv; ++v) out << ' ' << el[v];
    out << '\n';
  }
  const int cell_type = d == 1 ? 3 : d == 2 ? 5 : 10;
  out << "CELL_TYPES " << mesh.n_elements() << '\n';
  for (Index e = 0; e < mesh.n_elements(); ++e) out << cell_type << '\n';
  if (!point_data.empty()) {
    out << "POINT_DATA " << mesh.n_nodes() << "\nSCALARS " << field_name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : point_data) out << v << '\n';
  }
}

} // namespace stmlmc
