#include "stmlmc/fem_assembly.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace stmlmc {

namespace {

struct ElementGeometry {
  double volume = 0.0;
  std::array<std::array<double, 3>, 4> grad{}; ///< barycentric gradients
};

// Gradients of the barycentric functions from the inverse of the edge matrix.
ElementGeometry element_geometry(const LevelMesh& mesh, Index e) {
  const int d = mesh.dim();
  const auto& el = mesh.elements[e];
  const Point& x0 = mesh.nodes[el[0]];
  double J[3][3] = {};
  for (int k = 0; k < d; ++k)
    for (int c = 0; c < d; ++c) J[c][k] = mesh.nodes[el[k + 1]][c] - x0[c];

  ElementGeometry g;
  double inv[3][3] = {};
  double det = 0.0;
  if (d == 1) {
    det = J[0][0];
    inv[0][0] = 1.0 / det;
  } else if (d == 2) {
    det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    inv[0][0] = J[1][1] / det;
    inv[0][1] = -J[0][1] / det;
    inv[1][0] = -J[1][0] / det;
    inv[1][1] = J[0][0] / det;
  } else {
    det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
          J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
          J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
    inv[0][0] = (J[1][1] * J[2][2] - J[1][2] * J[2][1]) / det;
    inv[0][1] = (J[0][2] * J[2][1] - J[0][1] * J[2][2]) / det;
    inv[0][2] = (J[0][1] * J[1][2] - J[0][2] * J[1][1]) / det;
    inv[1][0] = (J[1][2] * J[2][0] - J[1][0] * J[2][2]) / det;
    inv[1][1] = (J[0][0] * J[2][2] - J[0][2] * J[2][0]) / det;
    inv[1][2] = (J[0][2] * J[1][0] - J[0][0] * J[1][2]) / det;
    inv[2][0] = (J[1][0] * J[2][1] - J[1][1] * J[2][0]) / det;
    inv[2][1] = (J[0][1] * J[2][0] - J[0][0] * J[2][1]) / det;
    inv[2][2] = (J[0][0] * J[1][1] - J[0][1] * J[1][0]) / det;
  }
  const double fact = d == 1 ? 1.0 : d == 2 ? 2.0 : 6.0;
  g.volume = std::abs(det) / fact;
  if (!(g.volume > 0.0)) throw AssemblyError("degenerate element " + std::to_string(e) + " (zero volume)");
  // grad lambda_k (k >= 1) is row k-1 of J^{-1}.
  for (int k = 0; k < d; ++k)
    for (int c = 0; c < d; ++c) {
      g.grad[k + 1][c] = inv[k][c];
      g.grad[0][c] -= inv[k][c];
    }
  return g;
}

std::vector<Triplet> mass_triplets(const LevelMesh& mesh) {
  const int d = mesh.dim();
  const int nloc = d + 1;
  // int_T lambda_i lambda_j = |T| (1 + delta_ij) / ((d+1)(d+2))
  const double denom = static_cast<double>((d + 1) * (d + 2));
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(mesh.n_elements()) * nloc * nloc);
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const double vol = element_geometry(mesh, e).volume;
    const auto& el = mesh.elements[e];
    for (int i = 0; i < nloc; ++i)
      for (int j = 0; j < nloc; ++j) t.push_back({el[i], el[j], vol * (i == j ? 2.0 : 1.0) / denom});
  }
  return t;
}

void check_positive(std::span<const double> g, Index n) {
  if (static_cast<Index>(g.size()) != n)
    throw AssemblyError("diffusion field has " + std::to_string(g.size()) + " values, mesh has " +
                        std::to_string(n) + " nodes");
  for (Index i = 0; i < n; ++i)
    if (!(g[i] > 0.0))
      throw EllipticityError("diffusion coefficient not positive at node " + std::to_string(i) +
                             " (value " + std::to_string(g[i]) + ")");
}

} // namespace

SparseOperator assemble_mass(const LevelMesh& mesh) {
  return SparseOperator::from_triplets(mesh.n_nodes(), mesh.n_nodes(), mass_triplets(mesh));
}

StiffnessAssembler::StiffnessAssembler(const LevelMesh& mesh)
    : mesh_(&mesh), nloc_(mesh.dim() + 1) {
  auto t = mass_triplets(mesh);
  for (auto& x : t) x.value = 0.0;
  pattern_ = SparseOperator::from_triplets(mesh.n_nodes(), mesh.n_nodes(), std::move(t));

  const int d = mesh.dim();
  local_.resize(static_cast<std::size_t>(mesh.n_elements()) * nloc_ * nloc_);
  scatter_.resize(local_.size());
  for (Index e = 0; e < mesh.n_elements(); ++e) {
    const auto geo = element_geometry(mesh, e);
    const auto& el = mesh.elements[e];
    const std::size_t base = static_cast<std::size_t>(e) * nloc_ * nloc_;
    for (int i = 0; i < nloc_; ++i)
      for (int j = 0; j < nloc_; ++j) {
        double dot = 0.0;
        for (int c = 0; c < d; ++c) dot += geo.grad[i][c] * geo.grad[j][c];
        local_[base + i * nloc_ + j] = geo.volume * dot;
        scatter_[base + i * nloc_ + j] = static_cast<Index>(pattern_.find(el[i], el[j]));
      }
  }
}

SparseOperator StiffnessAssembler::assemble(std::span<const double> g_nodal) const {
  check_positive(g_nodal, mesh_->n_nodes());
  SparseOperator K = pattern_;
  auto values = K.values();
  const std::size_t block = static_cast<std::size_t>(nloc_) * nloc_;
  for (Index e = 0; e < mesh_->n_elements(); ++e) {
    const auto& el = mesh_->elements[e];
    double gbar = 0.0;
    for (int i = 0; i < nloc_; ++i) gbar += g_nodal[el[i]];
    gbar /= nloc_;
    const std::size_t base = static_cast<std::size_t>(e) * block;
    for (std::size_t k = 0; k < block; ++k) values[scatter_[base + k]] += gbar * local_[base + k];
  }
  return K;
}

SparseOperator assemble_stiffness(const LevelMesh& mesh, std::span<const double> g_nodal) {
  return StiffnessAssembler(mesh).assemble(g_nodal);
}

void StimulusSpec::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("stimulus.sigma must be positive");
  if (!(t1 > 0.0)) throw ConfigError("stimulus.t1 must be positive");
}

double StimulusSpec::operator()(const Point& x, double t) const {
  // Grid times that equal t1 up to rounding count as switched off.
  if (t < 0.0 || t >= t1 * (1.0 - 1e-9)) return 0.0;
  double r2 = 0.0;
  for (int k = 0; k < 3; ++k) r2 += (x[k] - x0[k]) * (x[k] - x0[k]);
  return u_rest + u_peak * std::exp(-r2 / (sigma * sigma));
}

std::vector<double> assemble_load(const LevelMesh& mesh, const SparseOperator& mass,
                                  const LoadFunction& load) {
  const Index n = mesh.n_nodes();
  const Index m = mesh.spec.n_timesteps;
  const double dt = mesh.spec.dt;
  std::vector<double> f(mesh.spec.spacetime_size(), 0.0);
  std::vector<double> nodal(n);
  std::vector<double> previous(n), current(n);

  auto load_at = [&](double t, std::vector<double>& out) {
    bool any = false;
    for (Index i = 0; i < n; ++i) {
      nodal[i] = load(mesh.nodes[i], t);
      any = any || nodal[i] != 0.0;
    }
    if (any)
      mass.multiply(nodal, out);
    else
      std::fill(out.begin(), out.end(), 0.0);
  };

  load_at(0.0, previous);
  for (Index k = 0; k < m; ++k) {
    load_at(dt * static_cast<double>(k + 1), current);
    double* fk = f.data() + static_cast<std::size_t>(k) * n;
    for (Index i = 0; i < n; ++i) fk[i] = 0.5 * dt * (current[i] + previous[i]);
    std::swap(previous, current);
  }
  return f;
}

std::vector<double> assemble_stimulus(const LevelMesh& mesh, const StimulusSpec& stimulus) {
  stimulus.validate();
  return assemble_load(mesh, assemble_mass(mesh), stimulus);
}

LoadFunction cosine_forcing(double amplitude, double extent, int dim) {
  return [=](const Point& x, double) {
    double p = 1.0;
    for (int k = 0; k < dim; ++k) p *= std::cos(std::numbers::pi * x[k] / extent);
    return amplitude * (1.0 + p);
  };
}

} // namespace stmlmc
