#pragma once

#include <functional>
#include <span>
#include <vector>

#include "stmlmc/mesh_hierarchy.hpp"
#include "stmlmc/sparse.hpp"

namespace stmlmc {

/// Consistent P1 mass matrix, exact integration on each simplex.
SparseOperator assemble_mass(const LevelMesh& mesh);

/// P1 stiffness matrix for the isotropic diffusion field given at the nodes.
/// Each element uses the average of its vertex values.
SparseOperator assemble_stiffness(const LevelMesh& mesh, std::span<const double> g_nodal);

/// Precomputes unit-coefficient element stiffness matrices and their scatter
/// positions so repeated assemblies for new diffusion fields are cheap. The
/// result shares the sparsity pattern of assemble_mass.
class StiffnessAssembler {
public:
  explicit StiffnessAssembler(const LevelMesh& mesh);

  SparseOperator assemble(std::span<const double> g_nodal) const;
  const SparseOperator& pattern() const { return pattern_; }

private:
  const LevelMesh* mesh_;
  SparseOperator pattern_;
  int nloc_;
  std::vector<double> local_;      ///< n_elements * nloc * nloc unit-G entries
  std::vector<Index> scatter_;     ///< value positions in pattern_
};

/// Gaussian applied-current pulse
///   I_app(x, t) = (u_rest + u_peak exp(-|x - x0|^2 / sigma^2)) on [0, t1).
struct StimulusSpec {
  Point x0{0.0, 0.0, 0.0};
  double sigma = 0.5;
  double t1 = 0.005;
  double u_rest = 0.0;
  double u_peak = 115.0;

  void validate() const;
  double operator()(const Point& x, double t) const;
};

using LoadFunction = std::function<double(const Point&, double)>;

/// Space-time load f with block k = dt/2 (F(t_{k+1}) + F(t_k)), k = 0..m-1,
/// where F(t) = M * (nodal interpolant of the load at time t).
std::vector<double> assemble_load(const LevelMesh& mesh, const SparseOperator& mass,
                                  const LoadFunction& load);

std::vector<double> assemble_stimulus(const LevelMesh& mesh, const StimulusSpec& stimulus);

/// Smooth forcing amplitude * (1 + prod_i cos(pi x_i / extent)), constant in
/// time; its normal derivative vanishes on the cube boundary.
LoadFunction cosine_forcing(double amplitude, double extent, int dim);

} // namespace stmlmc
