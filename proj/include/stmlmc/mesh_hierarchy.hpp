#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stmlmc/common.hpp"

namespace stmlmc {

/// Discretization parameters of one space-time level.
struct LevelSpec {
  int level_index = 0;
  int spatial_dim = 1;
  Index n_nodes = 0;
  Index n_elements = 0;
  double mesh_size = 0.0; ///< extent / cells_per_dim
  Index n_timesteps = 0;
  double dt = 0.0; ///< end_time / n_timesteps
  double end_time = 0.0;
  Index cells_per_dim = 0;
  double extent = 0.0;

  std::size_t spacetime_size() const {
    return static_cast<std::size_t>(n_nodes) * static_cast<std::size_t>(n_timesteps);
  }
};

/// Simplicial mesh of one level on the structured grid [0, extent]^d.
///
/// Nodes are numbered lexicographically (x fastest). Each grid cell is split
/// into d! simplices along coordinate-ordered paths (Kuhn subdivision), which
/// keeps uniformly refined meshes nested.
struct LevelMesh {
  LevelSpec spec;
  std::vector<Point> nodes;
  std::vector<std::array<Index, 3>> lattice;    ///< integer grid index per node
  std::vector<std::array<Index, 4>> elements;   ///< first d+1 entries used
  /// For level l > 0: node of this level coinciding with each node of level l-1.
  std::vector<Index> parent_node_map;

  int dim() const { return spec.spatial_dim; }
  Index n_nodes() const { return spec.n_nodes; }
  Index n_elements() const { return spec.n_elements; }
  int vertices_per_element() const { return spec.spatial_dim + 1; }

  Index node_at(const std::array<Index, 3>& ijk) const;
  double element_volume(Index e) const;
  double domain_volume() const;
};

/// Nested levels ordered coarse to fine.
struct MeshHierarchy {
  std::vector<LevelMesh> levels;

  int dim() const { return levels.front().dim(); }
  int finest() const { return static_cast<int>(levels.size()) - 1; }
  const LevelMesh& level(int l) const { return levels.at(static_cast<std::size_t>(l)); }

  /// For every node of `coarse`, the coinciding node on level `fine` >= coarse.
  std::vector<Index> injection_map(int coarse, int fine) const;
};

/// Largest space-time system (n*m) accepted by build_hierarchy.
inline constexpr std::size_t kMaxSpaceTimeSize = 200'000'000;

MeshHierarchy build_hierarchy(int dim, int finest_level, int base_elements_per_dim,
                              double domain_extent, double end_time, int base_timesteps);

/// Checks parent maps (coordinate distance <= 1e-12) and that every fine
/// element lies inside exactly one coarse element with matching volumes.
bool verify_nesting(const MeshHierarchy& hierarchy);

/// Legacy-VTK ASCII unstructured grid, optionally with one point-data field.
void write_vtk(std::ostream& out, const LevelMesh& mesh, std::span<const double> point_data = {},
               const std::string& field_name = "u", const std::string& title = "stmlmc mesh");

} // namespace stmlmc
