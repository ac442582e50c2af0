#pragma once

#include <memory>
#include <span>
#include <vector>

#include "stmlmc/linear_solvers.hpp"
#include "stmlmc/mesh_hierarchy.hpp"
#include "stmlmc/spacetime_solver.hpp"
#include "stmlmc/sparse.hpp"

namespace stmlmc {

/// Coarse-to-fine P1 interpolation I_h (n_f x n_c) on nested structured meshes.
/// Throws MeshError when `fine` is not the uniform refinement of `coarse`.
SparseOperator spatial_interpolation(const LevelMesh& coarse, const LevelMesh& fine);

enum class ProjectionMode { exact, lumped };

/// Fine-to-coarse L2 projection P_h = M_c^{-1} I_h^T M_f, or with M_c replaced
/// by its row-sum diagonal in lumped mode.
class SpatialProjection {
public:
  SpatialProjection() = default;
  SpatialProjection(const SparseOperator& interpolation, const SparseOperator& coarse_mass,
                    const SparseOperator& fine_mass, ProjectionMode mode);

  ProjectionMode mode() const { return mode_; }
  void apply(std::span<const double> fine, std::span<double> coarse) const;

private:
  ProjectionMode mode_ = ProjectionMode::exact;
  SparseOperator weighted_transpose_; ///< I_h^T M_f
  std::shared_ptr<CholeskySolver> coarse_solver_;
  std::vector<double> lumped_;
};

/// Temporal prolongation variants. Coarse and fine grids coincide at t = k dt_c,
/// k >= 1. The fine step before the first coincident step interpolates towards
/// u_0 = 0 in zero_initial mode and copies the first coarse value in
/// constant_extension mode.
enum class TemporalMode { zero_initial, constant_extension };

/// P_t (m_c x m_f): injection of fine steps 2, 4, ... (1-based).
SparseOperator temporal_restriction(Index m_fine, Index m_coarse);
/// I_t (m_f x m_c): copy at coinciding steps, average neighbours at new steps.
SparseOperator temporal_prolongation(Index m_fine, Index m_coarse, TemporalMode mode = TemporalMode::zero_initial);

struct TransferOptions {
  ProjectionMode projection = ProjectionMode::exact;
  TemporalMode temporal = TemporalMode::zero_initial;
};

/// Operators between consecutive levels l-1 (coarse) and l (fine).
struct TransferPair {
  int coarse_level = 0;
  int fine_level = 1;
  Index n_coarse = 0, n_fine = 0, m_coarse = 0, m_fine = 0;
  SparseOperator I_h;
  SpatialProjection P_h;
  SparseOperator P_t;
  SparseOperator I_t;

  TransferPair() = default;
  TransferPair(const MeshHierarchy& hierarchy, int fine_level, const TransferOptions& options = {});
};

enum class Direction { restriction, prolongation };

/// (P_t x P_h) or (I_t x I_h) applied block-wise without forming the Kronecker product.
SpaceTimeField spacetime_apply(const TransferPair& pair, Direction direction, const SpaceTimeField& field);

/// All consecutive pairs of a hierarchy.
class TransferChain {
public:
  TransferChain() = default;
  TransferChain(const MeshHierarchy& hierarchy, const TransferOptions& options = {});

  int finest() const { return static_cast<int>(pairs_.size()); }
  /// Pair between levels l-1 and l.
  const TransferPair& pair(int l) const { return pairs_.at(static_cast<std::size_t>(l - 1)); }
  /// Repeated prolongation from field.level to `level`.
  SpaceTimeField prolong_to(const SpaceTimeField& field, int level) const;

private:
  std::vector<TransferPair> pairs_;
};

} // namespace stmlmc
