#include "stmlmc/level_transfer.hpp"

#include <cmath>
#include <string>

#include "stmlmc/fem_assembly.hpp"

namespace stmlmc {

SparseOperator spatial_interpolation(const LevelMesh& coarse, const LevelMesh& fine) {
  if (coarse.dim() != fine.dim() || fine.spec.cells_per_dim != 2 * coarse.spec.cells_per_dim ||
      coarse.spec.extent != fine.spec.extent)
    throw MeshError("spatial_interpolation: levels " + std::to_string(coarse.spec.level_index) + " and " +
                    std::to_string(fine.spec.level_index) + " are not nested by uniform refinement");
  const int d = fine.dim();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(fine.n_nodes()) * 2);
  for (Index i = 0; i < fine.n_nodes(); ++i) {
    std::array<Index, 3> base{0, 0, 0}, step{0, 0, 0};
    bool odd = false;
    for (int k = 0; k < d; ++k) {
      base[k] = fine.lattice[i][k] / 2;
      step[k] = fine.lattice[i][k] % 2;
      odd = odd || step[k] != 0;
    }
    // Fine nodes off the coarse lattice are midpoints of the Kuhn edge base -> base + step.
    if (!odd) {
      t.push_back({i, coarse.node_at(base), 1.0});
    } else {
      std::array<Index, 3> other = base;
      for (int k = 0; k < d; ++k) other[k] += step[k];
      t.push_back({i, coarse.node_at(base), 0.5});
      t.push_back({i, coarse.node_at(other), 0.5});
    }
  }
  return SparseOperator::from_triplets(fine.n_nodes(), coarse.n_nodes(), std::move(t));
}

SpatialProjection::SpatialProjection(const SparseOperator& interpolation, const SparseOperator& coarse_mass,
                                     const SparseOperator& fine_mass, ProjectionMode mode)
    : mode_(mode) {
  const SparseOperator IT = interpolation.transpose();
  // I_h^T M_f assembled row by row.
  std::vector<Triplet> t;
  std::vector<double> row(static_cast<std::size_t>(fine_mass.cols()), 0.0);
  std::vector<Index> touched;
  std::vector<char> mark(row.size(), 0);
  for (Index i = 0; i < IT.rows(); ++i) {
    for (Index p = IT.row_offsets()[i]; p < IT.row_offsets()[i + 1]; ++p) {
      const Index j = IT.column_indices()[p];
      for (Index q = fine_mass.row_offsets()[j]; q < fine_mass.row_offsets()[j + 1]; ++q) {
        const Index c = fine_mass.column_indices()[q];
        if (!mark[c]) {
          mark[c] = 1;
          touched.push_back(c);
        }
        row[c] += IT.values()[p] * fine_mass.values()[q];
      }
    }
    for (Index c : touched) {
      t.push_back({i, c, row[c]});
      row[c] = 0.0;
      mark[c] = 0;
    }
    touched.clear();
  }
  weighted_transpose_ = SparseOperator::from_triplets(IT.rows(), fine_mass.cols(), std::move(t));

  if (mode == ProjectionMode::exact) {
    coarse_solver_ = std::make_shared<CholeskySolver>(coarse_mass);
  } else {
    lumped_ = coarse_mass.row_sums();
    for (std::size_t i = 0; i < lumped_.size(); ++i)
      if (!(lumped_[i] > 0.0)) throw AssemblyError("lumped coarse mass is singular at node " + std::to_string(i));
  }
}

void SpatialProjection::apply(std::span<const double> fine, std::span<double> coarse) const {
  std::vector<double> b(coarse.size());
  weighted_transpose_.multiply(fine, b);
  if (mode_ == ProjectionMode::exact) {
    coarse_solver_->solve(b, coarse);
  } else {
    for (std::size_t i = 0; i < b.size(); ++i) coarse[i] = b[i] / lumped_[i];
  }
}

namespace {

void check_dyadic(Index m_fine, Index m_coarse) {
  if (m_coarse < 1 || m_fine != 2 * m_coarse)
    throw ConfigError("temporal transfer needs m_fine = 2 m_coarse (got " + std::to_string(m_fine) + ", " +
                      std::to_string(m_coarse) + ")");
}

} // namespace

SparseOperator temporal_restriction(Index m_fine, Index m_coarse) {
  check_dyadic(m_fine, m_coarse);
  std::vector<Triplet> t;
  for (Index j = 0; j < m_coarse; ++j) t.push_back({j, 2 * j + 1, 1.0});
  return SparseOperator::from_triplets(m_coarse, m_fine, std::move(t));
}

SparseOperator temporal_prolongation(Index m_fine, Index m_coarse, TemporalMode mode) {
  check_dyadic(m_fine, m_coarse);
  std::vector<Triplet> t;
  for (Index j = 0; j < m_coarse; ++j) {
    t.push_back({2 * j + 1, j, 1.0});
    if (j > 0) {
      t.push_back({2 * j, j - 1, 0.5});
      t.push_back({2 * j, j, 0.5});
    } else {
      t.push_back({0, 0, mode == TemporalMode::zero_initial ? 0.5 : 1.0});
    }
  }
  return SparseOperator::from_triplets(m_fine, m_coarse, std::move(t));
}

TransferPair::TransferPair(const MeshHierarchy& hierarchy, int fine_level, const TransferOptions& options)
    : coarse_level(fine_level - 1), fine_level(fine_level) {
  if (fine_level < 1 || fine_level > hierarchy.finest()) throw ConfigError("TransferPair: invalid fine level");
  const LevelMesh& c = hierarchy.level(coarse_level);
  const LevelMesh& f = hierarchy.level(fine_level);
  n_coarse = c.n_nodes();
  n_fine = f.n_nodes();
  m_coarse = c.spec.n_timesteps;
  m_fine = f.spec.n_timesteps;
  I_h = spatial_interpolation(c, f);
  P_h = SpatialProjection(I_h, assemble_mass(c), assemble_mass(f), options.projection);
  P_t = temporal_restriction(m_fine, m_coarse);
  I_t = temporal_prolongation(m_fine, m_coarse, options.temporal);
}

SpaceTimeField spacetime_apply(const TransferPair& pair, Direction direction, const SpaceTimeField& field) {
  const bool down = direction == Direction::restriction;
  const int expected = down ? pair.fine_level : pair.coarse_level;
  const Index n_in = down ? pair.n_fine : pair.n_coarse;
  const Index m_in = down ? pair.m_fine : pair.m_coarse;
  if (field.level != expected || field.n != n_in || field.m != m_in ||
      field.values.size() != static_cast<std::size_t>(n_in) * m_in)
    throw ConfigError("spacetime_apply: field on level " + std::to_string(field.level) + " does not match level " +
                      std::to_string(expected));

  const SparseOperator& T = down ? pair.P_t : pair.I_t;
  SpaceTimeField out(down ? pair.coarse_level : pair.fine_level, down ? pair.n_coarse : pair.n_fine,
                     down ? pair.m_coarse : pair.m_fine);

  // Spatial operator on each input block that some output block uses, then temporal weights.
  std::vector<char> needed(static_cast<std::size_t>(m_in), 0);
  for (Index c : T.column_indices()) needed[c] = 1;
  std::vector<std::vector<double>> mapped(static_cast<std::size_t>(m_in));
  for (Index k = 0; k < m_in; ++k) {
    if (!needed[k]) continue;
    mapped[k].resize(static_cast<std::size_t>(out.n));
    if (down)
      pair.P_h.apply(field.block(k), mapped[k]);
    else
      pair.I_h.multiply(field.block(k), mapped[k]);
  }
  for (Index r = 0; r < T.rows(); ++r) {
    auto dst = out.block(r);
    for (Index p = T.row_offsets()[r]; p < T.row_offsets()[r + 1]; ++p) {
      const auto& src = mapped[T.column_indices()[p]];
      const double w = T.values()[p];
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
    }
  }
  return out;
}

TransferChain::TransferChain(const MeshHierarchy& hierarchy, const TransferOptions& options) {
  for (int l = 1; l <= hierarchy.finest(); ++l) pairs_.emplace_back(hierarchy, l, options);
}

SpaceTimeField TransferChain::prolong_to(const SpaceTimeField& field, int level) const {
  if (level < field.level || level > finest()) throw ConfigError("prolong_to: invalid target level");
  SpaceTimeField current = field;
  for (int l = field.level + 1; l <= level; ++l) current = spacetime_apply(pair(l), Direction::prolongation, current);
  return current;
}

} // namespace stmlmc
