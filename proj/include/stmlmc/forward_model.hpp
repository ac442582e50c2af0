#pragma once

#include <span>
#include <vector>

#include "stmlmc/fem_assembly.hpp"
#include "stmlmc/mesh_hierarchy.hpp"
#include "stmlmc/random_field.hpp"
#include "stmlmc/spacetime_solver.hpp"

namespace stmlmc {

enum class ForcingKind { stimulus, cosine };
enum class SolverMethod { monolithic, sequential };

struct ProblemSpec {
  IonModel ion;
  ForcingKind forcing = ForcingKind::stimulus;
  StimulusSpec stimulus;
  double forcing_amplitude = 1.0; ///< cosine forcing only
  SolverMethod method = SolverMethod::monolithic;
  SolverOptions solver;
  /// Start Newton from the y = 0 solution of the same level.
  bool warm_start = true;
};

/// Parameter-to-solution map y -> u_l(y) on every level of a hierarchy. Mass
/// matrices, stiffness scatter tables, loads and the unperturbed solutions are
/// cached at construction; solve() is const and safe to call concurrently.
class ForwardModel {
public:
  ForwardModel(const MeshHierarchy& hierarchy, const KLExpansion& kl, const ProblemSpec& problem);

  const MeshHierarchy& hierarchy() const { return *hierarchy_; }
  const KLExpansion& kl() const { return *kl_; }
  const ProblemSpec& problem() const { return problem_; }
  int finest() const { return hierarchy_->finest(); }

  SpaceTimeSystem system(int level, std::span<const double> g_nodal) const;
  SpaceTimeField solve(int level, std::span<const double> y, SolveStats* stats = nullptr) const;
  /// Monolithic Newton from an explicit initial guess (ignores `method`).
  SpaceTimeField solve_from(int level, std::span<const double> y, const SpaceTimeField& initial,
                            SolveStats* stats = nullptr) const;
  const SpaceTimeField& unperturbed(int level) const { return levels_.at(static_cast<std::size_t>(level)).warm; }
  const SparseOperator& mass(int level) const { return levels_.at(static_cast<std::size_t>(level)).mass; }

private:
  struct LevelData {
    SparseOperator mass;
    StiffnessAssembler stiffness;
    std::vector<double> load;
    SpaceTimeField warm;
  };

  const MeshHierarchy* hierarchy_;
  const KLExpansion* kl_;
  ProblemSpec problem_;
  std::vector<LevelData> levels_;
};

} // namespace stmlmc
