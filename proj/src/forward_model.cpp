#include "stmlmc/forward_model.hpp"

namespace stmlmc {

ForwardModel::ForwardModel(const MeshHierarchy& hierarchy, const KLExpansion& kl, const ProblemSpec& problem)
    : hierarchy_(&hierarchy), kl_(&kl), problem_(problem) {
  problem_.ion.validate();
  if (problem_.forcing == ForcingKind::stimulus) problem_.stimulus.validate();
  const int d = hierarchy.dim();
  const LoadFunction load = problem_.forcing == ForcingKind::stimulus
                                ? LoadFunction(problem_.stimulus)
                                : cosine_forcing(problem_.forcing_amplitude, hierarchy.level(0).spec.extent, d);
  levels_.reserve(static_cast<std::size_t>(hierarchy.finest()) + 1);
  for (int l = 0; l <= hierarchy.finest(); ++l) {
    const LevelMesh& mesh = hierarchy.level(l);
    SparseOperator mass = assemble_mass(mesh);
    std::vector<double> f = assemble_load(mesh, mass, load);
    levels_.push_back(LevelData{std::move(mass), StiffnessAssembler(mesh), std::move(f), {}});
  }
  const std::vector<double> y0(static_cast<std::size_t>(kl.dimension()), 0.0);
  for (int l = 0; l <= hierarchy.finest(); ++l) {
    const SpaceTimeSystem sys = system(l, kl.realize(y0, l));
    const LevelSpec& spec = hierarchy.level(l).spec;
    levels_[l].warm = problem_.method == SolverMethod::sequential
                          ? sequential_solve(sys, problem_.solver)
                          : newton_solve(sys, SpaceTimeField(l, spec.n_nodes, spec.n_timesteps), problem_.solver);
  }
}

SpaceTimeSystem ForwardModel::system(int level, std::span<const double> g_nodal) const {
  const LevelData& data = levels_.at(static_cast<std::size_t>(level));
  return build_system(hierarchy_->level(level), data.mass, data.stiffness.assemble(g_nodal), problem_.ion, data.load);
}

SpaceTimeField ForwardModel::solve(int level, std::span<const double> y, SolveStats* stats) const {
  const SpaceTimeSystem sys = system(level, kl_->realize(y, level));
  if (problem_.method == SolverMethod::sequential) return sequential_solve(sys, problem_.solver, stats);
  const LevelSpec& spec = hierarchy_->level(level).spec;
  const SpaceTimeField start =
      problem_.warm_start ? unperturbed(level) : SpaceTimeField(level, spec.n_nodes, spec.n_timesteps);
  return newton_solve(sys, start, problem_.solver, stats);
}

SpaceTimeField ForwardModel::solve_from(int level, std::span<const double> y, const SpaceTimeField& initial,
                                        SolveStats* stats) const {
  const SpaceTimeSystem sys = system(level, kl_->realize(y, level));
  return newton_solve(sys, initial, problem_.solver, stats);
}

} // namespace stmlmc
