#pragma once

#include <span>
#include <vector>

#include "stmlmc/linear_solvers.hpp"
#include "stmlmc/mesh_hierarchy.hpp"
#include "stmlmc/sparse.hpp"

namespace stmlmc {

/// Cubic FitzHugh-Nagumo current I_ion(u) = alpha (u - u_rest)(u - u_th)(u - u_peak).
/// alpha = 0 gives the linear heat equation.
struct IonModel {
  double alpha = 0.0;
  double u_rest = 0.0;
  double u_th = 28.0;
  double u_peak = 115.0;

  bool linear() const { return alpha == 0.0; }
  void validate() const;
  double current(double u) const { return alpha * (u - u_rest) * (u - u_th) * (u - u_peak); }
  double derivative(double u) const;
};

/// Discrete solution [u_1; ...; u_m] of one level, time-major.
struct SpaceTimeField {
  int level = 0;
  Index n = 0;
  Index m = 0;
  std::vector<double> values;

  SpaceTimeField() = default;
  SpaceTimeField(int level, Index n, Index m, double fill = 0.0)
      : level(level), n(n), m(m), values(static_cast<std::size_t>(n) * m, fill) {}

  std::span<double> block(Index k) { return {values.data() + static_cast<std::size_t>(k) * n, static_cast<std::size_t>(n)}; }
  std::span<const double> block(Index k) const {
    return {values.data() + static_cast<std::size_t>(k) * n, static_cast<std::size_t>(n)};
  }
};

struct SystemOptions {
  /// Homogeneous Dirichlet on the boundary of the cube by row replacement.
  bool dirichlet = false;
  /// Nodal initial state u_0; empty means zero.
  std::vector<double> initial_state;
};

/// Block lower-bidiagonal Crank-Nicolson operator C with diagonal blocks
/// A = M + dt/2 K and sub-diagonal blocks B = -M + dt/2 K, the ionic model and
/// the load (with B u_0 already moved to the right-hand side).
class SpaceTimeSystem {
public:
  LevelSpec level;
  double dt = 0.0;
  SparseOperator A;
  SparseOperator B;
  SparseOperator mass;          ///< M_h
  SparseOperator reaction_mass; ///< M_h with Dirichlet rows removed
  IonModel ion;
  std::vector<double> load;
  std::vector<char> dirichlet_rows;

  Index n() const { return level.n_nodes; }
  Index m() const { return level.n_timesteps; }
  std::size_t size() const { return level.spacetime_size(); }

  /// y = C u, block by block.
  void apply(std::span<const double> u, std::span<double> y) const;
  /// Global sparse C (ion ignored) or J(u) when u is given and ion is nonlinear.
  SparseOperator assemble(std::span<const double> u = {}) const;
};

SpaceTimeSystem build_system(const LevelMesh& mesh, const SparseOperator& mass, const SparseOperator& stiffness,
                             const IonModel& ion, std::vector<double> load, const SystemOptions& options = {});

/// Assembles mass and stiffness for the nodal diffusion field first.
SpaceTimeSystem build_system(const LevelMesh& mesh, std::span<const double> g_nodal, const IonModel& ion,
                             std::vector<double> load, const SystemOptions& options = {});

/// r(u), block k = dt M I_ion(u_k).
std::vector<double> ionic_residual(const SpaceTimeSystem& sys, std::span<const double> u);
/// C u + r(u) - f
std::vector<double> residual(const SpaceTimeSystem& sys, std::span<const double> u);
/// J(u) = C + dt blockdiag(M diag(I_ion'(u_k)))
SparseOperator jacobian(const SpaceTimeSystem& sys, std::span<const double> u);

struct SolverOptions {
  double newton_tol = 1e-10;
  double gmres_rtol = 1e-10;
  int max_newton = 30;
  int max_halvings = 10;
  int gmres_restart = 30;
  int gmres_max_iterations = 3000;
  /// Number of contiguous time chunks for block-Jacobi ILU(0); 1 = global ILU(0).
  int time_partitions = 1;
};

struct SolveStats {
  int newton_iterations = 0;
  std::vector<int> gmres_iterations;
  std::vector<double> residual_norms; ///< initial residual, then after each accepted step
  double seconds = 0.0;

  int total_gmres_iterations() const;
};

/// Newton with step halving; each linear step is ILU(0)-preconditioned GMRES.
/// Stops when ||C u + r(u) - f|| <= newton_tol * max(1, ||f||) and, after at
/// least one step, the last update satisfies ||du||_inf <= newton_tol * max(1, ||u||_inf).
SpaceTimeField newton_solve(const SpaceTimeSystem& sys, const SpaceTimeField& u_init, const SolverOptions& options,
                            SolveStats* stats = nullptr);

/// Forward substitution in time with a damped scalar Newton per step and a
/// sparse direct solver for each step's linear system.
SpaceTimeField sequential_solve(const SpaceTimeSystem& sys, const SolverOptions& options = {},
                                SolveStats* stats = nullptr);

} // namespace stmlmc
