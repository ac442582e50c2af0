#include "stmlmc/spacetime_solver.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "stmlmc/fem_assembly.hpp"

namespace stmlmc {

void IonModel::validate() const {
  if (alpha < 0.0) throw ConfigError("ion.alpha must be non-negative");
  if (alpha > 0.0 && !(u_rest < u_th && u_th < u_peak))
    throw ConfigError("ion potentials must satisfy u_rest < u_th < u_peak");
}

double IonModel::derivative(double u) const {
  const double a = u - u_rest, b = u - u_th, c = u - u_peak;
  return alpha * (a * b + a * c + b * c);
}

int SolveStats::total_gmres_iterations() const {
  return std::accumulate(gmres_iterations.begin(), gmres_iterations.end(), 0);
}

void SpaceTimeSystem::apply(std::span<const double> u, std::span<double> y) const {
  const std::size_t nn = static_cast<std::size_t>(n());
  for (Index k = 0; k < m(); ++k) {
    auto yk = y.subspan(k * nn, nn);
    A.multiply(u.subspan(k * nn, nn), yk);
    if (k > 0) B.multiply_add(u.subspan((k - 1) * nn, nn), yk);
  }
}

SparseOperator SpaceTimeSystem::assemble(std::span<const double> u) const {
  const Index nn = n(), mm = m();
  const bool with_ion = !u.empty() && !ion.linear();
  const auto arp = A.row_offsets(), aci = A.column_indices();
  const auto brp = B.row_offsets(), bci = B.column_indices();
  const auto av = A.values(), bv = B.values(), mv = reaction_mass.values();

  std::vector<Index> offsets(static_cast<std::size_t>(nn) * mm + 1, 0);
  std::vector<Index> columns;
  std::vector<double> values;
  const std::size_t total = static_cast<std::size_t>(mm) * A.nnz() + static_cast<std::size_t>(mm - 1) * B.nnz();
  columns.reserve(total);
  values.reserve(total);
  std::vector<double> dI(static_cast<std::size_t>(nn));
  for (Index k = 0; k < mm; ++k) {
    if (with_ion)
      for (Index j = 0; j < nn; ++j) dI[j] = dt * ion.derivative(u[static_cast<std::size_t>(k) * nn + j]);
    for (Index i = 0; i < nn; ++i) {
      if (k > 0)
        for (Index p = brp[i]; p < brp[i + 1]; ++p) {
          columns.push_back((k - 1) * nn + bci[p]);
          values.push_back(bv[p]);
        }
      for (Index p = arp[i]; p < arp[i + 1]; ++p) {
        columns.push_back(k * nn + aci[p]);
        values.push_back(with_ion ? av[p] + mv[p] * dI[aci[p]] : av[p]);
      }
      offsets[static_cast<std::size_t>(k) * nn + i + 1] = static_cast<Index>(columns.size());
    }
  }
  return SparseOperator(nn * mm, nn * mm, std::move(offsets), std::move(columns), std::move(values));
}

SpaceTimeSystem build_system(const LevelMesh& mesh, const SparseOperator& mass, const SparseOperator& stiffness,
                             const IonModel& ion, std::vector<double> load, const SystemOptions& options) {
  ion.validate();
  const Index n = mesh.n_nodes();
  if (mass.rows() != n || stiffness.rows() != n) throw ConfigError("build_system: operator size mismatch");
  if (load.size() != mesh.spec.spacetime_size()) throw ConfigError("build_system: load vector has wrong length");
  if (!options.initial_state.empty() && static_cast<Index>(options.initial_state.size()) != n)
    throw ConfigError("build_system: initial state has wrong length");

  SpaceTimeSystem sys;
  sys.level = mesh.spec;
  sys.dt = mesh.spec.dt;
  sys.ion = ion;
  sys.mass = mass;
  sys.A = add(1.0, mass, 0.5 * sys.dt, stiffness);
  sys.B = add(-1.0, mass, 0.5 * sys.dt, stiffness);
  sys.reaction_mass = add(1.0, mass, 0.0, stiffness);
  sys.load = std::move(load);
  sys.dirichlet_rows.assign(static_cast<std::size_t>(n), 0);

  if (options.dirichlet) {
    const int d = mesh.dim();
    const Index top = mesh.spec.cells_per_dim;
    for (Index i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c)
        if (mesh.lattice[i][c] == 0 || mesh.lattice[i][c] == top) sys.dirichlet_rows[i] = 1;
    auto zero_row = [](SparseOperator& op, Index i, bool unit_diagonal) {
      auto v = op.values();
      for (Index p = op.row_offsets()[i]; p < op.row_offsets()[i + 1]; ++p)
        v[p] = unit_diagonal && op.column_indices()[p] == i ? 1.0 : 0.0;
    };
    for (Index i = 0; i < n; ++i) {
      if (!sys.dirichlet_rows[i]) continue;
      zero_row(sys.A, i, true);
      zero_row(sys.B, i, false);
      zero_row(sys.reaction_mass, i, false);
      for (Index k = 0; k < mesh.spec.n_timesteps; ++k) sys.load[static_cast<std::size_t>(k) * n + i] = 0.0;
    }
  }
  if (!options.initial_state.empty()) sys.B.multiply_add(options.initial_state, std::span<double>(sys.load.data(), n), -1.0);
  return sys;
}

SpaceTimeSystem build_system(const LevelMesh& mesh, std::span<const double> g_nodal, const IonModel& ion,
                             std::vector<double> load, const SystemOptions& options) {
  return build_system(mesh, assemble_mass(mesh), assemble_stiffness(mesh, g_nodal), ion, std::move(load), options);
}

std::vector<double> ionic_residual(const SpaceTimeSystem& sys, std::span<const double> u) {
  std::vector<double> r(sys.size(), 0.0);
  if (sys.ion.linear()) return r;
  const std::size_t n = static_cast<std::size_t>(sys.n());
  std::vector<double> current(n);
  for (Index k = 0; k < sys.m(); ++k) {
    for (std::size_t i = 0; i < n; ++i) current[i] = sys.dt * sys.ion.current(u[k * n + i]);
    sys.reaction_mass.multiply(current, std::span<double>(r.data() + k * n, n));
  }
  return r;
}

std::vector<double> residual(const SpaceTimeSystem& sys, std::span<const double> u) {
  if (u.size() != sys.size()) throw ConfigError("residual: field size does not match the system");
  std::vector<double> r = ionic_residual(sys, u);
  std::vector<double> cu(sys.size());
  sys.apply(u, cu);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += cu[i] - sys.load[i];
  return r;
}

SparseOperator jacobian(const SpaceTimeSystem& sys, std::span<const double> u) {
  if (u.size() != sys.size()) throw ConfigError("jacobian: field size does not match the system");
  return sys.assemble(u);
}

namespace {

using Clock = std::chrono::steady_clock;

// Drops the sub-diagonal coupling at chunk boundaries so ILU(0) acts per chunk.
void decouple_time_chunks(const SpaceTimeSystem& sys, SparseOperator& J, int partitions) {
  const Index m = sys.m(), n = sys.n();
  partitions = std::min<int>(partitions, m);
  if (partitions <= 1) return;
  auto v = J.values();
  for (int c = 1; c < partitions; ++c) {
    const Index k = static_cast<Index>(static_cast<long long>(c) * m / partitions);
    for (Index i = 0; i < n; ++i) {
      const Index row = k * n + i;
      for (Index p = J.row_offsets()[row]; p < J.row_offsets()[row + 1]; ++p)
        if (J.column_indices()[p] < k * n) v[p] = 0.0;
    }
  }
}

} // namespace

SpaceTimeField newton_solve(const SpaceTimeSystem& sys, const SpaceTimeField& u_init, const SolverOptions& options,
                            SolveStats* stats) {
  const auto start = Clock::now();
  if (u_init.values.size() != sys.size())
    throw ConfigError("newton_solve: initial guess has " + std::to_string(u_init.values.size()) +
                      " values, system has " + std::to_string(sys.size()));
  SolveStats local;
  SolveStats& st = stats ? *stats : local;
  st = SolveStats{};

  SpaceTimeField u = u_init;
  u.level = sys.level.level_index;
  std::vector<double> R = residual(sys, u.values);
  double rn = norm2(R);
  const double target = options.newton_tol * std::max(1.0, norm2(sys.load));
  st.residual_norms.push_back(rn);

  auto max_abs = [](std::span<const double> v) {
    double a = 0.0;
    for (double x : v) a = std::max(a, std::abs(x));
    return a;
  };
  double last_update = 0.0;
  auto unconverged = [&] {
    if (rn > target) return true;
    return rn > 0.0 && st.newton_iterations > 0 && last_update > options.newton_tol * std::max(1.0, max_abs(u.values));
  };

  std::vector<double> delta(sys.size()), trial(sys.size()), rhs(sys.size());
  while (unconverged()) {
    if (st.newton_iterations >= options.max_newton)
      throw SolverError("Newton did not converge in " + std::to_string(options.max_newton) +
                            " iterations (residual " + std::to_string(rn) + ")",
                        rn);
    SparseOperator J = jacobian(sys, u.values);
    SparseOperator P = J;
    decouple_time_chunks(sys, P, options.time_partitions);
    const Ilu0 ilu(P);

    for (std::size_t i = 0; i < R.size(); ++i) rhs[i] = -R[i];
    std::fill(delta.begin(), delta.end(), 0.0);
    GmresOptions go;
    go.restart = options.gmres_restart;
    go.max_iterations = options.gmres_max_iterations;
    go.rtol = std::min(options.gmres_rtol, 0.5 * target / rn);
    go.atol = 0.0;
    const GmresResult gr = gmres(J, ilu, rhs, delta, go);
    st.gmres_iterations.push_back(gr.iterations);
    if (!gr.converged) {
      if (gr.stagnated)
        throw SolverError("GMRES stagnated over a restart cycle (relative residual " +
                              std::to_string(gr.residual_norm / gr.initial_residual_norm) +
                              "); use the sequential block solver instead",
                          rn);
      throw SolverError("GMRES reached its iteration limit", rn);
    }

    double step = 1.0;
    bool accepted = false;
    std::vector<double> R_trial;
    for (int h = 0; h <= options.max_halvings; ++h, step *= 0.5) {
      for (std::size_t i = 0; i < trial.size(); ++i) trial[i] = u.values[i] + step * delta[i];
      R_trial = residual(sys, trial);
      const double rt = norm2(R_trial);
      if (rt < rn) {
        accepted = true;
        rn = rt;
        break;
      }
    }
    if (!accepted) {
      if (rn <= target) break;
      throw SolverError("Newton step halving failed to reduce the residual", rn);
    }
    last_update = step * max_abs(delta);
    u.values.swap(trial);
    R.swap(R_trial);
    ++st.newton_iterations;
    st.residual_norms.push_back(rn);
  }
  st.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return u;
}

SpaceTimeField sequential_solve(const SpaceTimeSystem& sys, const SolverOptions& options, SolveStats* stats) {
  const auto start = Clock::now();
  SolveStats local;
  SolveStats& st = stats ? *stats : local;
  st = SolveStats{};

  const Index n = sys.n(), m = sys.m();
  const std::size_t nn = static_cast<std::size_t>(n);
  SpaceTimeField u(sys.level.level_index, n, m);
  std::vector<double> rhs(nn), g(nn), dI(nn), cur(nn), step(nn), trial(nn);
  const double tol = 1e-2 * options.newton_tol * std::max(1.0, norm2(sys.load)) / std::sqrt(static_cast<double>(m));

  SparseLuSolver lu;
  if (sys.ion.linear()) lu.factor(sys.A);

  auto step_residual = [&](std::span<const double> v, std::span<double> out) {
    sys.A.multiply(v, out);
    if (!sys.ion.linear()) {
      for (std::size_t i = 0; i < nn; ++i) cur[i] = sys.dt * sys.ion.current(v[i]);
      sys.reaction_mass.multiply_add(cur, out);
    }
    for (std::size_t i = 0; i < nn; ++i) out[i] -= rhs[i];
  };

  for (Index k = 0; k < m; ++k) {
    std::copy_n(sys.load.begin() + k * nn, nn, rhs.begin());
    if (k > 0) sys.B.multiply_add(u.block(k - 1), rhs, -1.0);
    auto uk = u.block(k);

    if (sys.ion.linear()) {
      lu.solve(rhs, uk);
      ++st.newton_iterations;
      continue;
    }

    if (k > 0) std::copy(u.block(k - 1).begin(), u.block(k - 1).end(), uk.begin());
    step_residual(uk, g);
    double gn = norm2(g);
    for (int it = 0; gn > tol; ++it) {
      if (it >= options.max_newton)
        throw SolverError("time step " + std::to_string(k + 1) + ": Newton did not converge", gn);
      for (std::size_t i = 0; i < nn; ++i) dI[i] = sys.dt * sys.ion.derivative(uk[i]);
      SparseOperator J = sys.A;
      auto jv = J.values();
      const auto mv = sys.reaction_mass.values();
      for (Index i = 0; i < n; ++i)
        for (Index p = J.row_offsets()[i]; p < J.row_offsets()[i + 1]; ++p) jv[p] += mv[p] * dI[J.column_indices()[p]];
      lu.factor(J);
      for (std::size_t i = 0; i < nn; ++i) g[i] = -g[i];
      lu.solve(g, step);

      double damping = 1.0;
      bool accepted = false;
      double snorm = 0.0, unorm = 0.0;
      for (std::size_t i = 0; i < nn; ++i) {
        snorm = std::max(snorm, std::abs(step[i]));
        unorm = std::max(unorm, std::abs(uk[i]));
      }
      for (int h = 0; h <= options.max_halvings; ++h, damping *= 0.5) {
        for (std::size_t i = 0; i < nn; ++i) trial[i] = uk[i] + damping * step[i];
        step_residual(trial, g);
        const double tn = norm2(g);
        if (tn < gn) {
          gn = tn;
          accepted = true;
          break;
        }
      }
      ++st.newton_iterations;
      if (!accepted) {
        // Residual is at round-off level when a tiny full step cannot reduce it.
        if (snorm <= 1e-13 * std::max(1.0, unorm)) break;
        throw SolverError("time step " + std::to_string(k + 1) + ": step halving failed", gn);
      }
      std::copy(trial.begin(), trial.end(), uk.begin());
      if (snorm <= 1e-15 * std::max(1.0, unorm)) break;
    }
  }
  st.residual_norms.push_back(norm2(residual(sys, u.values)));
  st.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return u;
}

} // namespace stmlmc
