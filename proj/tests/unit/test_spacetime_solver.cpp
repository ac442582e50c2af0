#include <doctest.h>

#include <cmath>
#include <random>

#include "stmlmc/fem_assembly.hpp"
#include "stmlmc/spacetime_solver.hpp"

using namespace stmlmc;

namespace {

IonModel fhn() {
  IonModel ion;
  ion.alpha = 1.4e-3;
  return ion;
}

std::vector<double> varying_g(const LevelMesh& mesh, double g0) {
  std::vector<double> g;
  for (const auto& p : mesh.nodes) g.push_back(g0 * (1.0 + 0.3 * std::sin(3.0 * p[0] + p[1])));
  return g;
}

std::vector<double> stimulus_load(const LevelMesh& mesh) {
  StimulusSpec s;
  s.t1 = mesh.spec.dt;
  return assemble_stimulus(mesh, s);
}

double max_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

} // namespace

TEST_CASE("ion model current and derivative") {
  const IonModel ion = fhn();
  CHECK(ion.current(0.0) == 0.0);
  CHECK(ion.current(28.0) == 0.0);
  CHECK(ion.current(115.0) == 0.0);
  for (double u : {-10.0, 5.0, 60.0, 130.0}) {
    const double h = 1e-4;
    const double fd = (ion.current(u + h) - ion.current(u - h)) / (2 * h);
    CHECK(ion.derivative(u) == doctest::Approx(fd).epsilon(1e-7));
  }
  IonModel bad = ion;
  bad.u_th = 200.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ion;
  bad.alpha = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("assembled operator matches the block application") {
  const auto h = build_hierarchy(2, 0, 3, 1.0, 0.5, 4);
  const auto& mesh = h.level(0);
  const auto sys = build_system(mesh, varying_g(mesh, 0.1), IonModel{}, std::vector<double>(mesh.spec.spacetime_size()));
  const auto C = sys.assemble();
  CHECK(C.rows() == static_cast<Index>(sys.size()));
  std::vector<double> u(sys.size());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : u) v = dist(rng);
  std::vector<double> y1(sys.size()), y2(sys.size());
  sys.apply(u, y1);
  C.multiply(u, y2);
  CHECK(max_diff(y1, y2) <= 1e-13);
  // block structure: A on the diagonal, B below, nothing above
  const Index n = sys.n();
  CHECK(C.at(0, 0) == doctest::Approx(sys.A.at(0, 0)));
  CHECK(C.at(n, 0) == doctest::Approx(sys.B.at(0, 0)));
  CHECK(C.find(0, n) < 0);
  const auto AmB = add(1.0, sys.A, -1.0, sys.B);
  const auto twoM = add(2.0, sys.mass, 0.0, sys.mass);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) CHECK(AmB.at(i, j) == doctest::Approx(twoM.at(i, j)).epsilon(1e-12));
}

TEST_CASE("Crank-Nicolson is exact for spatially constant linear growth") {
  for (int d = 1; d <= 2; ++d) {
    const auto h = build_hierarchy(d, 0, 4, 1.0, 0.8, 8);
    const auto& mesh = h.level(0);
    const auto M = assemble_mass(mesh);
    auto load = assemble_load(mesh, M, [](const Point&, double) { return 1.0; });
    const auto sys = build_system(mesh, varying_g(mesh, 0.05), IonModel{}, load);
    SolverOptions tight;
    tight.newton_tol = 1e-13;
    tight.gmres_rtol = 1e-13;
    const auto a = newton_solve(sys, SpaceTimeField(0, sys.n(), sys.m()), tight);
    const auto b = sequential_solve(sys, tight);
    for (Index k = 0; k < sys.m(); ++k)
      for (double v : a.block(k)) CHECK(v == doctest::Approx(mesh.spec.dt * (k + 1)).epsilon(1e-9));
    CHECK(max_diff(a.values, b.values) <= 1e-10);
  }
}

TEST_CASE("nonzero initial state is carried by the load") {
  const auto h = build_hierarchy(1, 0, 8, 1.0, 1.0, 4);
  const auto& mesh = h.level(0);
  SystemOptions opts;
  opts.initial_state.assign(static_cast<std::size_t>(mesh.n_nodes()), 2.5);
  const auto sys = build_system(mesh, varying_g(mesh, 0.1), IonModel{}, std::vector<double>(mesh.spec.spacetime_size()), opts);
  const auto u = sequential_solve(sys);
  for (double v : u.values) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
  opts.initial_state.resize(3);
  CHECK_THROWS_AS(build_system(mesh, varying_g(mesh, 0.1), IonModel{}, std::vector<double>(mesh.spec.spacetime_size()), opts),
                  ConfigError);
}

TEST_CASE("homogeneous Dirichlet rows") {
  const auto h = build_hierarchy(2, 0, 4, 1.0, 0.5, 4);
  const auto& mesh = h.level(0);
  const auto M = assemble_mass(mesh);
  SystemOptions opts;
  opts.dirichlet = true;
  const auto sys = build_system(mesh, varying_g(mesh, 0.2), IonModel{}, assemble_load(mesh, M, cosine_forcing(1.0, 1.0, 2)), opts);
  const auto u = newton_solve(sys, SpaceTimeField(0, sys.n(), sys.m()), SolverOptions{});
  int boundary = 0;
  for (Index i = 0; i < sys.n(); ++i) {
    if (!sys.dirichlet_rows[i]) continue;
    ++boundary;
    for (Index k = 0; k < sys.m(); ++k) CHECK(u.block(k)[i] == doctest::Approx(0.0).scale(1.0));
  }
  CHECK(boundary == 16);
  const auto b = sequential_solve(sys);
  CHECK(max_diff(u.values, b.values) <= 1e-9);
}

TEST_CASE("Jacobian matches finite differences of the residual") {
  const auto h = build_hierarchy(1, 0, 10, 1.0, 0.32, 4);
  const auto& mesh = h.level(0);
  const auto sys = build_system(mesh, varying_g(mesh, 3.325e-3), fhn(), stimulus_load(mesh));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-20.0, 120.0), V(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> u(sys.size()), v(sys.size());
    for (auto& x : u) x = U(rng);
    for (auto& x : v) x = V(rng);
    const auto J = jacobian(sys, u);
    std::vector<double> Jv(sys.size());
    J.multiply(v, Jv);
    const double eps = 1e-3;
    std::vector<double> up(u), um(u);
    for (std::size_t i = 0; i < u.size(); ++i) {
      up[i] += eps * v[i];
      um[i] -= eps * v[i];
    }
    const auto rp = residual(sys, up), rm = residual(sys, um);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double fd = (rp[i] - rm[i]) / (2 * eps);
      num += (fd - Jv[i]) * (fd - Jv[i]);
      den += Jv[i] * Jv[i];
    }
    CHECK(std::sqrt(num / den) <= 1e-8);
  }
}

TEST_CASE("ionic residual block structure") {
  const auto h = build_hierarchy(1, 0, 4, 1.0, 0.2, 2);
  const auto& mesh = h.level(0);
  const auto sys = build_system(mesh, varying_g(mesh, 1e-3), fhn(), std::vector<double>(mesh.spec.spacetime_size()));
  std::vector<double> u(sys.size(), 10.0);
  const auto r = ionic_residual(sys, u);
  // dt * M * I_ion(10) summed over a block is dt * |D| * I_ion(10)
  double s = 0.0;
  for (Index i = 0; i < sys.n(); ++i) s += r[i];
  CHECK(s == doctest::Approx(mesh.spec.dt * fhn().current(10.0)));
}

TEST_CASE("monolithic Newton and sequential time stepping agree for FHN") {
  const auto h = build_hierarchy(1, 1, 16, 1.0, 0.64, 8);
  const auto& mesh = h.level(1);
  const auto sys = build_system(mesh, varying_g(mesh, 3.325e-3), fhn(), stimulus_load(mesh));
  SolveStats st;
  const auto a = newton_solve(sys, SpaceTimeField(1, sys.n(), sys.m()), SolverOptions{}, &st);
  const auto b = sequential_solve(sys);
  CHECK(max_diff(a.values, b.values) <= 1e-8);
  CHECK(st.newton_iterations >= 1);
  CHECK(st.residual_norms.size() == static_cast<std::size_t>(st.newton_iterations) + 1);
  CHECK(st.residual_norms.back() <= 1e-10 * std::max(1.0, norm2(sys.load)));

  SolverOptions chunked;
  chunked.time_partitions = 4;
  const auto c = newton_solve(sys, SpaceTimeField(1, sys.n(), sys.m()), chunked);
  CHECK(max_diff(a.values, c.values) <= 1e-8);
}

TEST_CASE("solver failures raise SolverError") {
  const auto h = build_hierarchy(1, 0, 16, 1.0, 0.64, 8);
  const auto& mesh = h.level(0);
  const auto sys = build_system(mesh, varying_g(mesh, 3.325e-3), fhn(), stimulus_load(mesh));
  SolverOptions one;
  one.max_newton = 1;
  CHECK_THROWS_AS(newton_solve(sys, SpaceTimeField(0, sys.n(), sys.m()), one), SolverError);
  SolverOptions short_gmres;
  short_gmres.gmres_max_iterations = 1;
  short_gmres.gmres_restart = 1;
  CHECK_THROWS_AS(newton_solve(sys, SpaceTimeField(0, sys.n(), sys.m()), short_gmres), SolverError);
  CHECK_THROWS_AS(newton_solve(sys, SpaceTimeField(0, 3, 2), SolverOptions{}), ConfigError);
}

TEST_CASE("GMRES with ILU(0) solves a nonsymmetric system") {
  const Index n = 50;
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.push_back({i, i, 4.0});
    if (i > 0) t.push_back({i, i - 1, -1.5});
    if (i + 1 < n) t.push_back({i, i + 1, -0.5});
    if (i + 5 < n) t.push_back({i, i + 5, 0.3});
  }
  const auto A = SparseOperator::from_triplets(n, n, t);
  std::vector<double> xs(n), b(n), x(n, 0.0);
  for (Index i = 0; i < n; ++i) xs[i] = std::cos(0.3 * i);
  A.multiply(xs, b);
  GmresOptions o;
  o.rtol = 1e-12;
  o.atol = 0.0;
  o.restart = 5;
  const auto res = gmres(A, Ilu0(A), b, x, o);
  CHECK(res.converged);
  CHECK(max_diff(x, xs) <= 1e-9);
  SparseLuSolver lu(A);
  std::vector<double> y(n);
  lu.solve(b, y);
  CHECK(max_diff(y, xs) <= 1e-12);
}
