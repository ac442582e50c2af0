#include <doctest.h>

#include <cmath>
#include <numeric>

#include "stmlmc/fem_assembly.hpp"

using namespace stmlmc;

namespace {

double quad_form(const SparseOperator& A, const std::vector<double>& x, const std::vector<double>& y) {
  const auto Ax = A * std::span<const double>(x);
  return std::inner_product(Ax.begin(), Ax.end(), y.begin(), 0.0);
}

std::vector<double> coordinate(const LevelMesh& mesh, int k) {
  std::vector<double> v;
  for (const auto& p : mesh.nodes) v.push_back(p[k]);
  return v;
}

} // namespace

TEST_CASE("1D mass and stiffness on two elements") {
  const auto h = build_hierarchy(1, 0, 2, 1.0, 1.0, 1);
  const auto M = assemble_mass(h.level(0));
  CHECK(M.at(0, 0) == doctest::Approx(1.0 / 6.0));
  CHECK(M.at(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(M.at(2, 2) == doctest::Approx(1.0 / 6.0));
  CHECK(M.at(0, 1) == doctest::Approx(1.0 / 12.0));
  CHECK(M.at(1, 2) == doctest::Approx(1.0 / 12.0));
  CHECK(M.at(0, 2) == 0.0);

  const std::vector<double> g(3, 1.0);
  const auto K = assemble_stiffness(h.level(0), g);
  CHECK(K.at(0, 0) == doctest::Approx(2.0));
  CHECK(K.at(1, 1) == doctest::Approx(4.0));
  CHECK(K.at(0, 1) == doctest::Approx(-2.0));
}

TEST_CASE("2D reference square element matrices") {
  // one unit cell split into two triangles along the diagonal (0,0)-(1,1)
  const auto h = build_hierarchy(2, 0, 1, 1.0, 1.0, 1);
  const auto M = assemble_mass(h.level(0));
  // diagonal vertices belong to both triangles: 2 * (1/2) / 6
  CHECK(M.at(0, 0) == doctest::Approx(1.0 / 6.0));
  CHECK(M.at(1, 1) == doctest::Approx(1.0 / 12.0));
  CHECK(M.at(0, 3) == doctest::Approx(1.0 / 12.0));
  CHECK(M.at(1, 2) == 0.0);
  const auto K = assemble_stiffness(h.level(0), std::vector<double>(4, 1.0));
  CHECK(K.at(0, 0) == doctest::Approx(1.0));
  CHECK(K.at(1, 1) == doctest::Approx(1.0));
  CHECK(K.at(0, 1) == doctest::Approx(-0.5));
  CHECK(K.at(0, 3) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("mass and stiffness properties in 1D, 2D and 3D") {
  for (int d = 1; d <= 3; ++d) {
    CAPTURE(d);
    const auto h = build_hierarchy(d, 1, 2, 2.0, 1.0, 1);
    const auto& mesh = h.finest() == 1 ? h.level(1) : h.level(0);
    const double vol = std::pow(2.0, d);
    const auto M = assemble_mass(mesh);
    const std::vector<double> one(static_cast<std::size_t>(mesh.n_nodes()), 1.0);
    CHECK(M.is_symmetric(1e-15));
    CHECK(quad_form(M, one, one) == doctest::Approx(vol).epsilon(1e-12));
    for (double v : M.values()) CHECK(v >= 0.0);

    // integral of x is vol * extent / 2; integral of x^2 is vol * extent^2 / 3 up to O(h^2)
    const auto x = coordinate(mesh, 0);
    CHECK(quad_form(M, one, x) == doctest::Approx(vol).epsilon(1e-12));

    std::vector<double> g(one.size(), 3.0);
    const auto K = assemble_stiffness(mesh, g);
    CHECK(K.is_symmetric(1e-12));
    for (double r : K.row_sums()) CHECK(std::abs(r) <= 1e-12);
    // a(x, x) = 3 * |grad x|^2 * vol
    CHECK(quad_form(K, x, x) == doctest::Approx(3.0 * vol).epsilon(1e-12));
    CHECK(K.same_pattern(M));

    const StiffnessAssembler assembler(mesh);
    std::vector<double> gv(one.size());
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] = 1.0 + 0.1 * std::sin(static_cast<double>(i));
    const auto K1 = assembler.assemble(gv);
    const auto K2 = assemble_stiffness(mesh, gv);
    REQUIRE(K1.same_pattern(K2));
    for (std::size_t i = 0; i < K1.nnz(); ++i) CHECK(K1.values()[i] == doctest::Approx(K2.values()[i]).epsilon(1e-14));
  }
}

TEST_CASE("stiffness rejects bad diffusion fields") {
  const auto h = build_hierarchy(1, 0, 2, 1.0, 1.0, 1);
  CHECK_THROWS_AS(assemble_stiffness(h.level(0), std::vector<double>(2, 1.0)), AssemblyError);
  CHECK_THROWS_AS(assemble_stiffness(h.level(0), std::vector<double>{1.0, -1.0, 1.0}), EllipticityError);
}

TEST_CASE("Crank-Nicolson load blocks") {
  const auto h = build_hierarchy(2, 0, 2, 1.0, 1.0, 4);
  const auto& mesh = h.level(0);
  const auto M = assemble_mass(mesh);
  const auto f = assemble_load(mesh, M, [](const Point&, double t) { return t; });
  const auto n = static_cast<std::size_t>(mesh.n_nodes());
  REQUIRE(f.size() == n * 4);
  const double dt = 0.25;
  for (int k = 0; k < 4; ++k) {
    const double total = std::accumulate(f.begin() + k * n, f.begin() + (k + 1) * n, 0.0);
    CHECK(total == doctest::Approx(dt / 2.0 * (k * dt + (k + 1) * dt)));
  }
}

TEST_CASE("stimulus is active only before t1") {
  StimulusSpec s;
  s.t1 = 0.1;
  s.u_peak = 2.0;
  s.sigma = 0.5;
  CHECK(s({0, 0, 0}, 0.0) == doctest::Approx(2.0));
  CHECK(s({0.5, 0, 0}, 0.05) == doctest::Approx(2.0 * std::exp(-1.0)));
  CHECK(s({0, 0, 0}, 0.1) == 0.0);
  CHECK(s({0, 0, 0}, 0.2) == 0.0);

  const auto h = build_hierarchy(1, 0, 4, 1.0, 0.4, 4);
  const auto f = assemble_stimulus(h.level(0), s);
  const std::size_t n = 5;
  double first = 0.0, later = 0.0;
  for (std::size_t i = 0; i < n; ++i) first += f[i];
  for (std::size_t i = n; i < f.size(); ++i) later += std::abs(f[i]);
  CHECK(first > 0.0);
  CHECK(later == 0.0);

  s.sigma = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("cosine forcing has the expected profile") {
  const auto f = cosine_forcing(2.0, 1.0, 2);
  CHECK(f({0, 0, 0}, 0.3) == doctest::Approx(4.0));
  CHECK(f({0.5, 0.2, 0}, 0.0) == doctest::Approx(2.0));
  CHECK(f({1, 0, 0}, 0.0) == doctest::Approx(0.0));
}
