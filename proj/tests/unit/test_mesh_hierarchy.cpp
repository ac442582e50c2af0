#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stmlmc/mesh_hierarchy.hpp"

using namespace stmlmc;

namespace {

Index ipow(Index b, int e) {
  Index r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

} // namespace

TEST_CASE("level sizes follow uniform refinement in space and time") {
  for (int d = 1; d <= 3; ++d) {
    const auto h = build_hierarchy(d, 2, 3, 2.0, 0.64, 4);
    REQUIRE(h.levels.size() == 3);
    const Index factorial[] = {1, 1, 2, 6};
    for (int l = 0; l <= 2; ++l) {
      const auto& s = h.level(l).spec;
      const Index cells = 3 << l;
      CHECK(s.cells_per_dim == cells);
      CHECK(s.n_nodes == ipow(cells + 1, d));
      CHECK(s.n_elements == ipow(cells, d) * factorial[d]);
      CHECK(s.n_timesteps == 4 << l);
      CHECK(s.dt == doctest::Approx(0.64 / (4 << l)));
      CHECK(s.mesh_size == doctest::Approx(2.0 / cells));
      CHECK(s.level_index == l);
    }
  }
}

TEST_CASE("1D hierarchy reproduces the 31-element base table") {
  const auto h = build_hierarchy(1, 5, 31, 1.0, 0.64, 4);
  const Index expected[] = {31, 62, 124, 248, 496, 992};
  for (int l = 0; l <= 5; ++l) {
    CHECK(h.level(l).n_elements() == expected[l]);
    CHECK(h.level(l).spec.n_timesteps == 4 << l);
  }
  CHECK(h.level(5).spec.dt == doctest::Approx(0.005));
}

TEST_CASE("element volumes tile the domain") {
  for (int d = 1; d <= 3; ++d) {
    const auto h = build_hierarchy(d, 1, 2, 1.5, 1.0, 1);
    for (const auto& mesh : h.levels) {
      double total = 0.0;
      for (Index e = 0; e < mesh.n_elements(); ++e) {
        CHECK(mesh.element_volume(e) > 0.0);
        total += mesh.element_volume(e);
      }
      CHECK(total == doctest::Approx(std::pow(1.5, d)).epsilon(1e-12));
      CHECK(mesh.domain_volume() == doctest::Approx(std::pow(1.5, d)));
    }
  }
}

TEST_CASE("nesting and injection maps") {
  for (int d = 1; d <= 3; ++d) {
    const auto h = build_hierarchy(d, 2, 2, 1.0, 1.0, 2);
    CHECK(verify_nesting(h));
    const auto map = h.injection_map(0, 2);
    REQUIRE(map.size() == static_cast<std::size_t>(h.level(0).n_nodes()));
    for (Index i = 0; i < h.level(0).n_nodes(); ++i) {
      const Point& pc = h.level(0).nodes[i];
      const Point& pf = h.level(2).nodes[map[i]];
      for (int k = 0; k < 3; ++k) CHECK(std::abs(pc[k] - pf[k]) <= 1e-14);
    }
    CHECK_THROWS_AS(h.injection_map(2, 0), MeshError);
  }
}

TEST_CASE("lexicographic numbering with x fastest") {
  const auto h = build_hierarchy(2, 0, 2, 1.0, 1.0, 1);
  const auto& mesh = h.level(0);
  CHECK(mesh.node_at({1, 0, 0}) == 1);
  CHECK(mesh.node_at({0, 1, 0}) == 3);
  CHECK(mesh.nodes[4][0] == doctest::Approx(0.5));
  CHECK(mesh.nodes[4][1] == doctest::Approx(0.5));
}

TEST_CASE("invalid geometry is rejected") {
  CHECK_THROWS_AS(build_hierarchy(4, 1, 2, 1.0, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(build_hierarchy(1, -1, 2, 1.0, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(build_hierarchy(1, 1, 0, 1.0, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(build_hierarchy(1, 1, 2, 0.0, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(build_hierarchy(1, 1, 2, 1.0, 1.0, 0), ConfigError);
  CHECK_THROWS_AS(build_hierarchy(3, 12, 4, 1.0, 1.0, 4), ConfigError);
}

TEST_CASE("legacy VTK output") {
  const auto h = build_hierarchy(2, 0, 1, 1.0, 1.0, 1);
  const std::vector<double> data(4, 2.5);
  std::ostringstream out;
  write_vtk(out, h.level(0), data, "u", "title line");
  const std::string s = out.str();
  CHECK(s.rfind("# vtk DataFile Version", 0) == 0);
  CHECK(s.find("title line") != std::string::npos);
  CHECK(s.find("POINTS 4") != std::string::npos);
  CHECK(s.find("CELLS 2") != std::string::npos);
  CHECK(s.find("SCALARS u") != std::string::npos);
  CHECK_THROWS(write_vtk(out, h.level(0), std::vector<double>(3), "u"));
}
