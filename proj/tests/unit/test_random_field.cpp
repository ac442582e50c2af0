#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <set>
#include <sstream>

#include "stmlmc/fem_assembly.hpp"
#include "stmlmc/random_field.hpp"

using namespace stmlmc;

namespace {

std::vector<Point> interval_nodes(int n) {
  std::vector<Point> p;
  for (int i = 0; i < n; ++i) p.push_back({i / double(n - 1), 0.0, 0.0});
  return p;
}

} // namespace

TEST_CASE("covariance kernel") {
  const CovarianceModel k{0.25};
  CHECK(k({0, 0, 0}, {0, 0, 0}) == 1.0);
  CHECK(k({0, 0, 0}, {0.5, 0, 0}) == doctest::Approx(std::exp(-1.0)));
  CHECK(k({0, 0, 0}, {0.3, 0.4, 0}) == doctest::Approx(std::exp(-1.0)));
  const auto C = build_covariance(interval_nodes(7), k);
  CHECK((C - C.transpose()).norm() == 0.0);
}

TEST_CASE("pivoted Cholesky on a small SPD matrix") {
  Eigen::MatrixXd C(3, 3);
  C << 4, 2, 0, 2, 5, 1, 0, 1, 6;
  const auto f = pivoted_cholesky(C, 1e-15, 10);
  CHECK(f.rank() == 3);
  CHECK(f.pivots == std::vector<Index>{2, 1, 0});
  CHECK((f.columns * f.columns.transpose() - C).norm() <= 1e-12);
  CHECK(f.trace == doctest::Approx(15.0));
  CHECK(f.remaining_trace <= 1e-12);
}

TEST_CASE("pivot ties pick the lowest index") {
  const auto C = build_covariance(interval_nodes(9), CovarianceModel{0.25});
  const auto f = pivoted_cholesky(C, 1e-2, 200);
  REQUIRE(f.rank() >= 1);
  CHECK(f.pivots.front() == 0);
}

TEST_CASE("pivoted Cholesky trace control and rank limit") {
  const auto C = build_covariance(interval_nodes(50), CovarianceModel{0.25});
  for (double tol : {1e-1, 1e-2, 1e-4, 1e-8}) {
    const auto f = pivoted_cholesky(C, tol, 200);
    CHECK(f.remaining_trace <= tol * f.trace);
    const Eigen::MatrixXd E = C - f.columns * f.columns.transpose();
    CHECK(E.trace() == doctest::Approx(f.remaining_trace).epsilon(1e-9).scale(f.trace));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(E);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
  const auto capped = pivoted_cholesky(C, 1e-12, 3);
  CHECK(capped.rank() == 3);
}

TEST_CASE("matrix-free and dense pivoted Cholesky agree") {
  const auto nodes = interval_nodes(40);
  const CovarianceModel k{0.25};
  const auto dense = pivoted_cholesky(build_covariance(nodes, k), 1e-6, 200);
  std::vector<double> diag(nodes.size(), 1.0);
  const auto free = pivoted_cholesky(
      diag, [&](Index j, std::span<double> out) { for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = k(nodes[i], nodes[j]); },
      1e-6, 200);
  CHECK(dense.pivots == free.pivots);
  CHECK((dense.columns - free.columns).norm() == 0.0);
}

TEST_CASE("indefinite input is rejected") {
  Eigen::MatrixXd C(2, 2);
  C << 1, 2, 2, 1;
  CHECK_THROWS_AS(pivoted_cholesky(C, 1e-12, 10), ConfigError);
  Eigen::MatrixXd D(2, 2);
  D << -1, 0, 0, 1;
  CHECK_THROWS_AS(pivoted_cholesky(D, 1e-12, 10), ConfigError);
}

TEST_CASE("KL modes are orthonormal and reproduce the factor") {
  const auto h = build_hierarchy(1, 2, 8, 1.0, 1.0, 1);
  KLOptions o;
  o.trace_tol = 1e-6;
  o.auto_s = true;
  const auto kl = KLExpansion::build(h, CovarianceModel{0.25}, o);
  const Eigen::MatrixXd& phi = kl.modes();
  const int M = kl.dimension();
  CHECK((phi.transpose() * phi - Eigen::MatrixXd::Identity(M, M)).norm() <= 1e-10);
  for (int k = 1; k < M; ++k) CHECK(kl.lambdas()[k] <= kl.lambdas()[k - 1]);

  const auto C = build_covariance(h.level(2).nodes, CovarianceModel{0.25});
  Eigen::MatrixXd approx = Eigen::MatrixXd::Zero(C.rows(), C.cols());
  for (int k = 0; k < M; ++k) approx += kl.lambdas()[k] * phi.col(k) * phi.col(k).transpose();
  CHECK((C - approx).trace() <= 1e-6 * C.trace());
  CHECK((C - approx).trace() >= -1e-10);
}

TEST_CASE("mass-weighted modes are M-orthonormal") {
  const auto h = build_hierarchy(2, 1, 3, 1.0, 1.0, 1);
  KLOptions o;
  o.mass_weighted = true;
  o.auto_s = true;
  const auto kl = KLExpansion::build(h, CovarianceModel{0.25}, o);
  const auto M = assemble_mass(h.level(1));
  const Eigen::MatrixXd& phi = kl.modes();
  Eigen::MatrixXd Mphi(phi.rows(), phi.cols());
  for (Eigen::Index k = 0; k < phi.cols(); ++k)
    M.multiply(std::span<const double>(phi.col(k).data(), phi.rows()), std::span<double>(Mphi.col(k).data(), phi.rows()));
  CHECK((phi.transpose() * Mphi - Eigen::MatrixXd::Identity(phi.cols(), phi.cols())).norm() <= 1e-10);
}

TEST_CASE("realizations respect the ellipticity bound and nest across levels") {
  const auto h = build_hierarchy(1, 3, 31, 1.0, 0.64, 4);
  KLOptions o;
  o.auto_s = true;
  const auto kl = KLExpansion::build(h, CovarianceModel{0.25}, o);
  CHECK(kl.ellipticity_ratio() == doctest::Approx(1.0));
  CHECK(kl.s() == doctest::Approx(kl.max_admissible_s()));

  const std::vector<double> zero(static_cast<std::size_t>(kl.dimension()), 0.0);
  for (double g : kl.realize(zero, 2)) CHECK(g == kl.g0());

  // worst-case corner of the parameter cube at every node
  const auto fine = kl.realize(std::vector<double>(zero.size(), 1.0), 3);
  for (double g : fine) {
    CHECK(g >= (1.0 - kl.delta()) * kl.g0() * (1 - 1e-12));
    CHECK(g <= (1.0 + kl.delta()) * kl.g0() * (1 + 1e-12));
  }

  const auto y = draw_sample(7, 0, 3, kl.dimension()).y;
  const auto g3 = kl.realize(y, 3);
  const auto g1 = kl.realize(y, 1);
  const auto map = h.injection_map(1, 3);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g3[map[i]]);

  CHECK_THROWS_AS(kl.realize(std::vector<double>(zero.size(), 1.5), 0), ConfigError);
  CHECK_THROWS_AS(kl.realize(std::vector<double>(zero.size() + 1, 0.0), 0), ConfigError);
  CHECK_THROWS_AS(kl.realize(zero, 4), ConfigError);
}

TEST_CASE("inadmissible damping factor raises EllipticityError") {
  const auto h = build_hierarchy(1, 1, 31, 1.0, 0.64, 4);
  KLOptions o;
  o.s = 10.0;
  CHECK_THROWS_AS(KLExpansion::build(h, CovarianceModel{0.25}, o), EllipticityError);
  o.s = 0.01;
  const auto kl = KLExpansion::build(h, CovarianceModel{0.25}, o);
  CHECK(kl.s() == 0.01);
  CHECK(kl.ellipticity_ratio() < 1.0);
}

TEST_CASE("deterministic expansion has zero dimension") {
  const auto h = build_hierarchy(2, 1, 2, 1.0, 1.0, 1);
  const auto kl = KLExpansion::deterministic(h, 2.0);
  CHECK(kl.dimension() == 0);
  for (double g : kl.realize({}, 1)) CHECK(g == 2.0);
}

TEST_CASE("sample streams are deterministic, uniform and independent of key order") {
  const auto a = draw_sample(12345, 2, 17, 64);
  const auto b = draw_sample(12345, 2, 17, 64);
  CHECK(a.y == b.y);
  CHECK(a.key == StreamKey{12345, 2, 17});
  CHECK(draw_sample(12345, 3, 17, 64).y != a.y);
  CHECK(draw_sample(12345, 2, 18, 64).y != a.y);
  CHECK(draw_sample(12346, 2, 17, 64).y != a.y);
  // a prefix of a longer draw is the shorter draw
  const auto c = draw_sample(12345, 2, 17, 8);
  CHECK(std::equal(c.y.begin(), c.y.end(), a.y.begin()));

  double sum = 0.0, sq = 0.0;
  int n = 0;
  for (int i = 0; i < 2000; ++i)
    for (double v : draw_sample(1, 0, static_cast<std::uint64_t>(i), 10).y) {
      CHECK(v >= -1.0);
      CHECK(v < 1.0);
      sum += v;
      sq += v * v;
      ++n;
    }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(sq / n == doctest::Approx(1.0 / 3.0).epsilon(0.03));
}

TEST_CASE("stream keys pack injectively") {
  std::set<std::uint64_t> seen;
  for (std::uint32_t l = 0; l < 4; ++l)
    for (std::uint64_t i = 0; i < 100; ++i) seen.insert(StreamKey{1, l, i}.packed());
  CHECK(seen.size() == 400);
}

TEST_CASE("spectrum CSV") {
  const auto h = build_hierarchy(1, 0, 31, 1.0, 1.0, 1);
  KLOptions o;
  o.auto_s = true;
  const auto kl = KLExpansion::build(h, CovarianceModel{0.25}, o);
  std::ostringstream out;
  write_kl_spectrum(out, kl);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,lambda");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == kl.dimension());
}
