#include "stmlmc/random_field.hpp"

#include "stmlmc/fem_assembly.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

namespace stmlmc {

double CovarianceModel::operator()(const Point& x, const Point& y) const {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) d2 += (x[k] - y[k]) * (x[k] - y[k]);
  return std::exp(-d2 / sigma_kl);
}

Eigen::MatrixXd build_covariance(std::span<const Point> nodes, const CovarianceModel& model) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    C(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) C(i, j) = C(j, i) = model(nodes[i], nodes[j]);
  }
  return C;
}

LowRankFactor pivoted_cholesky(std::span<const double> diagonal,
                               const std::function<void(Index, std::span<double>)>& column,
                               double trace_tol, int max_rank) {
  const auto n = static_cast<Index>(diagonal.size());
  std::vector<double> d(diagonal.begin(), diagonal.end());
  LowRankFactor f;
  for (double v : d) f.trace += v;
  const double neg_tol = 1e-12 * std::max(f.trace, 0.0);
  max_rank = std::min<int>(max_rank, n);

  std::vector<std::vector<double>> cols;
  std::vector<double> c(static_cast<std::size_t>(n));
  while (true) {
    double remaining = 0.0;
    for (double v : d) remaining += v;
    f.remaining_trace = remaining;
    if (remaining <= trace_tol * f.trace || static_cast<int>(cols.size()) >= max_rank) break;

    Index p = 0;
    for (Index i = 1; i < n; ++i)
      if (d[i] > d[p]) p = i;
    if (d[p] <= 0.0) break;

    column(p, c);
    const double root = std::sqrt(d[p]);
    std::vector<double> l(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      double s = c[i];
      for (const auto& prev : cols) s -= prev[i] * prev[p];
      l[i] = s / root;
    }
    for (Index q : f.pivots) l[q] = 0.0;
    l[p] = root;
    for (Index i = 0; i < n; ++i) {
      d[i] -= l[i] * l[i];
      if (d[i] < 0.0) {
        if (d[i] < -neg_tol)
          throw ConfigError("pivoted Cholesky: matrix is not positive semi-definite (pivot " +
                            std::to_string(d[i]) + " at row " + std::to_string(i) + ")");
        d[i] = 0.0;
      }
    }
    d[p] = 0.0;
    f.pivots.push_back(p);
    cols.push_back(std::move(l));
  }

  f.columns.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k)
    for (Index i = 0; i < n; ++i) f.columns(i, static_cast<Eigen::Index>(k)) = cols[k][i];
  return f;
}

LowRankFactor pivoted_cholesky(const Eigen::MatrixXd& C, double trace_tol, int max_rank) {
  if (C.rows() != C.cols()) throw ConfigError("pivoted Cholesky: matrix must be square");
  std::vector<double> diag(static_cast<std::size_t>(C.rows()));
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    if (C(i, i) < 0.0) throw ConfigError("pivoted Cholesky: negative diagonal entry");
    diag[i] = C(i, i);
  }
  return pivoted_cholesky(
      diag,
      [&](Index j, std::span<double> out) {
        for (Eigen::Index i = 0; i < C.rows(); ++i) out[i] = C(i, j);
      },
      trace_tol, max_rank);
}

KLExpansion KLExpansion::from_factor(const LowRankFactor& factor, const MeshHierarchy& hierarchy,
                                     const SparseOperator* fine_mass, const KLOptions& options) {
  if (factor.rank() < 1) throw ConfigError("KL expansion needs a factor of rank >= 1");
  if (!(options.g0 > 0.0)) throw ConfigError("kl.g0 must be positive");
  if (!(options.delta > 0.0 && options.delta < 1.0)) throw ConfigError("kl.delta must lie in (0, 1)");
  if (options.s < 0.0) throw ConfigError("kl.s must be non-negative");
  const Eigen::MatrixXd& L = factor.columns;
  if (L.rows() != hierarchy.level(hierarchy.finest()).n_nodes())
    throw ConfigError("KL factor size does not match the finest level");

  Eigen::MatrixXd gram;
  if (options.mass_weighted) {
    if (fine_mass == nullptr) throw ConfigError("mass-weighted KL needs the finest-level mass matrix");
    Eigen::MatrixXd ML(L.rows(), L.cols());
    for (Eigen::Index k = 0; k < L.cols(); ++k)
      fine_mass->multiply(std::span<const double>(L.col(k).data(), L.rows()),
                          std::span<double>(ML.col(k).data(), L.rows()));
    gram = L.transpose() * ML;
    gram = 0.5 * (gram + gram.transpose());
  } else {
    gram = L.transpose() * L;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& vals = eig.eigenvalues();
  const double largest = vals(vals.size() - 1);

  KLExpansion kl;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = vals.size() - 1; k >= 0; --k)
    if (vals(k) > 1e-14 * largest) keep.push_back(k);
  kl.modes_.resize(L.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const double lambda = vals(keep[j]);
    kl.lambdas_.push_back(lambda);
    kl.modes_.col(static_cast<Eigen::Index>(j)) = L * eig.eigenvectors().col(keep[j]) / std::sqrt(lambda);
  }
  kl.g0_ = options.g0;
  kl.delta_ = options.delta;
  kl.amplitude_ = options.amplitude > 0.0 ? options.amplitude : options.g0;
  kl.s_ = options.s;
  kl.finalize(hierarchy);

  if (options.auto_s) {
    kl.s_ = kl.max_admissible_s();
  } else if (kl.ellipticity_ratio() > 1.0) {
    throw EllipticityError("KL scaling violates uniform ellipticity: max_x s*sum|sqrt(lambda)phi| / (delta*G0) = " +
                           std::to_string(kl.ellipticity_ratio()) + " (largest admissible s = " +
                           std::to_string(kl.max_admissible_s()) + ")");
  }
  return kl;
}

KLExpansion KLExpansion::build(const MeshHierarchy& hierarchy, const CovarianceModel& model,
                               const KLOptions& options) {
  if (!(model.sigma_kl > 0.0)) throw ConfigError("kl.sigma_kl must be positive");
  if (!(options.trace_tol > 0.0)) throw ConfigError("kl.trace_tol must be positive");
  const LevelMesh& fine = hierarchy.level(hierarchy.finest());
  const auto& nodes = fine.nodes;
  std::vector<double> diag(nodes.size(), 1.0);
  auto column = [&](Index j, std::span<double> out) {
    for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = model(nodes[i], nodes[j]);
  };
  const LowRankFactor factor = pivoted_cholesky(diag, column, options.trace_tol, options.max_rank);
  SparseOperator mass;
  if (options.mass_weighted) mass = assemble_mass(fine);
  return from_factor(factor, hierarchy, options.mass_weighted ? &mass : nullptr, options);
}

KLExpansion KLExpansion::deterministic(const MeshHierarchy& hierarchy, double g0) {
  if (!(g0 > 0.0)) throw ConfigError("kl.g0 must be positive");
  KLExpansion kl;
  kl.g0_ = g0;
  kl.amplitude_ = g0;
  kl.modes_.resize(hierarchy.level(hierarchy.finest()).n_nodes(), 0);
  kl.finalize(hierarchy);
  return kl;
}

void KLExpansion::finalize(const MeshHierarchy& hierarchy) {
  worst_sum_ = 0.0;
  for (Eigen::Index i = 0; i < modes_.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < modes_.cols(); ++k) s += std::abs(std::sqrt(lambdas_[k]) * modes_(i, k));
    worst_sum_ = std::max(worst_sum_, s);
  }
  level_to_fine_.clear();
  for (int l = 0; l <= hierarchy.finest(); ++l) level_to_fine_.push_back(hierarchy.injection_map(l, hierarchy.finest()));
}

double KLExpansion::ellipticity_ratio() const { return s_ * amplitude_ * worst_sum_ / (delta_ * g0_); }

double KLExpansion::max_admissible_s() const {
  if (worst_sum_ == 0.0) return 0.0;
  return delta_ * g0_ / (amplitude_ * worst_sum_);
}

std::vector<double> KLExpansion::realize(std::span<const double> y, int level) const {
  const int M = dimension();
  if (static_cast<int>(y.size()) != M)
    throw ConfigError("sample has " + std::to_string(y.size()) + " components, KL dimension is " + std::to_string(M));
  for (int k = 0; k < M; ++k)
    if (!(std::abs(y[k]) <= 1.0)) throw ConfigError("sample component " + std::to_string(k) + " outside [-1, 1]");
  if (level < 0 || level >= static_cast<int>(level_to_fine_.size()))
    throw ConfigError("realize: level " + std::to_string(level) + " not in hierarchy");

  const auto& map = level_to_fine_[level];
  std::vector<double> scaled(M);
  for (int k = 0; k < M; ++k) scaled[k] = s_ * amplitude_ * std::sqrt(lambdas_[k]) * y[k];
  std::vector<double> g(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    double p = 0.0;
    for (int k = 0; k < M; ++k) p += modes_(map[i], k) * scaled[k];
    g[i] = g0_ + p;
  }
  return g;
}

SampleVector draw_sample(std::uint64_t master_seed, std::uint32_t level_tag, std::uint64_t index, int M) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32), level_tag,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 gen(seq);
  SampleVector s;
  s.key = {master_seed, level_tag, index};
  s.y.resize(static_cast<std::size_t>(std::max(M, 0)));
  for (auto& v : s.y) v = static_cast<double>(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  return s;
}

void write_kl_spectrum(std::ostream& out, const KLExpansion& kl) {
  out << "k,lambda\n";
  out.precision(17);
  for (std::size_t k = 0; k < kl.lambdas().size(); ++k) out << k + 1 << ',' << kl.lambdas()[k] << '\n';
}

} // namespace stmlmc
