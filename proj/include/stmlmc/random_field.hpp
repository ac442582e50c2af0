#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "stmlmc/mesh_hierarchy.hpp"
#include "stmlmc/sparse.hpp"

namespace stmlmc {

/// Squared-exponential correlation k(x, y) = exp(-|x - y|^2 / sigma_kl).
struct CovarianceModel {
  double sigma_kl = 0.25;

  double operator()(const Point& x, const Point& y) const;
};

Eigen::MatrixXd build_covariance(std::span<const Point> nodes, const CovarianceModel& model);

/// Low-rank factor C ~= L L^T from pivoted Cholesky.
struct LowRankFactor {
  Eigen::MatrixXd columns;  ///< n x rank
  std::vector<Index> pivots;
  double trace = 0.0;
  double remaining_trace = 0.0;

  int rank() const { return static_cast<int>(columns.cols()); }
};

/// Greedy pivoted Cholesky: stops once the remaining trace is <= trace_tol * trace(C)
/// or max_rank columns were produced. Pivot is the largest remaining diagonal,
/// lowest index on ties. Throws ConfigError for pivots below -1e-12 * trace(C).
LowRankFactor pivoted_cholesky(const Eigen::MatrixXd& C, double trace_tol, int max_rank);

/// Matrix-free variant: `diagonal` holds C_ii, `column(j, out)` fills column j.
LowRankFactor pivoted_cholesky(std::span<const double> diagonal,
                               const std::function<void(Index, std::span<double>)>& column,
                               double trace_tol, int max_rank);

struct KLOptions {
  double trace_tol = 1e-2;
  int max_rank = 200;
  bool mass_weighted = false;
  double g0 = 3.325e-3;
  double s = 0.3;
  double delta = 0.5;
  /// Standard deviation scale of the perturbation field; <= 0 selects g0.
  double amplitude = -1.0;
  /// Replace s by the largest value satisfying the ellipticity bound.
  bool auto_s = false;
};

/// G(x, y) = G0 + s * a * sum_k sqrt(lambda_k) phi_k(x) y_k on every level of a
/// hierarchy, with the eigenvectors computed on the finest level and injected
/// to coarser levels through coinciding nodes.
class KLExpansion {
public:
  KLExpansion() = default;

  /// Eigenpairs from the Gram matrix of the factor (L^T L, or L^T M L when
  /// mass-weighted). Throws EllipticityError when s violates the bound.
  static KLExpansion from_factor(const LowRankFactor& factor, const MeshHierarchy& hierarchy,
                                 const SparseOperator* fine_mass, const KLOptions& options);

  /// Covariance assembly and pivoted Cholesky on the finest level, then from_factor.
  static KLExpansion build(const MeshHierarchy& hierarchy, const CovarianceModel& model,
                           const KLOptions& options);

  /// Zero stochastic dimension: every realization equals G0.
  static KLExpansion deterministic(const MeshHierarchy& hierarchy, double g0);

  int dimension() const { return static_cast<int>(lambdas_.size()); }
  const std::vector<double>& lambdas() const { return lambdas_; }
  const Eigen::MatrixXd& modes() const { return modes_; } ///< finest-level phi_k (columns)
  double g0() const { return g0_; }
  double s() const { return s_; }
  double delta() const { return delta_; }
  double amplitude() const { return amplitude_; }

  /// max_x s a sum_k |sqrt(lambda_k) phi_k(x)| / (delta G0); <= 1 when admissible.
  double ellipticity_ratio() const;
  double max_admissible_s() const;

  /// Nodal G on level l. Throws ConfigError when some |y_k| > 1.
  std::vector<double> realize(std::span<const double> y, int level) const;

private:
  void finalize(const MeshHierarchy& hierarchy);

  std::vector<double> lambdas_;
  Eigen::MatrixXd modes_;
  double g0_ = 0.0;
  double s_ = 0.0;
  double delta_ = 0.5;
  double amplitude_ = 1.0;
  double worst_sum_ = 0.0; ///< max_x sum_k |sqrt(lambda_k) phi_k(x)|
  std::vector<std::vector<Index>> level_to_fine_;
};

/// RNG stream key; fields are kept separate so distinct triples never collide.
struct StreamKey {
  std::uint64_t master_seed = 0;
  std::uint32_t level = 0;
  std::uint64_t index = 0;

  bool operator==(const StreamKey&) const = default;
  /// level << 48 | index, injective for index < 2^48.
  std::uint64_t packed() const { return (static_cast<std::uint64_t>(level) << 48) | index; }
};

struct SampleVector {
  std::vector<double> y;
  StreamKey key;
};

/// M iid U(-1, 1) variates, a pure function of the key.
SampleVector draw_sample(std::uint64_t master_seed, std::uint32_t level_tag, std::uint64_t index, int M);

/// CSV "k,lambda" with one row per retained mode.
void write_kl_spectrum(std::ostream& out, const KLExpansion& kl);

} // namespace stmlmc
