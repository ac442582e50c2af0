#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stmlmc/forward_model.hpp"
#include "stmlmc/level_transfer.hpp"
#include "stmlmc/scheduler.hpp"

namespace stmlmc {

enum class EstimatorKind { mc, mlmc };

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::mc;
  /// MC: the sampled level. MLMC: the finest level L.
  int level = 0;
  /// N for MC (one entry), N_0..N_L for MLMC.
  std::vector<Index> samples;
  std::uint64_t master_seed = 1;
  /// Level l draws from stream tag tag_offset + l.
  std::uint32_t tag_offset = 0;
  /// Test fixture: every MLMC term reuses the samples of tag tag_offset + L.
  bool shared_samples = false;
  int workers = 1;
  /// Pool size per level; empty selects default_pools.
  std::vector<int> pools;
  /// Upper bound for buffered per-sample fields.
  std::size_t memory_budget = std::size_t{256} << 20;

  void validate() const;
};

struct LevelStatistics {
  int level = 0;
  Index samples = 0;
  std::uint32_t tag = 0;
  double mean_correction_norm = 0.0;
  double var_correction_norm = 0.0;
  long newton_iterations = 0;
  long gmres_iterations = 0;
  double seconds = 0.0;             ///< wall time of this level's sample solves
  double fine_solve_seconds = 0.0;  ///< mean per-sample solve time on level l
  double coarse_solve_seconds = 0.0; ///< mean per-sample solve time on level l-1
};

struct EstimatorResult {
  EstimatorKind kind = EstimatorKind::mc;
  int level = 0;
  SpaceTimeField mean;
  SpaceTimeField variance;
  std::vector<LevelStatistics> per_level;
  /// MLMC: averaged correction of each level on its own grid; MC: the mean.
  std::vector<SpaceTimeField> level_means;
  /// Measured mean seconds per solve for levels 0..level (0 when never solved).
  std::vector<double> cost_per_sample;
  /// Number of solves behind each cost_per_sample entry.
  std::vector<long> solve_counts;
  double work_seconds = 0.0; ///< sum of all per-sample solve times
  std::uint64_t master_seed = 0;
  Index clamped_variance_nodes = 0;   ///< tiny negative values set to zero
  Index negative_variance_nodes = 0;  ///< values below the clamp tolerance (also set to zero)
  double most_negative_variance = 0.0;
  std::vector<TraceEntry> trace;
};

EstimatorResult mc_estimate(const ForwardModel& model, const EstimatorConfig& config);
EstimatorResult mlmc_estimate(const ForwardModel& model, const TransferChain& chain, const EstimatorConfig& config);
EstimatorResult estimate(const ForwardModel& model, const TransferChain& chain, const EstimatorConfig& config);

/// N_l = max(1, round(N_coarse beta^-l)), l = 0..L.
std::vector<Index> sample_counts(int L, double n_coarse, double beta);

/// Discrete space-time norm ||v||^2 = sum_k dt v_k^T M v_k, optionally adding
/// the H1 seminorm term sum_k dt v_k^T K v_k.
class BochnerNorm {
public:
  BochnerNorm(const SparseOperator& mass, double dt);
  BochnerNorm(const SparseOperator& mass, const SparseOperator& stiffness, double dt);

  double squared(std::span<const double> v) const;
  double operator()(std::span<const double> v) const;
  double operator()(const SpaceTimeField& v) const { return (*this)(v.values); }

private:
  SparseOperator weight_;
  double dt_;
};

/// sqrt(K^-1 sum_j ||mean_j - reference||^2).
double rmse(std::span<const SpaceTimeField> estimates, const SpaceTimeField& reference, const BochnerNorm& norm);

struct WorkReport {
  std::vector<double> w_prime; ///< per-sample cost of one solve on level l
  std::vector<double> w_level; ///< W_l = W'_{l-1} + W'_l
  std::vector<Index> samples;  ///< N_l of the MLMC estimator
  Index mc_samples = 0;
  double w_mc = 0.0;
  double w_mlmc = 0.0;
  double gamma_d = 0.0;
};

/// Measured mode: W_MLMC = sum_l W_l N_l, W_MC = W'_L N_MC, gamma_d the mean of
/// log2(W'_{l+1} / W'_l).
WorkReport work_report(std::span<const double> w_prime, std::span<const Index> mlmc_samples, Index mc_samples);

/// Asymptotic accounting with controlled sample counts N_l = 2^(4 (L - l)):
/// W_MC = W'_L 2^(4L) and W_MLMC = sum_{l=0}^{L-1} W'_l 2^(4 (L - l)).
WorkReport asymptotic_work(std::span<const double> w_prime);
/// asymptotic_work with W'_l = 2^(gamma_d l).
WorkReport work_model(double gamma_d, int L);

} // namespace stmlmc
