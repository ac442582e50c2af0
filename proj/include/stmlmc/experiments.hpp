#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stmlmc/config.hpp"
#include "stmlmc/estimators.hpp"
#include "stmlmc/forward_model.hpp"
#include "stmlmc/level_transfer.hpp"

namespace stmlmc {

/// Stream-tag offsets: plain runs use 0, repetition r uses (r + 1) * kRepetitionTagStride,
/// reference runs use kReferenceTagOffset.
inline constexpr std::uint32_t kRepetitionTagStride = 1024;
inline constexpr std::uint32_t kReferenceTagOffset = 1u << 20;

/// Hierarchy, KL expansion, forward model and transfer chain of one configuration.
struct Experiment {
  MeshHierarchy hierarchy;
  KLExpansion kl;
  std::unique_ptr<ForwardModel> model;
  TransferChain chain;
};

/// Builds everything up to `finest_level` (geometry.levels when negative).
std::unique_ptr<Experiment> make_experiment(const ExperimentConfig& config, int finest_level = -1);

/// Estimator settings shared by all runs of one experiment.
struct RunSettings {
  std::uint64_t seed = 12345;
  int workers = 1;
  std::vector<int> pools;
  std::size_t memory_budget = std::size_t{256} << 20;
};

RunSettings run_settings(const ExperimentConfig& config);

/// MC mean on `level` with N samples from the independent reference stream.
EstimatorResult reference_estimate(const Experiment& experiment, int level, Index samples, const RunSettings& run);

struct ControlledRow {
  EstimatorKind kind = EstimatorKind::mc;
  int level = 0;
  std::vector<Index> samples;
  double rmse = 0.0;
  double seconds_per_sample = 0.0; ///< mean measured solve time on `level`
};

struct ControlledStudy {
  std::vector<ControlledRow> rows;
  double slope_mc = 0.0;   ///< fitted slope of log2(RMSE) against level
  double slope_mlmc = 0.0;
  int reference_level = 0;
  Index reference_samples = 0;
  /// W'_l: mean seconds per solve on level l, pooled over every solve of the study.
  std::vector<double> cost_per_level;
};

/// MC with N_l = 2^(4l) and MLMC with N_coarse = 2^(4l), ratio beta, for
/// l = 0..L, each repeated `repetitions` times, RMSE against a reference mean.
ControlledStudy controlled_convergence(const Experiment& experiment, int L, int repetitions, double beta,
                                       const EstimatorResult& reference, const RunSettings& run);

/// Least-squares slope of y against x.
double fit_slope(std::span<const double> x, std::span<const double> y);

/// Runs a CLI subcommand; returns the process exit status.
int run_command(const std::string& command, const ExperimentConfig& config, std::ostream& log);

} // namespace stmlmc
