#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stmlmc/estimators.hpp"
#include "stmlmc/forward_model.hpp"
#include "stmlmc/level_transfer.hpp"
#include "stmlmc/random_field.hpp"

namespace stmlmc {

struct GeometryConfig {
  int dim = 1;
  double extent = 1.0;
  int base_elements = 31;
  int levels = 3;
  double end_time = 0.64;
  int base_timesteps = 4;
};

struct EstimatorSettings {
  EstimatorKind kind = EstimatorKind::mlmc;
  int level = 3;
  std::vector<Index> samples; ///< explicit N (MC) or N_l (MLMC); empty selects the controlled rule
  double n_coarse = 0.0;      ///< <= 0 selects 2^(4L)
  double beta = 16.0;
  int repetitions = 5;
  std::uint64_t seed = 12345;
  int reference_level = 5;
  Index reference_samples = 16384;

  /// N_l actually used for `level` and `kind`.
  std::vector<Index> resolved_samples() const;
};

struct SchedulerSettings {
  int workers = 1;
  std::vector<int> pools;
  std::size_t memory_mb = 256;
};

struct OutputSettings {
  std::string dir = "out";
  bool vtk = true;
  std::vector<int> vtk_steps; ///< 1-based time steps; empty selects the final step
  bool timings = false;       ///< also write wall-clock timing and trace tables
};

/// Sectioned key-value experiment description. Every key has a default; the
/// defaults are the monodomain parameter set on the 1D interval hierarchy.
class ExperimentConfig {
public:
  ExperimentConfig();

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_stream(std::istream& in);

  /// "section.key" = value; throws ConfigError for unknown keys.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  /// Typed views; each throws ConfigError naming the offending field.
  GeometryConfig geometry() const;
  CovarianceModel covariance() const;
  KLOptions kl_options() const;
  bool kl_enabled() const;
  ProblemSpec problem() const;
  TransferOptions transfer() const;
  EstimatorSettings estimator() const;
  SchedulerSettings scheduler() const;
  OutputSettings output() const;

  /// Parses every section, raising the first validation error.
  void validate() const;

  /// Resolved "section.key = value" lines as '#' comments, without the
  /// scheduler section and the output directory.
  void write_provenance(std::ostream& out) const;
  /// Full INI dump.
  void write_ini(std::ostream& out) const;

private:
  std::map<std::string, std::string> values_;
};

} // namespace stmlmc
