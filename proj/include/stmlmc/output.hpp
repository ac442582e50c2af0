#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "stmlmc/config.hpp"
#include "stmlmc/estimators.hpp"
#include "stmlmc/mesh_hierarchy.hpp"

namespace stmlmc {

/// Formats doubles with round-trip precision.
std::string format_double(double v);

/// Creates `dir` (and parents) if needed.
std::filesystem::path ensure_directory(const std::string& dir);

/// Provenance header: resolved configuration and master seed as '#' lines.
void write_header(std::ostream& out, const ExperimentConfig& config, std::uint64_t seed, const std::string& what);

/// Per-level estimator table (deterministic columns only).
void write_level_table(std::ostream& out, const EstimatorResult& result);
/// Per-level timing table.
void write_timing_table(std::ostream& out, const EstimatorResult& result);

/// One legacy-VTK file per requested 1-based time step: <dir>/<prefix>_step<k>.vtk.
void write_field_steps(const std::filesystem::path& dir, const std::string& prefix, const LevelMesh& mesh,
                       const SpaceTimeField& field, std::span<const int> steps, const std::string& title);

} // namespace stmlmc
