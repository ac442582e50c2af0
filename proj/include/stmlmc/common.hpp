#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stmlmc {

/// Index type for nodes, elements and sparse-matrix rows/columns.
using Index = std::int32_t;

/// Spatial point; components beyond the spatial dimension are zero.
using Point = std::array<double, 3>;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: configuration values, CLI flags, operation arguments.
class ConfigError : public Error {
public:
  using Error::Error;
};

class MeshError : public Error {
public:
  using Error::Error;
};

class AssemblyError : public Error {
public:
  using Error::Error;
};

/// Diffusion coefficient not uniformly elliptic (non-positive node value or
/// a KL scaling that violates the worst-case perturbation bound).
class EllipticityError : public Error {
public:
  using Error::Error;
};

/// Nonlinear or linear solver failure. Carries the last residual when known.
class SolverError : public Error {
public:
  SolverError(const std::string& what, double last_residual = -1.0)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

private:
  double last_residual_;
};

} // namespace stmlmc
