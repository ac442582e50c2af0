#pragma once

#include <memory>
#include <span>
#include <vector>

#include "stmlmc/sparse.hpp"

namespace stmlmc {

/// Zero-fill incomplete LU factorization on the pattern of A.
class Ilu0 {
public:
  Ilu0() = default;
  explicit Ilu0(const SparseOperator& A) { factor(A); }

  void factor(const SparseOperator& A);
  /// z = (LU)^{-1} r
  void apply(std::span<const double> r, std::span<double> z) const;

private:
  SparseOperator lu_;
  std::vector<Index> diag_;
};

struct GmresOptions {
  int restart = 30;
  double rtol = 1e-10;
  double atol = 1e-10;
  int max_iterations = 3000;
};

struct GmresResult {
  int iterations = 0;
  double residual_norm = 0.0;
  double initial_residual_norm = 0.0;
  bool converged = false;
  bool stagnated = false;
};

/// Right-preconditioned restarted GMRES with modified Gram-Schmidt. Stops at
/// ||b - Ax|| <= max(rtol ||b - A x0||, atol). Reports stagnation when a full
/// restart cycle fails to reduce the residual.
GmresResult gmres(const SparseOperator& A, const Ilu0& preconditioner, std::span<const double> b,
                  std::span<double> x, const GmresOptions& options);

/// Sparse direct LU solver (general matrices).
class SparseLuSolver {
public:
  SparseLuSolver();
  explicit SparseLuSolver(const SparseOperator& A);
  ~SparseLuSolver();
  SparseLuSolver(SparseLuSolver&&) noexcept;
  SparseLuSolver& operator=(SparseLuSolver&&) noexcept;

  void factor(const SparseOperator& A);
  void solve(std::span<const double> b, std::span<double> x) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Sparse Cholesky solver for symmetric positive definite matrices.
class CholeskySolver {
public:
  CholeskySolver();
  explicit CholeskySolver(const SparseOperator& A);
  ~CholeskySolver();
  CholeskySolver(CholeskySolver&&) noexcept;
  CholeskySolver& operator=(CholeskySolver&&) noexcept;

  void solve(std::span<const double> b, std::span<double> x) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double norm2(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

} // namespace stmlmc
