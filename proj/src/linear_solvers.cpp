#include "stmlmc/linear_solvers.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <cmath>
#include <string>

namespace stmlmc {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void Ilu0::factor(const SparseOperator& A) {
  lu_ = A;
  const Index n = lu_.rows();
  const auto rp = lu_.row_offsets();
  const auto ci = lu_.column_indices();
  auto val = lu_.values();
  diag_.assign(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) diag_[i] = static_cast<Index>(lu_.find(i, i));

  std::vector<Index> where(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    if (diag_[i] < 0) throw SolverError("ILU(0): missing diagonal entry in row " + std::to_string(i));
    for (Index p = rp[i]; p < rp[i + 1]; ++p) where[ci[p]] = p;
    for (Index p = rp[i]; p < rp[i + 1] && ci[p] < i; ++p) {
      const Index k = ci[p];
      const double pivot = val[diag_[k]];
      if (pivot == 0.0) throw SolverError("ILU(0): zero pivot in row " + std::to_string(k));
      val[p] /= pivot;
      const double lik = val[p];
      for (Index q = diag_[k] + 1; q < rp[k + 1]; ++q) {
        const Index pos = where[ci[q]];
        if (pos >= 0) val[pos] -= lik * val[q];
      }
    }
    for (Index p = rp[i]; p < rp[i + 1]; ++p) where[ci[p]] = -1;
  }
}

void Ilu0::apply(std::span<const double> r, std::span<double> z) const {
  const Index n = lu_.rows();
  const auto rp = lu_.row_offsets();
  const auto ci = lu_.column_indices();
  const auto val = lu_.values();
  for (Index i = 0; i < n; ++i) {
    double s = r[i];
    for (Index p = rp[i]; p < diag_[i]; ++p) s -= val[p] * z[ci[p]];
    z[i] = s;
  }
  for (Index i = n - 1; i >= 0; --i) {
    double s = z[i];
    for (Index p = diag_[i] + 1; p < rp[i + 1]; ++p) s -= val[p] * z[ci[p]];
    z[i] = s / val[diag_[i]];
  }
}

GmresResult gmres(const SparseOperator& A, const Ilu0& preconditioner, std::span<const double> b,
                  std::span<double> x, const GmresOptions& options) {
  const std::size_t n = b.size();
  const int restart = std::max(1, options.restart);
  GmresResult result;

  std::vector<double> r(n);
  auto true_residual = [&]() {
    A.multiply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    return norm2(r);
  };

  double beta = true_residual();
  result.initial_residual_norm = beta;
  result.residual_norm = beta;
  const double target = std::max(options.rtol * beta, options.atol);
  if (beta <= target) {
    result.converged = true;
    return result;
  }

  std::vector<std::vector<double>> V(restart + 1, std::vector<double>(n));
  std::vector<std::vector<double>> Z(restart, std::vector<double>(n));
  std::vector<std::vector<double>> H(restart + 1, std::vector<double>(restart, 0.0));
  std::vector<double> cs(restart), sn(restart), g(restart + 1), y(restart);
  std::vector<double> w(n);

  while (result.iterations < options.max_iterations) {
    const double cycle_start = beta;
    for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;

    int k = 0;
    for (int j = 0; j < restart && result.iterations < options.max_iterations; ++j) {
      preconditioner.apply(V[j], Z[j]);
      A.multiply(Z[j], w);
      for (int i = 0; i <= j; ++i) {
        H[i][j] = dot(w, V[i]);
        for (std::size_t t = 0; t < n; ++t) w[t] -= H[i][j] * V[i][t];
      }
      H[j + 1][j] = norm2(w);
      for (int i = 0; i < j; ++i) {
        const double tmp = cs[i] * H[i][j] + sn[i] * H[i + 1][j];
        H[i + 1][j] = -sn[i] * H[i][j] + cs[i] * H[i + 1][j];
        H[i][j] = tmp;
      }
      const double denom = std::hypot(H[j][j], H[j + 1][j]);
      cs[j] = denom == 0.0 ? 1.0 : H[j][j] / denom;
      sn[j] = denom == 0.0 ? 0.0 : H[j + 1][j] / denom;
      const double h_next = H[j + 1][j];
      H[j][j] = denom;
      H[j + 1][j] = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];

      ++result.iterations;
      k = j + 1;
      if (std::abs(g[j + 1]) <= target || h_next == 0.0) break;
      for (std::size_t t = 0; t < n; ++t) V[j + 1][t] = w[t] / h_next;
    }

    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int l = i + 1; l < k; ++l) s -= H[i][l] * y[l];
      y[i] = s / H[i][i];
    }
    for (int i = 0; i < k; ++i)
      for (std::size_t t = 0; t < n; ++t) x[t] += y[i] * Z[i][t];

    beta = true_residual();
    result.residual_norm = beta;
    if (beta <= target) {
      result.converged = true;
      return result;
    }
    if (beta > 0.999 * cycle_start) {
      result.stagnated = true;
      return result;
    }
  }
  return result;
}

namespace {

Eigen::SparseMatrix<double> to_eigen(const SparseOperator& A) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(A.nnz());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index p = A.row_offsets()[i]; p < A.row_offsets()[i + 1]; ++p)
      t.emplace_back(i, A.column_indices()[p], A.values()[p]);
  Eigen::SparseMatrix<double> M(A.rows(), A.cols());
  M.setFromTriplets(t.begin(), t.end());
  M.makeCompressed();
  return M;
}

} // namespace

struct SparseLuSolver::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  Eigen::SparseMatrix<double> matrix;
  bool analyzed = false;
};

SparseLuSolver::SparseLuSolver() : impl_(std::make_unique<Impl>()) {}
SparseLuSolver::SparseLuSolver(const SparseOperator& A) : SparseLuSolver() { factor(A); }
SparseLuSolver::~SparseLuSolver() = default;
SparseLuSolver::SparseLuSolver(SparseLuSolver&&) noexcept = default;
SparseLuSolver& SparseLuSolver::operator=(SparseLuSolver&&) noexcept = default;

void SparseLuSolver::factor(const SparseOperator& A) {
  impl_->matrix = to_eigen(A);
  if (!impl_->analyzed) {
    impl_->lu.analyzePattern(impl_->matrix);
    impl_->analyzed = true;
  }
  impl_->lu.factorize(impl_->matrix);
  if (impl_->lu.info() != Eigen::Success) throw SolverError("sparse LU factorization failed");
}

void SparseLuSolver::solve(std::span<const double> b, std::span<double> x) const {
  Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
  Eigen::Map<Eigen::VectorXd> sol(x.data(), static_cast<Eigen::Index>(x.size()));
  sol = impl_->lu.solve(rhs);
}

struct CholeskySolver::Impl {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
};

CholeskySolver::CholeskySolver() : impl_(std::make_unique<Impl>()) {}
CholeskySolver::CholeskySolver(const SparseOperator& A) : CholeskySolver() {
  impl_->llt.compute(to_eigen(A));
  if (impl_->llt.info() != Eigen::Success) throw SolverError("Cholesky factorization failed (matrix not SPD)");
}
CholeskySolver::~CholeskySolver() = default;
CholeskySolver::CholeskySolver(CholeskySolver&&) noexcept = default;
CholeskySolver& CholeskySolver::operator=(CholeskySolver&&) noexcept = default;

void CholeskySolver::solve(std::span<const double> b, std::span<double> x) const {
  Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
  Eigen::Map<Eigen::VectorXd> sol(x.data(), static_cast<Eigen::Index>(x.size()));
  sol = impl_->llt.solve(rhs);
}

} // namespace stmlmc
