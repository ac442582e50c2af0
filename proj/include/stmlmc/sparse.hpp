#pragma once

#include <span>
#include <vector>

#include "stmlmc/common.hpp"

namespace stmlmc {

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Compressed-row sparse matrix with sorted, unique column indices per row.
class SparseOperator {
public:
  SparseOperator() = default;
  SparseOperator(Index rows, Index cols, std::vector<Index> row_offsets,
                 std::vector<Index> column_indices, std::vector<double> values);

  /// Duplicate (row, col) entries are summed.
  static SparseOperator from_triplets(Index rows, Index cols, std::vector<Triplet> triplets);
  static SparseOperator identity(Index n);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const Index> row_offsets() const { return row_offsets_; }
  std::span<const Index> column_indices() const { return column_indices_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Position of (i, j) in the value array, or -1 when structurally zero.
  std::ptrdiff_t find(Index i, Index j) const;
  double at(Index i, Index j) const;

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  /// y += alpha * A x
  void multiply_add(std::span<const double> x, std::span<double> y, double alpha = 1.0) const;
  std::vector<double> operator*(std::span<const double> x) const;

  SparseOperator transpose() const;
  std::vector<double> row_sums() const;
  bool is_symmetric(double tol) const;
  bool same_pattern(const SparseOperator& other) const;

private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_offsets_{0};
  std::vector<Index> column_indices_;
  std::vector<double> values_;
};

/// a*A + b*B on the union of both sparsity patterns.
SparseOperator add(double a, const SparseOperator& A, double b, const SparseOperator& B);

/// Dense copy, row-major, for small test-size matrices.
std::vector<double> to_dense(const SparseOperator& A);

} // namespace stmlmc
