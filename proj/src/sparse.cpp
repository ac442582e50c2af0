#include "stmlmc/sparse.hpp"

#include <algorithm>
#include <cmath>

namespace stmlmc {

SparseOperator::SparseOperator(Index rows, Index cols, std::vector<Index> row_offsets,
                               std::vector<Index> column_indices, std::vector<double> values)
    : rows_(rows), cols_(cols), row_offsets_(std::move(row_offsets)),
      column_indices_(std::move(column_indices)), values_(std::move(values)) {
  if (row_offsets_.size() != static_cast<std::size_t>(rows_) + 1 ||
      column_indices_.size() != values_.size() ||
      static_cast<std::size_t>(row_offsets_.back()) != values_.size())
    throw Error("SparseOperator: inconsistent compressed-row arrays");
}

SparseOperator SparseOperator::from_triplets(Index rows, Index cols, std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Index> offsets(static_cast<std::size_t>(rows) + 1, 0);
  std::vector<Index> columns;
  std::vector<double> values;
  columns.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const Triplet& t = triplets[k];
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
      throw Error("SparseOperator: triplet index out of range");
    if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
      values.back() += t.value;
      continue;
    }
    columns.push_back(t.col);
    values.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (Index i = 0; i < rows; ++i) offsets[i + 1] += offsets[i];
  return SparseOperator(rows, cols, std::move(offsets), std::move(columns), std::move(values));
}

SparseOperator SparseOperator::identity(Index n) {
  std::vector<Index> offsets(static_cast<std::size_t>(n) + 1);
  std::vector<Index> columns(static_cast<std::size_t>(n));
  for (Index i = 0; i <= n; ++i) offsets[i] = i;
  for (Index i = 0; i < n; ++i) columns[i] = i;
  return SparseOperator(n, n, std::move(offsets), std::move(columns), std::vector<double>(n, 1.0));
}

std::ptrdiff_t SparseOperator::find(Index i, Index j) const {
  const auto begin = column_indices_.begin() + row_offsets_[i];
  const auto end = column_indices_.begin() + row_offsets_[i + 1];
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return -1;
  return it - column_indices_.begin();
}

double SparseOperator::at(Index i, Index j) const {
  const auto pos = find(i, j);
  return pos < 0 ? 0.0 : values_[static_cast<std::size_t>(pos)];
}

void SparseOperator::multiply(std::span<const double> x, std::span<double> y) const {
  for (Index i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (Index p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) s += values_[p] * x[column_indices_[p]];
    y[i] = s;
  }
}

void SparseOperator::multiply_add(std::span<const double> x, std::span<double> y, double alpha) const {
  for (Index i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (Index p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) s += values_[p] * x[column_indices_[p]];
    y[i] += alpha * s;
  }
}

std::vector<double> SparseOperator::operator*(std::span<const double> x) const {
  std::vector<double> y(static_cast<std::size_t>(rows_));
  multiply(x, y);
  return y;
}

SparseOperator SparseOperator::transpose() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (Index i = 0; i < rows_; ++i)
    for (Index p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) t.push_back({column_indices_[p], i, values_[p]});
  return from_triplets(cols_, rows_, std::move(t));
}

std::vector<double> SparseOperator::row_sums() const {
  std::vector<double> s(static_cast<std::size_t>(rows_), 0.0);
  for (Index i = 0; i < rows_; ++i)
    for (Index p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) s[i] += values_[p];
  return s;
}

bool SparseOperator::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  double scale = 0.0;
  for (double v : values_) scale = std::max(scale, std::abs(v));
  for (Index i = 0; i < rows_; ++i)
    for (Index p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p)
      if (std::abs(values_[p] - at(column_indices_[p], i)) > tol * std::max(1.0, scale)) return false;
  return true;
}

bool SparseOperator::same_pattern(const SparseOperator& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ && row_offsets_ == other.row_offsets_ &&
         column_indices_ == other.column_indices_;
}

SparseOperator add(double a, const SparseOperator& A, double b, const SparseOperator& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw Error("add: dimension mismatch");
  if (A.same_pattern(B)) {
    std::vector<double> values(A.nnz());
    for (std::size_t k = 0; k < values.size(); ++k) values[k] = a * A.values()[k] + b * B.values()[k];
    return SparseOperator(A.rows(), A.cols(), {A.row_offsets().begin(), A.row_offsets().end()},
                          {A.column_indices().begin(), A.column_indices().end()}, std::move(values));
  }
  std::vector<Triplet> t;
  t.reserve(A.nnz() + B.nnz());
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index p = A.row_offsets()[i]; p < A.row_offsets()[i + 1]; ++p)
      t.push_back({i, A.column_indices()[p], a * A.values()[p]});
    for (Index p = B.row_offsets()[i]; p < B.row_offsets()[i + 1]; ++p)
      t.push_back({i, B.column_indices()[p], b * B.values()[p]});
  }
  return SparseOperator::from_triplets(A.rows(), A.cols(), std::move(t));
}

std::vector<double> to_dense(const SparseOperator& A) {
  std::vector<double> d(static_cast<std::size_t>(A.rows()) * A.cols(), 0.0);
  for (Index i = 0; i < A.rows(); ++i)
    for (Index p = A.row_offsets()[i]; p < A.row_offsets()[i + 1]; ++p)
      d[static_cast<std::size_t>(i) * A.cols() + A.column_indices()[p]] = A.values()[p];
  return d;
}

} // namespace stmlmc
