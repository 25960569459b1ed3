#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mcct/matrix.hpp"

namespace mcct {

/// Probabilities below this are clamped before taking logs.
inline constexpr double kLogClamp = 1e-300;

/// Numerically safe softmax of one row: out may alias z.
void softmax_row(std::span<const double> z, std::span<double> out);

ProbMatrix softmax_rows(const LogitMatrix& z);

/// Mean negative log-likelihood of the true class.
double nll(const ProbMatrix& p, const LabelVector& y);

struct SortedRows {
  LogitMatrix sorted;  // ascending per row
  SortPermutation perm;
};

/// Ascending per-row sort; ties keep their original column order.
SortedRows sort_rows(const LogitMatrix& z);

/// Sorts a single row; perm receives original column indices in ascending order.
void sort_row(std::span<const double> z, std::span<std::uint32_t> perm);

/// Scatters each sorted row back to its original columns.
Matrix inverse_sort_rows(const Matrix& sorted, const SortPermutation& perm);
LogitMatrix inverse_sort_rows(const LogitMatrix& sorted, const SortPermutation& perm);

struct Tie {
  std::size_t row;
  double value;
  friend bool operator==(const Tie&, const Tie&) = default;
};

/// Every (row, value) pair where a value occurs more than once in its row.
/// Empty means all rows are pairwise distinct.
std::vector<Tie> validate_distinct(const LogitMatrix& z);

/// Index of the first maximum of each row.
LabelVector argmax_rows(const Matrix& x);
inline LabelVector argmax_rows(const LogitMatrix& z) { return argmax_rows(z.matrix()); }
inline LabelVector argmax_rows(const ProbMatrix& p) { return argmax_rows(p.matrix()); }

std::size_t argmax(std::span<const double> row) noexcept;

}  // namespace mcct
