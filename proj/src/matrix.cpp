#include "mcct/matrix.hpp"

#include <cmath>
#include <sstream>

#include "mcct/error.hpp"

namespace mcct {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("matrix data has " + std::to_string(data_.size()) +
                         " values, expected " + std::to_string(rows_ * cols_));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(n * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw DimensionError("ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Matrix(n, m, std::move(data));
}

LogitMatrix::LogitMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() < 1) throw InvariantError("logit matrix needs at least one row");
  if (m_.cols() < 2) throw InvariantError("logit matrix needs at least two classes");
  const auto v = m_.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw InvariantError("non-finite logit at row " + std::to_string(i / m_.cols()) +
                           ", column " + std::to_string(i % m_.cols()));
    }
  }
}

LogitMatrix LogitMatrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), m());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto src = row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return LogitMatrix(std::move(out));
}

ProbMatrix::ProbMatrix(Matrix m) : m_(std::move(m)) {
  for (std::size_t i = 0; i < m_.rows(); ++i) {
    double total = 0.0;
    for (double p : m_.row(i)) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw InvariantError("probability outside [0,1] in row " + std::to_string(i));
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kRowSumTolerance) {
      std::ostringstream msg;
      msg << "probability row " << i << " sums to " << total;
      throw InvariantError(msg.str());
    }
  }
}

ProbMatrix ProbMatrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), m());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto src = row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return ProbMatrix(std::move(out));
}

void LabelVector::validate(std::size_t m) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= m) {
      throw InvariantError("label " + std::to_string(labels_[i]) + " at sample " +
                           std::to_string(i) + " is outside [0, " + std::to_string(m) + ")");
    }
  }
}

LabelVector LabelVector::select(std::span<const std::size_t> idx) const {
  std::vector<value_type> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels_[i]);
  return LabelVector(std::move(out));
}

}  // namespace mcct
