#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace mcct {

/// Dense row-major matrix of doubles. Rows are samples, columns are classes.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }

  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Pre-softmax classifier outputs. Every entry finite, at least one row and two classes.
class LogitMatrix {
 public:
  LogitMatrix() = default;
  explicit LogitMatrix(Matrix m);
  LogitMatrix(std::size_t n, std::size_t m, std::vector<double> data)
      : LogitMatrix(Matrix(n, m, std::move(data))) {}
  static LogitMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    return LogitMatrix(Matrix::from_rows(rows));
  }

  std::size_t n() const noexcept { return m_.rows(); }
  std::size_t m() const noexcept { return m_.cols(); }
  std::span<const double> row(std::size_t i) const noexcept { return m_.row(i); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }

  /// Rows selected by index, in the order given.
  LogitMatrix select_rows(std::span<const std::size_t> idx) const;

  friend bool operator==(const LogitMatrix&, const LogitMatrix&) = default;

 private:
  Matrix m_;
};

/// Row-stochastic matrix: entries in [0,1], rows sum to 1 within 1e-9.
class ProbMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-9;

  ProbMatrix() = default;
  explicit ProbMatrix(Matrix m);
  static ProbMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    return ProbMatrix(Matrix::from_rows(rows));
  }

  std::size_t n() const noexcept { return m_.rows(); }
  std::size_t m() const noexcept { return m_.cols(); }
  std::span<const double> row(std::size_t i) const noexcept { return m_.row(i); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }

  ProbMatrix select_rows(std::span<const std::size_t> idx) const;

  friend bool operator==(const ProbMatrix&, const ProbMatrix&) = default;

 private:
  Matrix m_;
};

/// Class indices, one per sample.
class LabelVector {
 public:
  using value_type = std::uint32_t;

  LabelVector() = default;
  explicit LabelVector(std::vector<value_type> labels) : labels_(std::move(labels)) {}
  LabelVector(std::initializer_list<value_type> labels) : labels_(labels) {}

  std::size_t size() const noexcept { return labels_.size(); }
  value_type operator[](std::size_t i) const noexcept { return labels_[i]; }
  auto begin() const noexcept { return labels_.begin(); }
  auto end() const noexcept { return labels_.end(); }
  const std::vector<value_type>& values() const noexcept { return labels_; }

  /// Throws InvariantError if any label is outside [0, m).
  void validate(std::size_t m) const;

  LabelVector select(std::span<const std::size_t> idx) const;

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::vector<value_type> labels_;
};

/// One permutation of {0..m-1} per row; perm(i, j) is the original column of
/// the j-th smallest entry of row i.
class SortPermutation {
 public:
  SortPermutation() = default;
  SortPermutation(std::size_t n, std::size_t m) : n_(n), m_(m), idx_(n * m) {}

  std::size_t n() const noexcept { return n_; }
  std::size_t m() const noexcept { return m_; }
  std::span<const std::uint32_t> row(std::size_t i) const noexcept {
    return {idx_.data() + i * m_, m_};
  }
  std::span<std::uint32_t> row(std::size_t i) noexcept { return {idx_.data() + i * m_, m_}; }

  friend bool operator==(const SortPermutation&, const SortPermutation&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<std::uint32_t> idx_;
};

}  // namespace mcct
