#include "mcct/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcct/error.hpp"
#include "mcct/kernels.hpp"
#include "mcct/parallel.hpp"

namespace mcct {

void softmax_row(std::span<const double> z, std::span<double> out) {
  const double shift = kernels::max(z);
  kernels::scalar_affine(z, 1.0, -shift, out);
  for (double& v : out) v = std::exp(v);
  kernels::scale(1.0 / kernels::sum(out), out);
}

ProbMatrix softmax_rows(const LogitMatrix& z) {
  Matrix p(z.n(), z.m());
  parallel::for_blocks(z.n(), parallel::kBlockRows, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) softmax_row(z.row(i), p.row(i));
  });
  return ProbMatrix(std::move(p));
}

double nll(const ProbMatrix& p, const LabelVector& y) {
  if (p.n() != y.size()) {
    throw DimensionError("nll: " + std::to_string(p.n()) + " rows but " +
                         std::to_string(y.size()) + " labels");
  }
  y.validate(p.m());
  double total = 0.0;
  for (std::size_t i = 0; i < p.n(); ++i) total -= std::log(std::max(p(i, y[i]), kLogClamp));
  return total / static_cast<double>(p.n());
}

void sort_row(std::span<const double> z, std::span<std::uint32_t> perm) {
  std::iota(perm.begin(), perm.end(), 0u);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return z[a] < z[b]; });
}

SortedRows sort_rows(const LogitMatrix& z) {
  Matrix sorted(z.n(), z.m());
  SortPermutation perm(z.n(), z.m());
  for (std::size_t i = 0; i < z.n(); ++i) {
    const auto src = z.row(i);
    auto p = perm.row(i);
    sort_row(src, p);
    auto dst = sorted.row(i);
    for (std::size_t j = 0; j < z.m(); ++j) dst[j] = src[p[j]];
  }
  return {LogitMatrix(std::move(sorted)), std::move(perm)};
}

Matrix inverse_sort_rows(const Matrix& sorted, const SortPermutation& perm) {
  if (sorted.rows() != perm.n() || sorted.cols() != perm.m()) {
    throw DimensionError("inverse_sort_rows: permutation shape does not match matrix");
  }
  Matrix out(sorted.rows(), sorted.cols());
  for (std::size_t i = 0; i < sorted.rows(); ++i) {
    const auto src = sorted.row(i);
    const auto p = perm.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < src.size(); ++j) dst[p[j]] = src[j];
  }
  return out;
}

LogitMatrix inverse_sort_rows(const LogitMatrix& sorted, const SortPermutation& perm) {
  return LogitMatrix(inverse_sort_rows(sorted.matrix(), perm));
}

std::vector<Tie> validate_distinct(const LogitMatrix& z) {
  std::vector<Tie> ties;
  std::vector<double> buf(z.m());
  for (std::size_t i = 0; i < z.n(); ++i) {
    const auto r = z.row(i);
    std::copy(r.begin(), r.end(), buf.begin());
    std::sort(buf.begin(), buf.end());
    for (std::size_t j = 1; j < buf.size(); ++j) {
      if (buf[j] == buf[j - 1] && (ties.empty() || ties.back().row != i || ties.back().value != buf[j])) {
        ties.push_back({i, buf[j]});
      }
    }
  }
  return ties;
}

std::size_t argmax(std::span<const double> row) noexcept {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

LabelVector argmax_rows(const Matrix& x) {
  std::vector<LabelVector::value_type> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out[i] = static_cast<LabelVector::value_type>(argmax(x.row(i)));
  }
  return LabelVector(std::move(out));
}

}  // namespace mcct
