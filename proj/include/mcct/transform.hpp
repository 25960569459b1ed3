#pragma once

// Rank-wise monotone calibration maps.
//
// Each logit row is sorted ascending, the j-th smallest retained logit s_j is
// mapped to s_j * w_j + b_j (Direct) or s_j / w_j + b_j (Inverse), and the
// result is scattered back to the original columns. With k < m retained ranks
// the k largest logits use (w, b) and every lower logit uses (w_1, b_1).
//
// Order preservation holds for any pair whose larger logit is non-negative;
// in particular the argmax is preserved whenever the row maximum is >= 0.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mcct/core.hpp"
#include "mcct/matrix.hpp"

namespace mcct {

enum class Mode { Direct, Inverse };

/// Fitted parameters of a rank-wise map. k = w.size() = b.size() <= m.
struct MonotoneParams {
  Mode mode = Mode::Direct;
  std::size_t m = 0;
  std::vector<double> w;
  std::vector<double> b;

  std::size_t k() const noexcept { return w.size(); }

  /// w = 1, b = 0: leaves logits untouched.
  static MonotoneParams identity(Mode mode, std::size_t m, std::size_t k);

  friend bool operator==(const MonotoneParams&, const MonotoneParams&) = default;
};

/// Consecutive differences that the mode constrains to be >= 0.
/// Direct: w_{i+1} - w_i. Inverse: w_i - w_{i+1}. Both modes: b_{i+1} - b_i.
struct ConstraintVectors {
  std::vector<double> w;
  std::vector<double> b;
};

ConstraintVectors constraint_vectors(const MonotoneParams& params);

/// max(0, -min constraint, w_floor - min w). Zero for feasible params.
double constraint_violation(const MonotoneParams& params, double w_floor = 0.0);

/// Throws InvariantError unless the params satisfy their mode's ordering,
/// positivity and finiteness invariants, and 1 <= k <= m.
void validate(const MonotoneParams& params);

/// Full-rank map (requires k == m).
LogitMatrix apply_map(const LogitMatrix& z, const MonotoneParams& params);

/// Truncated map (requires 2 <= k <= m; k == m gives apply_map).
LogitMatrix apply_map_topk(const LogitMatrix& z, const MonotoneParams& params);

/// Maps one row into `out`; `perm` and `sorted_scratch` are scratch of length m.
void apply_row(std::span<const double> z, const MonotoneParams& params,
               std::span<std::uint32_t> perm, std::span<double> sorted_scratch,
               std::span<double> out);

/// Fitting data for a row-wise affine softmax model: x holds one row per
/// retained sample (for MCCT the top-k sorted logits), target the column of
/// the true class within that row.
struct RankedData {
  Matrix x;
  std::vector<std::uint32_t> target;
  std::size_t dropped = 0;  // samples whose true class fell outside the retained ranks
};

/// Keeps the k largest sorted logits of each row. Samples whose true class is
/// not among them are dropped and counted.
RankedData truncate_training_set(const LogitMatrix& z_sorted, const SortPermutation& perm,
                                 const LabelVector& y, std::size_t k);

/// sort_rows followed by truncate_training_set.
RankedData prepare_ranked(const LogitMatrix& z, const LabelVector& y, std::size_t k);

/// Raw logits with class labels as targets (no sorting), for per-class models.
RankedData prepare_unsorted(const LogitMatrix& z, const LabelVector& y);

struct Objective {
  double loss = 0.0;
  std::vector<double> grad_w;
  std::vector<double> grad_b;
  /// Hessian over (w, b) stacked, 2k x 2k, when requested.
  std::optional<Matrix> hessian;
};

/// Mean NLL of softmax(x_i * w + b) (Direct) or softmax(x_i / w + b) (Inverse)
/// against each row's target, with gradients and optionally the Hessian.
/// Rows are processed in fixed blocks so the result does not depend on the
/// thread count.
Objective evaluate_affine(const RankedData& data, Mode mode, std::span<const double> w,
                          std::span<const double> b, bool with_hessian);

/// Fitting objective of a rank-wise map with gradients: mean NLL of the softmax
/// over the k retained ranks, on samples whose true class is among them. For
/// k == m this is nll(softmax_rows(apply_map(z, params)), y).
Objective objective_and_gradient(const LogitMatrix& z, const LabelVector& y,
                                 const MonotoneParams& params);

}  // namespace mcct
