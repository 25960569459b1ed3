#pragma once

// Constrained fitting of rank-wise monotone maps.
//
// Two interchangeable strategies solve the same convex-in-logits problem:
//
//  * ProjectedNewton writes w and b as a floor plus cumulative sums of
//    non-negative increments, which turns the ordering constraints into simple
//    bounds, and runs a two-metric projected Newton method with Levenberg
//    damping on the exact Hessian.
//  * ProjectedGradient works on (w, b) directly with spectral step lengths and
//    a non-monotone line search; the projection onto the ordered set is
//    pool-adjacent-violators followed by the w floor.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "mcct/matrix.hpp"
#include "mcct/transform.hpp"

namespace mcct {

enum class SolverStrategy { ProjectedNewton, ProjectedGradient };

std::string_view strategy_name(SolverStrategy s) noexcept;
SolverStrategy parse_strategy(std::string_view name);

struct SolverConfig {
  int max_iterations = 500;
  double stationarity_tol = 1e-8;
  double constraint_tol = 1e-9;
  double w_floor = 1e-8;
  SolverStrategy strategy = SolverStrategy::ProjectedNewton;

  /// Throws InvariantError for non-positive tolerances or iteration limits.
  void validate() const;

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct FitResult {
  MonotoneParams params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = false;
  double constraint_violation = 0.0;
  double stationarity = 0.0;  // projected-gradient infinity norm at the returned point
  std::size_t samples_used = 0;
  std::size_t dropped = 0;    // samples excluded by top-k truncation
};

/// Starting point: Direct uses w = linspace(0, 1, k) with w_1 lifted to the
/// floor, Inverse uses w = 1; b = 0 for both.
MonotoneParams init_params(Mode mode, std::size_t k, std::size_t m, double w_floor = 1e-8);

/// Fits a rank-wise map on the k largest sorted logits of each row.
/// Deterministic: no randomness anywhere on this path.
FitResult fit_mcct(const LogitMatrix& z, const LabelVector& y, Mode mode, std::size_t k,
                   const SolverConfig& cfg = {});

// Building blocks, exposed for the baselines and for tests.

/// Value, gradient and (when hessian != nullptr) Hessian of a smooth function.
using SmoothFn = std::function<double(std::span<const double> x, std::span<double> grad,
                                      Matrix* hessian)>;

struct SolveResult {
  std::vector<double> x;
  double value = 0.0;
  double initial_value = 0.0;
  int iterations = 0;
  bool converged = false;
  double stationarity = 0.0;
};

struct SolveOptions {
  int max_iterations = 500;
  double stationarity_tol = 1e-8;
  /// Coordinates held at their start value, for directions the objective
  /// does not depend on (a common shift of softmax inputs). Newton only.
  std::vector<std::size_t> pinned;
};

/// min f(x) subject to x >= lower (use -infinity for free coordinates).
/// Converged means the projected gradient norm and the Newton decrement on the
/// free coordinates are both at most stationarity_tol.
/// Returns the best iterate found, never worse than x0.
SolveResult minimize_bounded_newton(const SmoothFn& f, std::vector<double> x0,
                                    std::span<const double> lower, const SolveOptions& opts);

/// Euclidean projection onto a closed convex set, in place.
using Projection = std::function<void(std::span<double>)>;

/// Spectral projected gradient. Only value and gradient are requested.
SolveResult minimize_projected_gradient(const SmoothFn& f, std::vector<double> x0,
                                        const Projection& project, const SolveOptions& opts);

/// Least-squares projection onto non-decreasing (or non-increasing) sequences,
/// then every entry raised to at least `floor`.
void project_monotone(std::span<double> x, bool increasing,
                      double floor = -std::numeric_limits<double>::infinity());

/// Euclidean projection onto the probability simplex.
void project_simplex(std::span<double> x);

}  // namespace mcct
