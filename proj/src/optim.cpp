#include "mcct/optim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <limits>
#include <set>

#include "mcct/error.hpp"

namespace mcct {

std::string_view strategy_name(SolverStrategy s) noexcept {
  return s == SolverStrategy::ProjectedNewton ? "projected-newton" : "projected-gradient";
}

SolverStrategy parse_strategy(std::string_view name) {
  if (name == "projected-newton" || name == "newton") return SolverStrategy::ProjectedNewton;
  if (name == "projected-gradient" || name == "spg") return SolverStrategy::ProjectedGradient;
  throw InvariantError("unknown solver strategy '" + std::string(name) + "'");
}

void SolverConfig::validate() const {
  if (max_iterations < 1) throw InvariantError("max_iterations must be >= 1");
  if (!(stationarity_tol > 0.0)) throw InvariantError("stationarity_tol must be > 0");
  if (!(constraint_tol > 0.0)) throw InvariantError("constraint_tol must be > 0");
  if (!(w_floor > 0.0)) throw InvariantError("w_floor must be > 0");
}

MonotoneParams init_params(Mode mode, std::size_t k, std::size_t m, double w_floor) {
  if (k < 2) throw InvariantError("init_params needs k >= 2");
  MonotoneParams p{mode, m, std::vector<double>(k, 1.0), std::vector<double>(k, 0.0)};
  if (mode == Mode::Direct) {
    for (std::size_t i = 0; i < k; ++i) {
      p.w[i] = static_cast<double>(i) / static_cast<double>(k - 1);
    }
    p.w[0] = std::max(p.w[0], w_floor);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Projections

void project_monotone(std::span<double> x, bool increasing, double floor) {
  const std::size_t n = x.size();
  if (n == 0) return;
  const double sign = increasing ? 1.0 : -1.0;
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  sums.reserve(n);
  counts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    sums.push_back(sign * x[i]);
    counts.push_back(1);
    while (sums.size() > 1) {
      const std::size_t t = sums.size() - 1;
      const double prev = sums[t - 1] / static_cast<double>(counts[t - 1]);
      const double last = sums[t] / static_cast<double>(counts[t]);
      if (prev <= last) break;
      sums[t - 1] += sums[t];
      counts[t - 1] += counts[t];
      sums.pop_back();
      counts.pop_back();
    }
  }
  std::size_t pos = 0;
  for (std::size_t blk = 0; blk < sums.size(); ++blk) {
    const double v = sign * (sums[blk] / static_cast<double>(counts[blk]));
    for (std::size_t c = 0; c < counts[blk]; ++c) x[pos++] = std::max(v, floor);
  }
}

void project_simplex(std::span<double> x) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cumulative += sorted[i];
    const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - candidate > 0.0) theta = candidate;
  }
  for (double& v : x) v = std::max(v - theta, 0.0);
}

// ---------------------------------------------------------------------------
// Projected Newton on simple bounds

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double projected_gradient_norm(std::span<const double> x, std::span<const double> g,
                               std::span<const double> lower, const std::vector<bool>& pinned = {}) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!pinned.empty() && pinned[i]) continue;
    const double stepped = std::max(lower[i], x[i] - g[i]);
    worst = std::max(worst, std::abs(x[i] - stepped));
  }
  return worst;
}

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

// Allowance for rounding noise in the objective when comparing two nearby
// iterates; without it Newton stalls one step short of the tolerance.
double noise_floor(double f) { return 1e-15 * (1.0 + std::abs(f)); }

}  // namespace

SolveResult minimize_bounded_newton(const SmoothFn& f, std::vector<double> x0,
                                    std::span<const double> lower, const SolveOptions& opts) {
  const std::size_t n = x0.size();
  if (lower.size() != n) throw DimensionError("bounds and start point differ in length");
  for (std::size_t i = 0; i < n; ++i) x0[i] = std::max(x0[i], lower[i]);
  std::vector<bool> pinned(n, false);
  for (std::size_t i : opts.pinned) {
    if (i >= n) throw DimensionError("pinned coordinate out of range");
    pinned[i] = true;
  }

  std::vector<double> x = x0, g(n), xn(n), gn(n), d(n);
  Matrix h(n, n), hn(n, n);
  double fx = f(x, g, &h);

  SolveResult out;
  out.initial_value = fx;
  double f0 = fx;
  double pg0 = projected_gradient_norm(x, g, lower, pinned);
  double pg = pg0;

  // Converged needs a small projected gradient and a small Newton decrement.
  // The decrement estimates the remaining decrease and catches flat
  // directions where the gradient is tiny long before the optimum.
  bool stationary = false;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    pg = projected_gradient_norm(x, g, lower, pinned);

    const double eps = std::min(1e-6, pg);
    std::vector<std::size_t> free_idx;
    std::vector<bool> active(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      if (pinned[i]) continue;
      if (std::isfinite(lower[i]) && x[i] - lower[i] <= eps && g[i] > 0.0) {
        active[i] = true;
      } else {
        free_idx.push_back(i);
      }
    }

    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    Eigen::MatrixXd hf(nf, nf);
    Eigen::VectorXd gf(nf);
    double max_diag = 1.0;
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf(a) = g[free_idx[a]];
      for (Eigen::Index b = 0; b < nf; ++b) hf(a, b) = h(free_idx[a], free_idx[b]);
      max_diag = std::max(max_diag, std::abs(hf(a, a)));
    }
    // Symmetric diagonal scaling keeps the factorization accurate when
    // curvatures differ by many orders of magnitude.
    Eigen::VectorXd scale(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      const double diag = std::abs(hf(a, a));
      scale(a) = diag > 0.0 ? 1.0 / std::sqrt(diag) : 1.0;
    }
    const Eigen::MatrixXd hs = scale.asDiagonal() * hf * scale.asDiagonal();
    const Eigen::VectorXd gs = scale.cwiseProduct(gf);
    Eigen::VectorXd df = -gf;
    // Plain Newton first; damping only when the factorization fails.
    double lambda = 0.0;
    bool solved = false;
    for (int attempt = 0; attempt < 31 && nf > 0; ++attempt) {
      Eigen::MatrixXd damped = hs;
      damped.diagonal().array() += lambda;
      Eigen::LLT<Eigen::MatrixXd> llt(damped);
      if (llt.info() == Eigen::Success) {
        Eigen::VectorXd sol = scale.cwiseProduct(llt.solve(-gs));
        if (sol.allFinite() && sol.dot(gf) <= 0.0) {
          df = sol;
          solved = true;
          break;
        }
      }
      lambda = lambda == 0.0 ? 1e-10 : 10.0 * lambda;
    }
    if (!solved) df = -gf / max_diag;
    const double decrement = solved ? -0.5 * df.dot(gf) : std::numeric_limits<double>::infinity();
    if (pg <= opts.stationarity_tol && (nf == 0 || decrement <= opts.stationarity_tol)) {
      stationary = true;
      break;
    }

    std::fill(d.begin(), d.end(), 0.0);
    for (Eigen::Index a = 0; a < nf; ++a) d[free_idx[a]] = df(a);
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) d[i] = -g[i] / std::max(h(i, i), 1e-12);
    }

    bool accepted = false;
    double alpha = 1.0;
    double fn = 0.0;
    bool have_hessian = false;
    for (int ls = 0; ls < kMaxBacktracks; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = std::max(lower[i], x[i] + alpha * d[i]);
      std::vector<double> step(n);
      for (std::size_t i = 0; i < n; ++i) step[i] = xn[i] - x[i];
      const double decrease = dot(g, step);
      if (decrease < 0.0) {
        have_hessian = ls == 0;
        fn = f(xn, gn, have_hessian ? &hn : nullptr);
        if (std::isfinite(fn) && fn <= fx + kArmijo * decrease + noise_floor(fx)) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    x.swap(xn);
    g.swap(gn);
    fx = fn;
    if (have_hessian) {
      std::swap(h, hn);
    } else {
      fx = f(x, g, &h);
    }
  }
  pg = projected_gradient_norm(x, g, lower, pinned);

  // The noise allowance above can leave a near-optimal start marginally
  // better than the final iterate; never return something worse than x0.
  if (fx > f0) {
    x = x0;
    fx = f0;
    pg = pg0;
  }
  out.x = std::move(x);
  out.value = fx;
  out.iterations = it;
  out.stationarity = pg;
  out.converged = stationary;
  return out;
}

// ---------------------------------------------------------------------------
// Spectral projected gradient

SolveResult minimize_projected_gradient(const SmoothFn& f, std::vector<double> x0,
                                        const Projection& project, const SolveOptions& opts) {
  constexpr std::size_t kMemory = 10;
  constexpr double kStepMin = 1e-12;
  constexpr double kStepMax = 1e12;
  const std::size_t n = x0.size();

  std::vector<double> x = std::move(x0);
  project(x);
  std::vector<double> g(n), xn(n), gn(n), d(n), trial(n);
  double fx = f(x, g, nullptr);

  SolveResult out;
  out.initial_value = fx;
  std::vector<double> best_x = x;
  double best_f = fx;

  const auto pg_norm = [&](std::span<const double> at, std::span<const double> grad) {
    for (std::size_t i = 0; i < n; ++i) trial[i] = at[i] - grad[i];
    project(trial);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(trial[i] - at[i]));
    return worst;
  };

  double pg = pg_norm(x, g);
  double step = pg > 0.0 ? std::clamp(1.0 / pg, kStepMin, kStepMax) : 1.0;
  std::deque<double> history{fx};

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (pg <= opts.stationarity_tol) break;

    for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] - step * g[i];
    project(trial);
    for (std::size_t i = 0; i < n; ++i) d[i] = trial[i] - x[i];
    const double gd = dot(g, d);
    const double reference = *std::max_element(history.begin(), history.end());

    double t = 1.0;
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < kMaxBacktracks; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + t * d[i];
      project(xn);  // repairs last-ulp ordering slips of the convex combination
      fn = f(xn, gn, nullptr);
      if (std::isfinite(fn) && fn <= reference + kArmijo * t * gd + noise_floor(reference)) {
        accepted = true;
        break;
      }
      const double denom = fn - fx - t * gd;
      double t_new = denom > 0.0 ? -0.5 * t * t * gd / denom : 0.5 * t;
      if (!std::isfinite(t_new) || t_new < 0.1 * t || t_new > 0.9 * t) t_new = 0.5 * t;
      t = t_new;
    }
    if (!accepted) break;

    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = xn[i] - x[i];
      const double yv = gn[i] - g[i];
      ss += s * s;
      sy += s * yv;
    }
    step = sy > 0.0 ? std::clamp(ss / sy, kStepMin, kStepMax) : kStepMax;

    x.swap(xn);
    g.swap(gn);
    fx = fn;
    history.push_back(fx);
    if (history.size() > kMemory) history.pop_front();
    pg = pg_norm(x, g);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }

  // Report the best point; its stationarity is what the caller gets.
  if (best_f < fx) {
    x = best_x;
    fx = f(x, g, nullptr);
    pg = pg_norm(x, g);
  }
  out.x = std::move(x);
  out.value = fx;
  out.iterations = it;
  out.stationarity = pg;
  out.converged = pg <= opts.stationarity_tol;
  return out;
}

// ---------------------------------------------------------------------------
// Rank-wise map fitting

namespace {

// Coordinates for the bound-constrained form: x = [u; v] with
//   Direct  w_i = floor + sum_{j<=i} u_j
//   Inverse w_i = floor + sum_{j>=i} u_j
//   b_i = sum_{j<=i} v_j
// u >= 0, v_1 free, v_j >= 0 for j >= 2.
struct Reparam {
  Mode mode;
  std::size_t k;
  double floor;

  void to_params(std::span<const double> x, std::span<double> w, std::span<double> b) const {
    const auto u = x.first(k);
    const auto v = x.subspan(k);
    if (mode == Mode::Direct) {
      w[0] = floor + u[0];
      for (std::size_t i = 1; i < k; ++i) w[i] = w[i - 1] + u[i];
    } else {
      w[k - 1] = floor + u[k - 1];
      for (std::size_t i = k - 1; i-- > 0;) w[i] = w[i + 1] + u[i];
    }
    b[0] = v[0];
    for (std::size_t i = 1; i < k; ++i) b[i] = b[i - 1] + v[i];
  }

  std::vector<double> from_params(std::span<const double> w, std::span<const double> b) const {
    std::vector<double> x(2 * k);
    if (mode == Mode::Direct) {
      x[0] = w[0] - floor;
      for (std::size_t i = 1; i < k; ++i) x[i] = w[i] - w[i - 1];
    } else {
      x[k - 1] = w[k - 1] - floor;
      for (std::size_t i = 0; i + 1 < k; ++i) x[i] = w[i] - w[i + 1];
    }
    x[k] = b[0];
    for (std::size_t i = 1; i < k; ++i) x[k + i] = b[i] - b[i - 1];
    return x;
  }

  std::vector<double> lower() const {
    std::vector<double> lo(2 * k, 0.0);
    lo[k] = -std::numeric_limits<double>::infinity();
    return lo;
  }

  // Transposed Jacobian: suffix sums for cumulative-from-the-left blocks,
  // prefix sums for the Inverse w block.
  bool w_suffix() const { return mode == Mode::Direct; }

  static void cumulate(std::span<double> v, bool suffix) {
    if (suffix) {
      for (std::size_t i = v.size() - 1; i-- > 0;) v[i] += v[i + 1];
    } else {
      for (std::size_t i = 1; i < v.size(); ++i) v[i] += v[i - 1];
    }
  }

  void gradient_to_x(std::span<double> g) const {
    cumulate(g.first(k), w_suffix());
    cumulate(g.subspan(k), true);
  }

  void hessian_to_x(Matrix& h) const {
    const std::size_t dim = 2 * k;
    std::vector<double> col(dim);
    for (std::size_t c = 0; c < dim; ++c) {
      for (std::size_t r = 0; r < dim; ++r) col[r] = h(r, c);
      gradient_to_x(col);
      for (std::size_t r = 0; r < dim; ++r) h(r, c) = col[r];
    }
    for (std::size_t r = 0; r < dim; ++r) gradient_to_x(h.row(r));
  }
};

}  // namespace

FitResult fit_mcct(const LogitMatrix& z, const LabelVector& y, Mode mode, std::size_t k,
                   const SolverConfig& cfg) {
  cfg.validate();
  if (z.n() < 2) throw InvariantError("fit needs at least two samples");
  if (y.size() != z.n()) throw DimensionError("logit rows and labels differ in count");
  if (k < 2 || k > z.m()) {
    throw InvariantError("k = " + std::to_string(k) + " outside [2, " + std::to_string(z.m()) + "]");
  }
  y.validate(z.m());
  if (std::set<LabelVector::value_type>(y.begin(), y.end()).size() == 1) {
    warn("all calibration labels are identical; the fit is degenerate");
  }
  if (const auto ties = validate_distinct(z); !ties.empty()) {
    warn(std::to_string(ties.size()) + " tied logit values; ties are ordered by column index");
  }

  const RankedData data = prepare_ranked(z, y, k);
  if (data.x.rows() == 0) {
    throw InvariantError("no sample has its true class among the top " + std::to_string(k));
  }

  const MonotoneParams init = init_params(mode, k, z.m(), cfg.w_floor);
  const SolveOptions opts{cfg.max_iterations, cfg.stationarity_tol, {}};

  FitResult result;
  result.samples_used = data.x.rows();
  result.dropped = data.dropped;
  result.params = init;
  SolveResult solved;

  if (cfg.strategy == SolverStrategy::ProjectedNewton) {
    const Reparam rp{mode, k, cfg.w_floor};
    std::vector<double> w(k), b(k);
    const SmoothFn fn = [&](std::span<const double> x, std::span<double> grad, Matrix* hess) {
      rp.to_params(x, w, b);
      Objective obj = evaluate_affine(data, mode, w, b, hess != nullptr);
      std::copy(obj.grad_w.begin(), obj.grad_w.end(), grad.begin());
      std::copy(obj.grad_b.begin(), obj.grad_b.end(), grad.begin() + static_cast<std::ptrdiff_t>(k));
      rp.gradient_to_x(grad);
      if (hess != nullptr) {
        *hess = std::move(*obj.hessian);
        rp.hessian_to_x(*hess);
      }
      return obj.loss;
    };
    const auto lower = rp.lower();
    // A common shift of every b leaves the softmax unchanged, so b_1 is pinned.
    SolveOptions newton_opts = opts;
    newton_opts.pinned = {k};
    solved = minimize_bounded_newton(fn, rp.from_params(init.w, init.b), lower, newton_opts);
    rp.to_params(solved.x, result.params.w, result.params.b);
  } else {
    const SmoothFn fn = [&](std::span<const double> x, std::span<double> grad, Matrix*) {
      Objective obj = evaluate_affine(data, mode, x.first(k), x.subspan(k), false);
      std::copy(obj.grad_w.begin(), obj.grad_w.end(), grad.begin());
      std::copy(obj.grad_b.begin(), obj.grad_b.end(), grad.begin() + static_cast<std::ptrdiff_t>(k));
      return obj.loss;
    };
    const double floor = cfg.w_floor;
    const Projection project = [k, mode, floor](std::span<double> x) {
      project_monotone(x.first(k), mode == Mode::Direct, floor);
      project_monotone(x.subspan(k), true);
    };
    std::vector<double> x0(init.w);
    x0.insert(x0.end(), init.b.begin(), init.b.end());
    solved = minimize_projected_gradient(fn, std::move(x0), project, opts);
    std::copy(solved.x.begin(), solved.x.begin() + static_cast<std::ptrdiff_t>(k), result.params.w.begin());
    std::copy(solved.x.begin() + static_cast<std::ptrdiff_t>(k), solved.x.end(), result.params.b.begin());
  }

  result.initial_loss = solved.initial_value;
  result.final_loss = solved.value;
  result.iterations = solved.iterations;
  result.stationarity = solved.stationarity;
  result.constraint_violation = constraint_violation(result.params, cfg.w_floor);
  result.converged = solved.converged && result.constraint_violation <= cfg.constraint_tol;
  return result;
}

}  // namespace mcct
