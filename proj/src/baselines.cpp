#include "mcct/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "mcct/core.hpp"
#include "mcct/error.hpp"
#include "mcct/data_io.hpp"
#include "mcct/kernels.hpp"
#include "mcct/metrics.hpp"
#include "mcct/parallel.hpp"

namespace mcct {
namespace {

void check_fit_inputs(std::size_t n, std::size_t m, const LabelVector& y) {
  if (y.size() != n) throw DimensionError("logit rows and labels differ in count");
  if (n == 0) throw InvariantError("fit needs at least one sample");
  y.validate(m);
}

ProbMatrix scaled_softmax(const LogitMatrix& z, double inv_t) {
  Matrix out(z.n(), z.m());
  parallel::for_blocks(z.n(), parallel::kBlockRows, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      auto r = out.row(i);
      kernels::scalar_affine(z.row(i), inv_t, 0.0, r);
      softmax_row(r, r);
    }
  });
  return ProbMatrix(std::move(out));
}

// Mean NLL of softmax(z * inv_t), summed per block in a fixed order.
double scaled_nll(const LogitMatrix& z, const LabelVector& y, double inv_t) {
  const std::size_t blocks = parallel::block_count(z.n());
  std::vector<double> partial(blocks, 0.0);
  parallel::for_blocks(z.n(), parallel::kBlockRows, [&](std::size_t blk, std::size_t lo, std::size_t hi) {
    std::vector<double> s(z.m());
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      kernels::scalar_affine(z.row(i), inv_t, 0.0, s);
      const double mx = kernels::max(s);
      double total = 0.0;
      for (double v : s) total += std::exp(v - mx);
      acc += std::min(mx + std::log(total) - s[y[i]], -std::log(kLogClamp));
    }
    partial[blk] = acc;
  });
  double sum = 0.0;
  for (double v : partial) sum += v;
  return sum / static_cast<double>(z.n());
}

ProbMatrix mix(const ProbMatrix& scaled, const ProbMatrix& plain, const std::array<double, 3>& w) {
  const std::size_t m = scaled.m();
  const double uniform = w[2] / static_cast<double>(m);
  Matrix out(scaled.n(), m);
  for (std::size_t i = 0; i < scaled.n(); ++i) {
    const auto a = scaled.row(i);
    const auto b = plain.row(i);
    auto o = out.row(i);
    for (std::size_t j = 0; j < m; ++j) o[j] = w[0] * a[j] + w[1] * b[j] + uniform;
  }
  return ProbMatrix(std::move(out));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvariantError(what);
}

}  // namespace

std::string_view method_name(MethodKind kind) noexcept {
  switch (kind) {
    case MethodKind::TS: return "ts";
    case MethodKind::VS: return "vs";
    case MethodKind::HB: return "hb";
    case MethodKind::EtsNll: return "ets-nll";
    case MethodKind::EtsMse: return "ets-mse";
    case MethodKind::Mcct: return "mcct";
    case MethodKind::McctI: return "mcct-i";
  }
  return "?";
}

MethodKind parse_method(std::string_view name) {
  for (MethodKind k : {MethodKind::TS, MethodKind::VS, MethodKind::HB, MethodKind::EtsNll,
                       MethodKind::EtsMse, MethodKind::Mcct, MethodKind::McctI}) {
    if (method_name(k) == name) return k;
  }
  throw InvariantError("unknown method '" + std::string(name) + "'");
}

void validate(const CalibratedModel& model) {
  require(model.m >= 2, "model needs at least two classes");
  switch (model.kind) {
    case MethodKind::TS: {
      const auto* ts = std::get_if<TemperatureScaling>(&model.payload);
      require(ts != nullptr, "ts model without a temperature");
      require(std::isfinite(ts->temperature) && ts->temperature > 0.0, "temperature must be > 0");
      break;
    }
    case MethodKind::VS: {
      const auto* vs = std::get_if<VectorScaling>(&model.payload);
      require(vs != nullptr, "vs model without scale and bias");
      require(vs->scale.size() == model.m && vs->bias.size() == model.m,
              "vs scale and bias need one entry per class");
      for (double v : vs->scale) require(std::isfinite(v), "non-finite vs scale");
      for (double v : vs->bias) require(std::isfinite(v), "non-finite vs bias");
      break;
    }
    case MethodKind::HB: {
      const auto* hb = std::get_if<HistogramBinning>(&model.payload);
      require(hb != nullptr, "hb model without bins");
      require(hb->edges.size() >= 2 && hb->confidence.size() + 1 == hb->edges.size(),
              "hb needs one confidence per bin and one more edge than bins");
      require(hb->edges.front() == 0.0 && hb->edges.back() == 1.0, "hb edges must span [0, 1]");
      for (std::size_t k = 0; k + 1 < hb->edges.size(); ++k) {
        require(hb->edges[k] < hb->edges[k + 1], "hb edges must be strictly increasing");
      }
      for (double c : hb->confidence) require(c >= 0.0 && c <= 1.0, "hb confidence outside [0, 1]");
      break;
    }
    case MethodKind::EtsNll:
    case MethodKind::EtsMse: {
      const auto* ets = std::get_if<EnsembleTemperature>(&model.payload);
      require(ets != nullptr, "ets model without temperature and weights");
      require(std::isfinite(ets->temperature) && ets->temperature > 0.0, "temperature must be > 0");
      double total = 0.0;
      for (double w : ets->weights) {
        require(w >= 0.0, "ets weights must be non-negative");
        total += w;
      }
      require(std::abs(total - 1.0) <= 1e-9, "ets weights must sum to 1");
      break;
    }
    case MethodKind::Mcct:
    case MethodKind::McctI: {
      const auto* mp = std::get_if<MonotoneParams>(&model.payload);
      require(mp != nullptr, "monotone model without parameters");
      require(mp->mode == (model.kind == MethodKind::Mcct ? Mode::Direct : Mode::Inverse),
              "monotone model kind and mode disagree");
      require(mp->m == model.m, "monotone model class count mismatch");
      validate(*mp);
      require(mp->k() >= 2, "monotone model needs k >= 2");
      break;
    }
  }
}

ProbMatrix apply_binning(const HistogramBinning& hb, const ProbMatrix& p) {
  const std::size_t bins = hb.confidence.size();
  const std::size_t m = p.m();
  Matrix out(p.n(), m);
  for (std::size_t i = 0; i < p.n(); ++i) {
    const auto r = p.row(i);
    auto o = out.row(i);
    const std::size_t top = argmax(r);
    const double c = r[top];
    std::size_t k = 0;
    while (k + 1 < bins && c > hb.edges[k + 1]) ++k;
    const double target = hb.confidence[k];
    const double rest = 1.0 - c;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == top) {
        o[j] = target;
      } else if (rest > 0.0) {
        o[j] = r[j] * ((1.0 - target) / rest);
      } else {
        o[j] = (1.0 - target) / static_cast<double>(m - 1);
      }
    }
  }
  return ProbMatrix(std::move(out));
}

ProbMatrix calibrate(const CalibratedModel& model, const LogitMatrix& z) {
  validate(model);
  if (z.m() != model.m) {
    throw DimensionError("model expects " + std::to_string(model.m) + " classes, logits have " +
                         std::to_string(z.m()));
  }
  switch (model.kind) {
    case MethodKind::TS:
      return scaled_softmax(z, 1.0 / std::get<TemperatureScaling>(model.payload).temperature);
    case MethodKind::VS: {
      const auto& vs = std::get<VectorScaling>(model.payload);
      Matrix out(z.n(), z.m());
      parallel::for_blocks(z.n(), parallel::kBlockRows, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          auto r = out.row(i);
          kernels::affine(z.row(i), vs.scale, vs.bias, r);
          softmax_row(r, r);
        }
      });
      return ProbMatrix(std::move(out));
    }
    case MethodKind::HB:
      return apply_binning(std::get<HistogramBinning>(model.payload), softmax_rows(z));
    case MethodKind::EtsNll:
    case MethodKind::EtsMse: {
      const auto& ets = std::get<EnsembleTemperature>(model.payload);
      return mix(scaled_softmax(z, 1.0 / ets.temperature), softmax_rows(z), ets.weights);
    }
    case MethodKind::Mcct:
    case MethodKind::McctI: {
      const auto& mp = std::get<MonotoneParams>(model.payload);
      return softmax_rows(mp.k() == mp.m ? apply_map(z, mp) : apply_map_topk(z, mp));
    }
  }
  throw InvariantError("unknown model kind");
}

CalibratedModel fit_ts(const LogitMatrix& z, const LabelVector& y, FitSummary* summary) {
  check_fit_inputs(z.n(), z.m(), y);
  const auto objective = [&](double log_t) { return scaled_nll(z, y, std::exp(-log_t)); };
  std::uintmax_t evaluations = 200;
  // 40 bits puts the bracket far below a 1e-6 change in T.
  const auto [log_t, loss] = boost::math::tools::brent_find_minima(
      objective, std::log(kTemperatureMin), std::log(kTemperatureMax), 40, evaluations);
  const double t = std::clamp(std::exp(log_t), kTemperatureMin, kTemperatureMax);
  if (summary != nullptr) {
    summary->initial_loss = scaled_nll(z, y, 1.0);
    summary->final_loss = loss;
    summary->iterations = static_cast<int>(evaluations);
    summary->converged = evaluations < 200;
    summary->samples_used = z.n();
    summary->dropped = 0;
  }
  if (t <= kTemperatureMin * (1.0 + 1e-6) || t >= kTemperatureMax * (1.0 - 1e-6)) {
    warn("temperature hit the search bound " + std::to_string(t));
  }
  return {MethodKind::TS, z.m(), TemperatureScaling{t}};
}

CalibratedModel fit_ets(const LogitMatrix& z, const LabelVector& y, EnsembleLoss loss,
                        FitSummary* summary) {
  check_fit_inputs(z.n(), z.m(), y);
  const double t = std::get<TemperatureScaling>(fit_ts(z, y).payload).temperature;
  const ProbMatrix scaled = scaled_softmax(z, 1.0 / t);
  const ProbMatrix plain = softmax_rows(z);
  const std::size_t n = z.n();
  const std::size_t m = z.m();
  const double u = 1.0 / static_cast<double>(m);

  const SmoothFn fn = [&](std::span<const double> w, std::span<double> grad, Matrix*) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = scaled.row(i);
      const auto b = plain.row(i);
      if (loss == EnsembleLoss::Nll) {
        const std::size_t c = y[i];
        const double p = w[0] * a[c] + w[1] * b[c] + w[2] * u;
        if (p > kLogClamp) {
          total -= std::log(p);
          grad[0] -= a[c] / p;
          grad[1] -= b[c] / p;
          grad[2] -= u / p;
        } else {
          total -= std::log(kLogClamp);
        }
      } else {
        for (std::size_t j = 0; j < m; ++j) {
          const double r = w[0] * a[j] + w[1] * b[j] + w[2] * u - (j == y[i] ? 1.0 : 0.0);
          total += r * r;
          grad[0] += 2.0 * r * a[j];
          grad[1] += 2.0 * r * b[j];
          grad[2] += 2.0 * r * u;
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& g : grad) g *= inv_n;
    return total * inv_n;
  };

  const SolveOptions opts{1000, 1e-6, {}};
  const SolveResult solved = minimize_projected_gradient(
      fn, {1.0, 0.0, 0.0}, [](std::span<double> x) { project_simplex(x); }, opts);
  EnsembleTemperature ets{t, {solved.x[0], solved.x[1], solved.x[2]}};
  // Remove rounding left by the projection so the weights sum to 1 exactly.
  for (double& w : ets.weights) w = std::max(w, 0.0);
  const double total = ets.weights[0] + ets.weights[1] + ets.weights[2];
  for (double& w : ets.weights) w /= total;
  if (summary != nullptr) {
    summary->initial_loss = solved.initial_value;
    summary->final_loss = solved.value;
    summary->iterations = solved.iterations;
    summary->converged = solved.converged;
    summary->samples_used = n;
    summary->dropped = 0;
  }
  return {loss == EnsembleLoss::Nll ? MethodKind::EtsNll : MethodKind::EtsMse, m, ets};
}

CalibratedModel fit_vs(const LogitMatrix& z, const LabelVector& y, FitSummary* summary) {
  check_fit_inputs(z.n(), z.m(), y);
  const std::size_t m = z.m();
  const RankedData data = prepare_unsorted(z, y);
  const SmoothFn fn = [&](std::span<const double> x, std::span<double> grad, Matrix* hess) {
    Objective obj = evaluate_affine(data, Mode::Direct, x.first(m), x.subspan(m), hess != nullptr);
    std::copy(obj.grad_w.begin(), obj.grad_w.end(), grad.begin());
    std::copy(obj.grad_b.begin(), obj.grad_b.end(), grad.begin() + static_cast<std::ptrdiff_t>(m));
    if (hess != nullptr) *hess = std::move(*obj.hessian);
    return obj.loss;
  };
  std::vector<double> x0(2 * m, 0.0);
  std::fill(x0.begin(), x0.begin() + static_cast<std::ptrdiff_t>(m), 1.0);
  const std::vector<double> lower(2 * m, -std::numeric_limits<double>::infinity());
  // Biases are defined up to a common shift; the first one stays at zero.
  const SolveResult solved = minimize_bounded_newton(fn, std::move(x0), lower, {500, 1e-6, {m}});
  if (!solved.converged) {
    warn("vector scaling stopped after " + std::to_string(solved.iterations) +
         " iterations with gradient norm " + std::to_string(solved.stationarity));
  }
  if (summary != nullptr) {
    summary->initial_loss = solved.initial_value;
    summary->final_loss = solved.value;
    summary->iterations = solved.iterations;
    summary->converged = solved.converged;
    summary->samples_used = z.n();
    summary->dropped = 0;
  }
  VectorScaling vs;
  vs.scale.assign(solved.x.begin(), solved.x.begin() + static_cast<std::ptrdiff_t>(m));
  vs.bias.assign(solved.x.begin() + static_cast<std::ptrdiff_t>(m), solved.x.end());
  return {MethodKind::VS, m, std::move(vs)};
}

CalibratedModel fit_hb(const ProbMatrix& p, const LabelVector& y, std::size_t num_bins,
                       FitSummary* summary) {
  check_fit_inputs(p.n(), p.m(), y);
  if (num_bins == 0) throw InvariantError("need at least one bin");
  const BinStats stats = reliability_data(p, y, num_bins);
  HistogramBinning hb;
  hb.edges.resize(num_bins + 1);
  for (std::size_t k = 0; k <= num_bins; ++k) {
    hb.edges[k] = static_cast<double>(k) / static_cast<double>(num_bins);
  }
  hb.confidence.resize(num_bins);
  for (std::size_t k = 0; k < num_bins; ++k) {
    const Bin& b = stats.bins[k];
    hb.confidence[k] = b.count > 0 ? b.accuracy : 0.5 * (b.lower + b.upper);
  }
  CalibratedModel model{MethodKind::HB, p.m(), std::move(hb)};
  if (summary != nullptr) {
    summary->initial_loss = nll(p, y);
    summary->final_loss = nll(apply_binning(std::get<HistogramBinning>(model.payload), p), y);
    summary->iterations = 0;
    summary->converged = true;
    summary->samples_used = p.n();
    summary->dropped = 0;
  }
  return model;
}

CalibratedModel monotone_model(MonotoneParams params) {
  const MethodKind kind = params.mode == Mode::Direct ? MethodKind::Mcct : MethodKind::McctI;
  const std::size_t m = params.m;
  return {kind, m, std::move(params)};
}

FittedModel fit_method(MethodKind kind, const LogitMatrix& z, const LabelVector& y,
                       const FitOptions& options) {
  FittedModel out;
  switch (kind) {
    case MethodKind::TS: out.model = fit_ts(z, y, &out.summary); break;
    case MethodKind::VS: out.model = fit_vs(z, y, &out.summary); break;
    case MethodKind::HB: out.model = fit_hb(softmax_rows(z), y, options.hb_bins, &out.summary); break;
    case MethodKind::EtsNll: out.model = fit_ets(z, y, EnsembleLoss::Nll, &out.summary); break;
    case MethodKind::EtsMse: out.model = fit_ets(z, y, EnsembleLoss::Mse, &out.summary); break;
    case MethodKind::Mcct:
    case MethodKind::McctI: {
      const Mode mode = kind == MethodKind::Mcct ? Mode::Direct : Mode::Inverse;
      const std::size_t k = options.topk == 0 ? z.m() : options.topk;
      FitResult r = fit_mcct(z, y, mode, k, options.solver);
      if (!r.converged) {
        warn(std::string(method_name(kind)) + " stopped after " + std::to_string(r.iterations) +
             " iterations with stationarity " + format_number(r.stationarity));
      }
      out.summary = {r.initial_loss, r.final_loss, r.iterations, r.converged, r.samples_used,
                     r.dropped};
      out.model = monotone_model(std::move(r.params));
      break;
    }
  }
  return out;
}

}  // namespace mcct
