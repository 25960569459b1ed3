#pragma once

// Reference calibrators, plus a tagged model type that also carries the
// rank-wise monotone maps so every calibrator can be applied the same way.

#include <array>
#include <cstddef>
#include <string_view>
#include <variant>
#include <vector>

#include "mcct/matrix.hpp"
#include "mcct/optim.hpp"
#include "mcct/transform.hpp"

namespace mcct {

enum class MethodKind { TS, VS, HB, EtsNll, EtsMse, Mcct, McctI };

/// "ts", "vs", "hb", "ets-nll", "ets-mse", "mcct", "mcct-i".
std::string_view method_name(MethodKind kind) noexcept;
MethodKind parse_method(std::string_view name);

struct TemperatureScaling {
  double temperature = 1.0;
  friend bool operator==(const TemperatureScaling&, const TemperatureScaling&) = default;
};

struct VectorScaling {
  std::vector<double> scale;
  std::vector<double> bias;
  friend bool operator==(const VectorScaling&, const VectorScaling&) = default;
};

/// Top-label binning: bin k covers (edges[k], edges[k+1]] and maps the top
/// probability to confidence[k].
struct HistogramBinning {
  std::vector<double> edges;
  std::vector<double> confidence;
  friend bool operator==(const HistogramBinning&, const HistogramBinning&) = default;
};

/// w[0] * softmax(z / T) + w[1] * softmax(z) + w[2] / m.
struct EnsembleTemperature {
  double temperature = 1.0;
  std::array<double, 3> weights{1.0, 0.0, 0.0};
  friend bool operator==(const EnsembleTemperature&, const EnsembleTemperature&) = default;
};

using ModelPayload =
    std::variant<TemperatureScaling, VectorScaling, HistogramBinning, EnsembleTemperature,
                 MonotoneParams>;

struct CalibratedModel {
  MethodKind kind = MethodKind::TS;
  std::size_t m = 0;
  ModelPayload payload;

  friend bool operator==(const CalibratedModel&, const CalibratedModel&) = default;
};

/// Throws InvariantError when the payload does not match the kind, or breaks
/// its invariants (T > 0, simplex weights, increasing edges over [0, 1], ...).
void validate(const CalibratedModel& model);

/// Calibrated probabilities for new logits.
ProbMatrix calibrate(const CalibratedModel& model, const LogitMatrix& z);

/// Convergence record of a fit.
struct FitSummary {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  bool converged = true;
  std::size_t samples_used = 0;
  std::size_t dropped = 0;
};

inline constexpr double kTemperatureMin = 1e-3;
inline constexpr double kTemperatureMax = 1e3;

/// T minimizing the mean NLL of softmax(z / T) over [1e-3, 1e3].
CalibratedModel fit_ts(const LogitMatrix& z, const LabelVector& y, FitSummary* summary = nullptr);

enum class EnsembleLoss { Nll, Mse };

/// Two-stage: T from fit_ts, then simplex weights minimizing the chosen loss.
CalibratedModel fit_ets(const LogitMatrix& z, const LabelVector& y, EnsembleLoss loss,
                        FitSummary* summary = nullptr);

/// Per-class scale and bias minimizing the mean NLL of softmax(a * z + c).
CalibratedModel fit_vs(const LogitMatrix& z, const LabelVector& y, FitSummary* summary = nullptr);

/// Top-label histogram binning on equal-width bins over (0, 1]. Empty bins
/// keep their midpoint.
CalibratedModel fit_hb(const ProbMatrix& p, const LabelVector& y, std::size_t num_bins = 15,
                       FitSummary* summary = nullptr);

/// Applies a binning map to probabilities: the top entry becomes the bin's
/// confidence and the remaining mass is shared in proportion to the other
/// entries (evenly when they are all zero).
ProbMatrix apply_binning(const HistogramBinning& hb, const ProbMatrix& p);

struct FitOptions {
  SolverConfig solver;
  std::size_t topk = 0;  // 0 means m, for the monotone maps
  std::size_t hb_bins = 15;
};

struct FittedModel {
  CalibratedModel model;
  FitSummary summary;
};

/// Fits any calibrator on logits (HB is fitted on softmax(z)).
FittedModel fit_method(MethodKind kind, const LogitMatrix& z, const LabelVector& y,
                       const FitOptions& options = {});

/// Wraps fitted monotone parameters.
CalibratedModel monotone_model(MonotoneParams params);

}  // namespace mcct
