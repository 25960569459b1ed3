#pragma once

// Calibration-error estimators on top-label confidence.

#include <cstddef>
#include <vector>

#include "mcct/matrix.hpp"

namespace mcct {

struct Bin {
  double lower = 0.0;  // exclusive, except that bin 0 also takes confidence 0
  double upper = 0.0;  // inclusive
  std::size_t count = 0;
  double mean_confidence = 0.0;  // 0 when empty
  double accuracy = 0.0;         // 0 when empty
};

struct BinStats {
  std::vector<Bin> bins;
};

/// Index k of the equal-width bin ((k-1)/K, k/K] holding confidence c.
std::size_t confidence_bin(double c, std::size_t num_bins);

/// Top-label confidence and correctness of each row.
struct TopLabel {
  std::vector<double> confidence;
  std::vector<bool> correct;
};
TopLabel top_label(const ProbMatrix& p, const LabelVector& y);

struct EceResult {
  double ece = 0.0;
  BinStats bins;
};

/// Sum over equal-width bins of (|B_k| / n) * |acc(B_k) - conf(B_k)|.
EceResult ece(const ProbMatrix& p, const LabelVector& y, std::size_t num_bins = 15);

/// Per-bin statistics behind ece(), for reliability diagrams.
BinStats reliability_data(const ProbMatrix& p, const LabelVector& y, std::size_t num_bins = 15);

/// Equal-mass binning: samples sorted by confidence are cut into num_bins
/// contiguous groups (the lowest n % num_bins groups get one extra sample) and
/// the unweighted sum of |acc - conf| over groups is returned.
double eq_mass_ece(const ProbMatrix& p, const LabelVector& y, std::size_t num_bins = 15);

/// Rule-of-thumb bandwidth 1.06 * sigma * n^(-1/5).
double kde_bandwidth(double sigma, std::size_t n);

/// Kernel estimate of E|c - P(correct | c)|: Gaussian Nadaraya-Watson
/// regression of correctness on confidence, integrated against the kernel
/// density estimate on a uniform grid spanning the observed confidences.
double ece_kde(const ProbMatrix& p, const LabelVector& y);

inline constexpr std::size_t kKdeGridPoints = 1024;

struct RankingDiagnostics {
  double prediction_change_rate = 0.0;
  double uncertain_alteration_rate = 0.0;
  std::size_t uncertain_count = 0;  // rows with max p_before < threshold
  bool uncertain_empty = false;
};

RankingDiagnostics ranking_diagnostics(const ProbMatrix& before, const ProbMatrix& after,
                                       double threshold = 0.7);

double accuracy(const ProbMatrix& p, const LabelVector& y);

struct MetricReport {
  double ece = 0.0;
  double eq_mass_ece = 0.0;  // NaN when n < bins
  double ece_kde = 0.0;      // NaN when undefined (n < 10)
  double accuracy = 0.0;
  double nll = 0.0;
  double prediction_change_rate = 0.0;
  double uncertain_alteration_rate = 0.0;
  std::size_t uncertain_count = 0;
  std::size_t n = 0;
  BinStats bins;
};

/// Every metric of `after`, with ranking diagnostics against `before`.
MetricReport evaluate(const ProbMatrix& before, const ProbMatrix& after, const LabelVector& y,
                      std::size_t num_bins = 15);

}  // namespace mcct
