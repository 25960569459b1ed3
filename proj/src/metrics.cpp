#include "mcct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mcct/core.hpp"
#include "mcct/error.hpp"

namespace mcct {
namespace {

void check_inputs(const ProbMatrix& p, const LabelVector& y) {
  if (p.n() != y.size()) throw DimensionError("probability rows and labels differ in count");
  if (p.n() == 0) throw InvariantError("metrics need at least one sample");
  y.validate(p.m());
}

double edge(std::size_t k, std::size_t num_bins) {
  return static_cast<double>(k) / static_cast<double>(num_bins);
}

}  // namespace

std::size_t confidence_bin(double c, std::size_t num_bins) {
  if (num_bins == 0) throw InvariantError("need at least one bin");
  const double scaled = std::ceil(c * static_cast<double>(num_bins));
  std::size_t k = scaled <= 1.0 ? 0 : std::min(num_bins - 1, static_cast<std::size_t>(scaled) - 1);
  // c * K rounds; settle against the exact edges k/K.
  while (k > 0 && c <= edge(k, num_bins)) --k;
  while (k + 1 < num_bins && c > edge(k + 1, num_bins)) ++k;
  return k;
}

TopLabel top_label(const ProbMatrix& p, const LabelVector& y) {
  check_inputs(p, y);
  TopLabel t;
  t.confidence.resize(p.n());
  t.correct.resize(p.n());
  for (std::size_t i = 0; i < p.n(); ++i) {
    const auto r = p.row(i);
    const std::size_t top = argmax(r);
    t.confidence[i] = r[top];
    t.correct[i] = top == y[i];
  }
  return t;
}

BinStats reliability_data(const ProbMatrix& p, const LabelVector& y, std::size_t num_bins) {
  const TopLabel t = top_label(p, y);
  std::vector<double> conf_sum(num_bins, 0.0), correct_sum(num_bins, 0.0);
  BinStats stats;
  stats.bins.resize(num_bins);
  for (std::size_t i = 0; i < t.confidence.size(); ++i) {
    const std::size_t k = confidence_bin(t.confidence[i], num_bins);
    ++stats.bins[k].count;
    conf_sum[k] += t.confidence[i];
    correct_sum[k] += t.correct[i] ? 1.0 : 0.0;
  }
  for (std::size_t k = 0; k < num_bins; ++k) {
    Bin& b = stats.bins[k];
    b.lower = edge(k, num_bins);
    b.upper = edge(k + 1, num_bins);
    if (b.count > 0) {
      b.mean_confidence = conf_sum[k] / static_cast<double>(b.count);
      b.accuracy = correct_sum[k] / static_cast<double>(b.count);
    }
  }
  return stats;
}

EceResult ece(const ProbMatrix& p, const LabelVector& y, std::size_t num_bins) {
  EceResult out;
  out.bins = reliability_data(p, y, num_bins);
  const auto n = static_cast<double>(p.n());
  for (const Bin& b : out.bins.bins) {
    if (b.count == 0) continue;
    out.ece += (static_cast<double>(b.count) / n) * std::abs(b.accuracy - b.mean_confidence);
  }
  return out;
}

double eq_mass_ece(const ProbMatrix& p, const LabelVector& y, std::size_t num_bins) {
  const TopLabel t = top_label(p, y);
  const std::size_t n = t.confidence.size();
  if (num_bins == 0) throw InvariantError("need at least one bin");
  if (n < num_bins) {
    throw InvariantError("equal-mass ECE needs at least as many samples (" + std::to_string(n) +
                         ") as bins (" + std::to_string(num_bins) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return t.confidence[a] < t.confidence[b];
  });
  const std::size_t base = n / num_bins;
  const std::size_t extra = n % num_bins;
  double total = 0.0;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < num_bins; ++k) {
    const std::size_t size = base + (k < extra ? 1 : 0);
    double conf = 0.0, correct = 0.0;
    for (std::size_t j = pos; j < pos + size; ++j) {
      conf += t.confidence[order[j]];
      correct += t.correct[order[j]] ? 1.0 : 0.0;
    }
    pos += size;
    total += std::abs(correct / static_cast<double>(size) - conf / static_cast<double>(size));
  }
  return total;
}

double kde_bandwidth(double sigma, std::size_t n) {
  return 1.06 * sigma * std::pow(static_cast<double>(n), -0.2);
}

double ece_kde(const ProbMatrix& p, const LabelVector& y) {
  const TopLabel t = top_label(p, y);
  const std::size_t n = t.confidence.size();
  if (n < 10) throw InvariantError("ECE-KDE needs at least 10 samples");

  const double mean = std::accumulate(t.confidence.begin(), t.confidence.end(), 0.0) /
                      static_cast<double>(n);
  double var = 0.0;
  for (double c : t.confidence) var += (c - mean) * (c - mean);
  const double sigma = std::sqrt(var / static_cast<double>(n - 1));
  const auto [cmin, cmax] = std::minmax_element(t.confidence.begin(), t.confidence.end());
  if (*cmin == *cmax) {
    warn("ECE-KDE: confidences are all identical; using |accuracy - mean confidence|");
    const double acc = static_cast<double>(std::count(t.correct.begin(), t.correct.end(), true)) /
                       static_cast<double>(n);
    return std::abs(acc - mean);
  }
  const double h = kde_bandwidth(sigma, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return t.confidence[a] < t.confidence[b];
  });
  std::vector<double> c(n), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = t.confidence[order[i]];
    a[i] = t.correct[order[i]] ? 1.0 : 0.0;
  }

  // Kernel mass beyond 8 bandwidths is below 1e-13 of the peak.
  const double reach = 8.0 * h;
  const double lo = c.front();
  const double hi = c.back();
  const std::size_t grid = kKdeGridPoints;
  double weighted_gap = 0.0;
  double mass = 0.0;
  for (std::size_t g = 0; g < grid; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid - 1);
    const auto first = std::lower_bound(c.begin(), c.end(), x - reach) - c.begin();
    const auto last = std::upper_bound(c.begin(), c.end(), x + reach) - c.begin();
    double density = 0.0, regression = 0.0;
    for (auto i = first; i < last; ++i) {
      const double u = (x - c[i]) / h;
      const double kernel = std::exp(-0.5 * u * u);
      density += kernel;
      regression += kernel * a[i];
    }
    if (density <= 0.0) continue;
    const double trapezoid = (g == 0 || g + 1 == grid) ? 0.5 : 1.0;
    weighted_gap += trapezoid * density * std::abs(x - regression / density);
    mass += trapezoid * density;
  }
  return weighted_gap / mass;
}

RankingDiagnostics ranking_diagnostics(const ProbMatrix& before, const ProbMatrix& after,
                                       double threshold) {
  if (before.n() != after.n() || before.m() != after.m()) {
    throw DimensionError("ranking diagnostics need identically shaped inputs");
  }
  RankingDiagnostics d;
  std::size_t changed = 0, uncertain_changed = 0;
  for (std::size_t i = 0; i < before.n(); ++i) {
    const auto rb = before.row(i);
    const std::size_t top = argmax(rb);
    const bool differs = top != argmax(after.row(i));
    changed += differs ? 1 : 0;
    if (rb[top] < threshold) {
      ++d.uncertain_count;
      uncertain_changed += differs ? 1 : 0;
    }
  }
  if (before.n() > 0) {
    d.prediction_change_rate = static_cast<double>(changed) / static_cast<double>(before.n());
  }
  d.uncertain_empty = d.uncertain_count == 0;
  if (!d.uncertain_empty) {
    d.uncertain_alteration_rate =
        static_cast<double>(uncertain_changed) / static_cast<double>(d.uncertain_count);
  }
  return d;
}

double accuracy(const ProbMatrix& p, const LabelVector& y) {
  const TopLabel t = top_label(p, y);
  return static_cast<double>(std::count(t.correct.begin(), t.correct.end(), true)) /
         static_cast<double>(t.correct.size());
}

MetricReport evaluate(const ProbMatrix& before, const ProbMatrix& after, const LabelVector& y,
                      std::size_t num_bins) {
  MetricReport r;
  r.n = after.n();
  auto e = ece(after, y, num_bins);
  r.ece = e.ece;
  r.bins = std::move(e.bins);
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  r.eq_mass_ece = after.n() >= num_bins ? eq_mass_ece(after, y, num_bins) : kNaN;
  r.ece_kde = after.n() >= 10 ? ece_kde(after, y) : kNaN;
  r.accuracy = accuracy(after, y);
  r.nll = nll(after, y);
  const auto d = ranking_diagnostics(before, after);
  r.prediction_change_rate = d.prediction_change_rate;
  r.uncertain_alteration_rate = d.uncertain_alteration_rate;
  r.uncertain_count = d.uncertain_count;
  return r;
}

}  // namespace mcct
