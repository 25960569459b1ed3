#pragma once

// Fixtures and brute-force oracles shared by the test suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mcct/error.hpp"
#include "mcct/matrix.hpp"
#include "mcct/transform.hpp"

namespace testing {

inline std::vector<double> uniform_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline mcct::LogitMatrix random_logits(std::mt19937_64& rng, std::size_t n, std::size_t m,
                                       double lo = -5.0, double hi = 5.0) {
  return mcct::LogitMatrix(n, m, uniform_vector(rng, n * m, lo, hi));
}

inline mcct::LabelVector random_labels(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_int_distribution<std::uint32_t> u(0, static_cast<std::uint32_t>(m - 1));
  std::vector<std::uint32_t> y(n);
  for (auto& v : y) v = u(rng);
  return mcct::LabelVector(std::move(y));
}

// Feasible parameters built from non-negative increments.
inline mcct::MonotoneParams random_params(std::mt19937_64& rng, mcct::Mode mode, std::size_t m,
                                          std::size_t k) {
  std::uniform_real_distribution<double> inc(0.0, 0.5);
  std::uniform_real_distribution<double> base(0.05, 1.5);
  std::uniform_real_distribution<double> b0(-2.0, 2.0);
  mcct::MonotoneParams p;
  p.mode = mode;
  p.m = m;
  p.w.resize(k);
  p.b.resize(k);
  p.w[0] = base(rng);
  p.b[0] = b0(rng);
  for (std::size_t i = 1; i < k; ++i) {
    p.w[i] = p.w[i - 1] + inc(rng);
    p.b[i] = p.b[i - 1] + inc(rng);
  }
  if (mode == mcct::Mode::Inverse) std::reverse(p.w.begin(), p.w.end());
  return p;
}

// Straight from the definition: rank by value, map the j-th smallest with
// the j-th parameter pair (or the first pair below the top k).
inline std::vector<double> oracle_map_row(const std::vector<double>& z, const mcct::MonotoneParams& p) {
  const std::size_t m = z.size();
  const std::size_t k = p.k();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
  std::vector<double> out(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t j = r + k >= m ? r + k - m : 0;
    const double s = z[order[r]];
    out[order[r]] = p.mode == mcct::Mode::Direct ? s * p.w[j] + p.b[j] : s / p.w[j] + p.b[j];
  }
  return out;
}

inline std::vector<double> oracle_softmax(const std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += (p[i] = std::exp(z[i] - mx));
  for (double& v : p) v /= total;
  return p;
}

inline std::vector<double> row_vector(std::span<const double> r) { return {r.begin(), r.end()}; }

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    messages().clear();
    mcct::set_warning_sink([](const std::string& m) { messages().push_back(m); });
  }
  ~WarningCapture() { mcct::set_warning_sink(nullptr); }
  static std::vector<std::string>& messages() {
    static std::vector<std::string> m;
    return m;
  }
  bool any_contains(const std::string& needle) const {
    return std::any_of(messages().begin(), messages().end(),
                       [&](const std::string& m) { return m.find(needle) != std::string::npos; });
  }
};

}  // namespace testing
