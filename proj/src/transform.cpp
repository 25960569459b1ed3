#include "mcct/transform.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mcct/error.hpp"
#include "mcct/kernels.hpp"
#include "mcct/parallel.hpp"

namespace mcct {

MonotoneParams MonotoneParams::identity(Mode mode, std::size_t m, std::size_t k) {
  return {mode, m, std::vector<double>(k, 1.0), std::vector<double>(k, 0.0)};
}

ConstraintVectors constraint_vectors(const MonotoneParams& params) {
  ConstraintVectors c;
  const std::size_t k = params.k();
  if (k < 2) return c;
  c.w.resize(k - 1);
  c.b.resize(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    c.w[i] = params.mode == Mode::Direct ? params.w[i + 1] - params.w[i]
                                         : params.w[i] - params.w[i + 1];
    c.b[i] = params.b[i + 1] - params.b[i];
  }
  return c;
}

double constraint_violation(const MonotoneParams& params, double w_floor) {
  double worst = 0.0;
  const auto c = constraint_vectors(params);
  for (double v : c.w) worst = std::max(worst, -v);
  for (double v : c.b) worst = std::max(worst, -v);
  for (double v : params.w) worst = std::max(worst, w_floor - v);
  return worst;
}

void validate(const MonotoneParams& params) {
  const std::size_t k = params.k();
  if (params.b.size() != k) throw InvariantError("w and b differ in length");
  if (k < 1 || k > params.m) {
    throw InvariantError("retained rank count " + std::to_string(k) + " outside [1, " +
                         std::to_string(params.m) + "]");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::isfinite(params.w[i]) || !std::isfinite(params.b[i])) {
      throw InvariantError("non-finite parameter at rank " + std::to_string(i));
    }
    if (!(params.w[i] > 0.0)) {
      throw InvariantError("w[" + std::to_string(i) + "] is not strictly positive");
    }
  }
  const auto c = constraint_vectors(params);
  for (std::size_t i = 0; i < c.w.size(); ++i) {
    if (c.w[i] < 0.0) {
      std::ostringstream msg;
      msg << "w is not " << (params.mode == Mode::Direct ? "non-decreasing" : "non-increasing")
          << " at rank " << i;
      throw InvariantError(msg.str());
    }
    if (c.b[i] < 0.0) throw InvariantError("b is not non-decreasing at rank " + std::to_string(i));
  }
}

void apply_row(std::span<const double> z, const MonotoneParams& params,
               std::span<std::uint32_t> perm, std::span<double> sorted_scratch,
               std::span<double> out) {
  const std::size_t m = z.size();
  const std::size_t k = params.k();
  const std::size_t low = m - k;
  sort_row(z, perm);
  for (std::size_t j = 0; j < m; ++j) sorted_scratch[j] = z[perm[j]];

  // Elementwise kernels allow in-place operation.
  std::span<double> s = sorted_scratch;
  if (params.mode == Mode::Direct) {
    kernels::scalar_affine(s.first(low), params.w[0], params.b[0], s.first(low));
    kernels::affine(s.subspan(low), params.w, params.b, s.subspan(low));
  } else {
    for (std::size_t j = 0; j < low; ++j) s[j] = s[j] / params.w[0] + params.b[0];
    kernels::inv_affine(s.subspan(low), params.w, params.b, s.subspan(low));
  }
  for (std::size_t j = 0; j < m; ++j) out[perm[j]] = s[j];
}

namespace {

LogitMatrix apply_rows(const LogitMatrix& z, const MonotoneParams& params) {
  if (params.m != z.m()) {
    throw DimensionError("map fitted for " + std::to_string(params.m) +
                         " classes applied to logits with " + std::to_string(z.m()));
  }
  validate(params);
  Matrix out(z.n(), z.m());
  parallel::for_blocks(z.n(), parallel::kBlockRows, [&](std::size_t, std::size_t lo, std::size_t hi) {
    std::vector<std::uint32_t> perm(z.m());
    std::vector<double> sorted(z.m());
    for (std::size_t i = lo; i < hi; ++i) apply_row(z.row(i), params, perm, sorted, out.row(i));
  });
  return LogitMatrix(std::move(out));
}

}  // namespace

LogitMatrix apply_map(const LogitMatrix& z, const MonotoneParams& params) {
  if (params.k() != z.m()) {
    throw DimensionError("apply_map needs k == m; use apply_map_topk for truncated maps");
  }
  return apply_rows(z, params);
}

LogitMatrix apply_map_topk(const LogitMatrix& z, const MonotoneParams& params) {
  if (params.k() < 2) throw InvariantError("top-k map needs k >= 2");
  return apply_rows(z, params);
}

RankedData truncate_training_set(const LogitMatrix& z_sorted, const SortPermutation& perm,
                                 const LabelVector& y, std::size_t k) {
  const std::size_t n = z_sorted.n();
  const std::size_t m = z_sorted.m();
  if (k < 2) throw InvariantError("top-k truncation needs k >= 2");
  if (k > m) throw DimensionError("k exceeds the class count");
  if (perm.n() != n || perm.m() != m || y.size() != n) {
    throw DimensionError("truncate_training_set: inputs disagree in shape");
  }
  y.validate(m);

  const std::size_t low = m - k;
  std::vector<double> kept;
  kept.reserve(n * k);
  RankedData out;
  out.target.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = perm.row(i);
    const auto rank = static_cast<std::size_t>(std::find(p.begin(), p.end(), y[i]) - p.begin());
    if (rank < low) {
      ++out.dropped;
      continue;
    }
    const auto s = z_sorted.row(i);
    kept.insert(kept.end(), s.begin() + static_cast<std::ptrdiff_t>(low), s.end());
    out.target.push_back(static_cast<std::uint32_t>(rank - low));
  }
  out.x = Matrix(out.target.size(), k, std::move(kept));
  return out;
}

RankedData prepare_ranked(const LogitMatrix& z, const LabelVector& y, std::size_t k) {
  if (y.size() != z.n()) throw DimensionError("logit rows and labels differ in count");
  const auto sr = sort_rows(z);
  return truncate_training_set(sr.sorted, sr.perm, y, k);
}

RankedData prepare_unsorted(const LogitMatrix& z, const LabelVector& y) {
  if (y.size() != z.n()) throw DimensionError("logit rows and labels differ in count");
  y.validate(z.m());
  RankedData out;
  out.x = z.matrix();
  out.target.assign(y.begin(), y.end());
  return out;
}

namespace {

struct BlockAccumulator {
  double loss = 0.0;
  std::vector<double> gw, gb;
  std::vector<double> hessian;  // upper triangle of the 2k x 2k matrix, row-major

  BlockAccumulator(std::size_t k, bool with_hessian)
      : gw(k, 0.0), gb(k, 0.0), hessian(with_hessian ? 4 * k * k : 0, 0.0) {}
};

const double kMaxSampleLoss = -std::log(kLogClamp);

}  // namespace

Objective evaluate_affine(const RankedData& data, Mode mode, std::span<const double> w,
                          std::span<const double> b, bool with_hessian) {
  const std::size_t n = data.x.rows();
  const std::size_t k = data.x.cols();
  if (w.size() != k || b.size() != k) throw DimensionError("parameter length differs from k");
  if (n == 0) throw InvariantError("no samples to evaluate the objective on");
  if (mode == Mode::Inverse) {
    for (double v : w) {
      if (!(v > 0.0)) throw InvariantError("inverse map needs strictly positive w");
    }
  }

  const std::size_t dim = 2 * k;
  std::vector<BlockAccumulator> blocks(parallel::block_count(n), BlockAccumulator(k, with_hessian));

  parallel::for_blocks(n, parallel::kBlockRows, [&](std::size_t blk, std::size_t lo, std::size_t hi) {
    BlockAccumulator& acc = blocks[blk];
    std::vector<double> f(k), p(k), r(k), a(k), u(dim);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto s = data.x.row(i);
      const std::size_t t = data.target[i];
      if (mode == Mode::Direct) {
        kernels::affine(s, w, b, f);
      } else {
        kernels::inv_affine(s, w, b, f);
      }
      const double shift = kernels::max(f);
      kernels::scalar_affine(f, 1.0, -shift, p);
      for (double& v : p) v = std::exp(v);
      const double total = kernels::sum(p);
      kernels::scale(1.0 / total, p);

      acc.loss += std::min(-(f[t] - shift - std::log(total)), kMaxSampleLoss);

      std::copy(p.begin(), p.end(), r.begin());
      r[t] -= 1.0;
      if (mode == Mode::Direct) {
        kernels::accumulate_direct(s, r, acc.gw, acc.gb);
      } else {
        kernels::accumulate_inverse(s, r, w, acc.gw, acc.gb);
      }

      if (!with_hessian) continue;
      // d logits / d w
      if (mode == Mode::Direct) {
        std::copy(s.begin(), s.end(), a.begin());
      } else {
        for (std::size_t j = 0; j < k; ++j) a[j] = -s[j] / (w[j] * w[j]);
      }
      // H += D - u u^T with u = [a*p; p]; D carries the diag(p) terms of the
      // softmax Hessian pushed through the Jacobian [diag(a), I].
      kernels::mul(a, p, std::span(u).first(k));
      std::copy(p.begin(), p.end(), u.begin() + static_cast<std::ptrdiff_t>(k));
      double* h = acc.hessian.data();
      for (std::size_t row = 0; row < dim; ++row) {
        kernels::axpy(-u[row], std::span<const double>(u).subspan(row),
                      std::span<double>(h + row * dim + row, dim - row));
      }
      for (std::size_t j = 0; j < k; ++j) {
        h[j * dim + j] += a[j] * u[j];
        h[(k + j) * dim + (k + j)] += p[j];
        h[j * dim + (k + j)] += u[j];
      }
      if (mode == Mode::Inverse) {
        for (std::size_t j = 0; j < k; ++j) {
          h[j * dim + j] += r[j] * 2.0 * s[j] / (w[j] * w[j] * w[j]);
        }
      }
    }
  });

  Objective out;
  out.grad_w.assign(k, 0.0);
  out.grad_b.assign(k, 0.0);
  std::vector<double> hsum(with_hessian ? dim * dim : 0, 0.0);
  for (const auto& acc : blocks) {
    out.loss += acc.loss;
    for (std::size_t j = 0; j < k; ++j) {
      out.grad_w[j] += acc.gw[j];
      out.grad_b[j] += acc.gb[j];
    }
    for (std::size_t j = 0; j < hsum.size(); ++j) hsum[j] += acc.hessian[j];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss *= inv_n;
  for (std::size_t j = 0; j < k; ++j) {
    out.grad_w[j] *= inv_n;
    out.grad_b[j] *= inv_n;
  }
  if (with_hessian) {
    Matrix h(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = i; j < dim; ++j) {
        h(i, j) = hsum[i * dim + j] * inv_n;
        h(j, i) = h(i, j);
      }
    }
    out.hessian = std::move(h);
  }
  return out;
}

Objective objective_and_gradient(const LogitMatrix& z, const LabelVector& y,
                                 const MonotoneParams& params) {
  if (params.m != z.m()) throw DimensionError("parameter class count differs from logits");
  if (params.w.size() != params.b.size()) throw DimensionError("w and b differ in length");
  const auto data = prepare_ranked(z, y, params.k());
  return evaluate_affine(data, params.mode, params.w, params.b, false);
}

}  // namespace mcct
