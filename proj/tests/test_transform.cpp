#include <doctest.h>

#include <cmath>
#include <random>

#include "mcct/core.hpp"
#include "mcct/error.hpp"
#include "mcct/parallel.hpp"
#include "mcct/transform.hpp"
#include "support.hpp"

using namespace mcct;

namespace {

MonotoneParams make(Mode mode, std::size_t m, std::vector<double> w, std::vector<double> b) {
  MonotoneParams p;
  p.mode = mode;
  p.m = m;
  p.w = std::move(w);
  p.b = std::move(b);
  return p;
}

double fd_loss(const LogitMatrix& z, const LabelVector& y, MonotoneParams p, bool is_w,
               std::size_t j, double h) {
  auto& v = is_w ? p.w : p.b;
  const double keep = v[j];
  v[j] = keep + h;
  const double up = objective_and_gradient(z, y, p).loss;
  v[j] = keep - h;
  const double down = objective_and_gradient(z, y, p).loss;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("apply_map matches the rank-by-rank definition") {
  std::mt19937_64 rng(17);
  for (Mode mode : {Mode::Direct, Mode::Inverse}) {
    for (std::size_t m : {2u, 3u, 7u, 16u}) {
      const auto z = testing::random_logits(rng, 12, m);
      const auto p = testing::random_params(rng, mode, m, m);
      const LogitMatrix out = apply_map(z, p);
      for (std::size_t i = 0; i < z.n(); ++i) {
        CHECK(testing::row_vector(out.row(i)) == testing::oracle_map_row(testing::row_vector(z.row(i)), p));
      }
    }
  }
}

TEST_CASE("a hand-computed two-class row") {
  const auto z = LogitMatrix::from_rows({{3.0, 1.0}});
  const LogitMatrix d = apply_map(z, make(Mode::Direct, 2, {0.5, 2.0}, {0.0, 1.0}));
  CHECK(d(0, 0) == 7.0);  // largest logit uses the last pair: 3 * 2 + 1
  CHECK(d(0, 1) == 0.5);
  const LogitMatrix inv = apply_map(z, make(Mode::Inverse, 2, {2.0, 0.5}, {0.0, 1.0}));
  CHECK(inv(0, 0) == 7.0);
  CHECK(inv(0, 1) == 0.5);
}

TEST_CASE("identity parameters leave logits untouched") {
  std::mt19937_64 rng(1);
  const auto z = testing::random_logits(rng, 30, 6);
  for (Mode mode : {Mode::Direct, Mode::Inverse}) {
    CHECK(apply_map(z, MonotoneParams::identity(mode, 6, 6)) == z);
    CHECK(apply_map_topk(z, MonotoneParams::identity(mode, 6, 3)) == z);
  }
}

TEST_CASE("top-k map gives low ranks the first parameter pair") {
  std::mt19937_64 rng(23);
  for (Mode mode : {Mode::Direct, Mode::Inverse}) {
    const auto z = testing::random_logits(rng, 15, 9);
    for (std::size_t k : {2u, 4u, 8u}) {
      const auto p = testing::random_params(rng, mode, 9, k);
      const LogitMatrix out = apply_map_topk(z, p);
      for (std::size_t i = 0; i < z.n(); ++i) {
        CHECK(testing::row_vector(out.row(i)) == testing::oracle_map_row(testing::row_vector(z.row(i)), p));
      }
    }
    const auto full = testing::random_params(rng, mode, 9, 9);
    CHECK(apply_map_topk(z, full) == apply_map(z, full));
  }
}

TEST_CASE("invalid parameters are rejected") {
  const auto z = LogitMatrix::from_rows({{1.0, 2.0, 3.0}});
  CHECK_THROWS_AS(apply_map(z, make(Mode::Direct, 3, {1.0, 0.5, 2.0}, {0, 0, 0})), InvariantError);
  CHECK_THROWS_AS(apply_map(z, make(Mode::Direct, 3, {1, 1, 1}, {0.0, -1.0, 0.0})), InvariantError);
  CHECK_THROWS_AS(apply_map(z, make(Mode::Direct, 3, {0.0, 1, 1}, {0, 0, 0})), InvariantError);
  CHECK_THROWS_AS(apply_map(z, make(Mode::Inverse, 3, {1.0, 2.0, 3.0}, {0, 0, 0})), InvariantError);
  CHECK_THROWS_AS(apply_map(z, make(Mode::Direct, 3, {1, NAN, 1}, {0, 0, 0})), InvariantError);
  CHECK_THROWS(apply_map(z, make(Mode::Direct, 3, {1, 1}, {0, 0})));
  CHECK_THROWS_AS(apply_map_topk(z, make(Mode::Direct, 3, {1}, {0})), InvariantError);
  CHECK_THROWS(apply_map(z, make(Mode::Direct, 4, {1, 1, 1, 1}, {0, 0, 0, 0})));
}

TEST_CASE("constraint vectors and violation") {
  const auto p = make(Mode::Direct, 3, {1.0, 0.5, 2.0}, {0.0, 0.25, 0.0});
  const auto c = constraint_vectors(p);
  CHECK(c.w == std::vector<double>{-0.5, 1.5});
  CHECK(c.b == std::vector<double>{0.25, -0.25});
  CHECK(constraint_violation(p) == 0.5);
  const auto inv = make(Mode::Inverse, 3, {2.0, 1.0, 1.0}, {0.0, 0.0, 1.0});
  CHECK(constraint_vectors(inv).w == std::vector<double>{1.0, 0.0});
  CHECK(constraint_violation(inv) == 0.0);
  CHECK(constraint_violation(inv, 1.5) == 0.5);
}

TEST_CASE("order is preserved whenever the larger logit is non-negative") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> classes(2, 30);
  for (int trial = 0; trial < 500; ++trial) {
    const Mode mode = trial % 2 ? Mode::Direct : Mode::Inverse;
    const std::size_t m = classes(rng);
    auto row = testing::uniform_vector(rng, m, -8, 8);
    row[trial % m] = std::abs(row[trial % m]);  // at least one non-negative entry
    const auto p = testing::random_params(rng, mode, m, m);
    const LogitMatrix z(1, m, row);
    const LogitMatrix out = apply_map(z, p);
    CHECK(argmax(out.row(0)) == argmax(z.row(0)));
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        if (row[a] > row[b] && row[a] >= 0.0) CHECK(out(0, a) > out(0, b));
      }
    }
  }
}

TEST_CASE("order can flip for a pair of negative logits") {
  // Growing scales pull the larger of two negative logits further down.
  const auto z = LogitMatrix::from_rows({{-3.0, -2.0}});
  const LogitMatrix d = apply_map(z, make(Mode::Direct, 2, {1.0, 2.0}, {0.0, 0.0}));
  CHECK(d(0, 0) == -3.0);
  CHECK(d(0, 1) == -4.0);
  CHECK(argmax(d.row(0)) != argmax(z.row(0)));
  const LogitMatrix inv = apply_map(z, make(Mode::Inverse, 2, {1.0, 0.5}, {0.0, 0.0}));
  CHECK(inv(0, 1) == -4.0);
}

TEST_CASE("full-rank objective equals the NLL of the mapped softmax") {
  std::mt19937_64 rng(41);
  for (Mode mode : {Mode::Direct, Mode::Inverse}) {
    const auto z = testing::random_logits(rng, 37, 6);
    const auto y = testing::random_labels(rng, 37, 6);
    const auto p = testing::random_params(rng, mode, 6, 6);
    const double expected = nll(softmax_rows(apply_map(z, p)), y);
    CHECK(objective_and_gradient(z, y, p).loss == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gradient agrees with central differences") {
  std::mt19937_64 rng(43);
  for (Mode mode : {Mode::Direct, Mode::Inverse}) {
    for (std::size_t k : {3u, 5u}) {
      const auto z = testing::random_logits(rng, 20, 5, -3, 3);
      const auto y = testing::random_labels(rng, 20, 5);
      const auto p = testing::random_params(rng, mode, 5, k);
      const Objective obj = objective_and_gradient(z, y, p);
      for (std::size_t j = 0; j < k; ++j) {
        CHECK(obj.grad_w[j] == doctest::Approx(fd_loss(z, y, p, true, j, 1e-6)).epsilon(1e-6));
        CHECK(obj.grad_b[j] == doctest::Approx(fd_loss(z, y, p, false, j, 1e-6)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("Hessian agrees with differences of the gradient") {
  std::mt19937_64 rng(47);
  for (Mode mode : {Mode::Direct, Mode::Inverse}) {
    const auto z = testing::random_logits(rng, 25, 4, -3, 3);
    const auto y = testing::random_labels(rng, 25, 4);
    const RankedData data = prepare_ranked(z, y, 4);
    const auto p = testing::random_params(rng, mode, 4, 4);
    const Objective obj = evaluate_affine(data, mode, p.w, p.b, true);
    REQUIRE(obj.hessian.has_value());
    const Matrix& H = *obj.hessian;
    const double h = 1e-6;
    for (std::size_t c = 0; c < 8; ++c) {
      auto w = p.w, b = p.b;
      auto& v = c < 4 ? w : b;
      v[c % 4] += h;
      const Objective up = evaluate_affine(data, mode, w, b, false);
      v[c % 4] -= 2 * h;
      const Objective down = evaluate_affine(data, mode, w, b, false);
      for (std::size_t r = 0; r < 8; ++r) {
        const double gu = r < 4 ? up.grad_w[r] : up.grad_b[r - 4];
        const double gd = r < 4 ? down.grad_w[r] : down.grad_b[r - 4];
        CHECK(H(r, c) == doctest::Approx((gu - gd) / (2 * h)).epsilon(1e-5).scale(1e-6));
        CHECK(H(r, c) == H(c, r));
      }
    }
  }
}

TEST_CASE("truncation drops samples whose class is outside the top k") {
  const auto z = LogitMatrix::from_rows({{0.1, 0.9, 0.5}, {0.8, 0.2, 0.3}, {0.3, 0.1, 0.2}});
  const LabelVector y{0, 1, 2};
  const RankedData d = prepare_ranked(z, y, 2);
  CHECK(d.dropped == 2);  // rows 0 and 1 carry their label at the lowest rank
  REQUIRE(d.x.rows() == 1);
  CHECK(d.x(0, 0) == 0.2);
  CHECK(d.x(0, 1) == 0.3);
  CHECK(d.target[0] == 0);
  CHECK(prepare_ranked(z, y, 3).dropped == 0);
  CHECK_THROWS_AS(prepare_ranked(z, y, 1), InvariantError);
}

TEST_CASE("objective is bitwise independent of the thread count") {
  std::mt19937_64 rng(53);
  const auto z = testing::random_logits(rng, 2000, 8);
  const auto y = testing::random_labels(rng, 2000, 8);
  const RankedData data = prepare_ranked(z, y, 8);
  const auto p = testing::random_params(rng, Mode::Direct, 8, 8);
  parallel::set_threads(1);
  const Objective a = evaluate_affine(data, Mode::Direct, p.w, p.b, true);
  parallel::set_threads(5);
  const Objective b = evaluate_affine(data, Mode::Direct, p.w, p.b, true);
  parallel::set_threads(1);
  CHECK(a.loss == b.loss);
  CHECK(a.grad_w == b.grad_w);
  CHECK(a.grad_b == b.grad_b);
  CHECK(*a.hessian == *b.hessian);
}

TEST_CASE("worked examples") {
  const auto z = LogitMatrix::from_rows({{1.0, 3.0, 2.0}});
  CHECK(apply_map(z, make(Mode::Direct, 3, {1, 1, 1}, {0, 0, 0})) == z);
  CHECK(apply_map(z, make(Mode::Direct, 3, {1, 2, 3}, {0, 0, 0})) ==
        LogitMatrix::from_rows({{1.0, 9.0, 4.0}}));

  const auto half = softmax_rows(apply_map(LogitMatrix::from_rows({{0.0, std::log(2.0)}}),
                                           make(Mode::Direct, 2, {0.5, 0.5}, {0, 0})));
  CHECK(half(0, 0) == doctest::Approx(1.0 / (1.0 + std::sqrt(2.0))).epsilon(1e-14));
  CHECK(half(0, 1) == doctest::Approx(std::sqrt(2.0) / (1.0 + std::sqrt(2.0))).epsilon(1e-14));

  const auto topk = apply_map_topk(LogitMatrix::from_rows({{1.0, 2.0, 3.0, 4.0}}),
                                   make(Mode::Direct, 4, {1, 2}, {0, 0}));
  CHECK(topk == LogitMatrix::from_rows({{1.0, 2.0, 3.0, 8.0}}));
}

TEST_CASE("single-sample objective reduces to plain softmax NLL") {
  const auto z = LogitMatrix::from_rows({{0.0, 0.1}});
  const LabelVector y{0};
  const Objective d = objective_and_gradient(z, y, make(Mode::Direct, 2, {1, 1}, {0, 0}));
  const auto p = testing::oracle_softmax({0.0, 0.1});
  CHECK(d.loss == doctest::Approx(-std::log(p[0])).epsilon(1e-14));
  // Sorted order equals column order here, so the permuted label is (1, 0).
  CHECK(d.grad_b[0] == doctest::Approx(p[0] - 1.0).epsilon(1e-14));
  CHECK(d.grad_b[1] == doctest::Approx(p[1]).epsilon(1e-14));
  const Objective inv = objective_and_gradient(z, y, make(Mode::Inverse, 2, {1, 1}, {0, 0}));
  CHECK(inv.loss == d.loss);
}

TEST_CASE("direct and inverse parameterizations describe the same maps") {
  std::mt19937_64 rng(59);
  const auto z = testing::random_logits(rng, 50, 8);
  const auto p = testing::random_params(rng, Mode::Direct, 8, 8);
  MonotoneParams q = p;
  q.mode = Mode::Inverse;
  for (double& w : q.w) w = 1.0 / w;
  const LogitMatrix a = apply_map(z, p);
  const LogitMatrix b = apply_map(z, q);
  for (std::size_t i = 0; i < z.n(); ++i) {
    for (std::size_t j = 0; j < z.m(); ++j) CHECK(std::abs(a(i, j) - b(i, j)) <= 1e-12 * (1 + std::abs(a(i, j))));
  }
}

TEST_CASE("temperature scaling is the constant-scale special case") {
  std::mt19937_64 rng(61);
  const auto z = testing::random_logits(rng, 40, 6);
  for (double t : {0.5, 2.0}) {
    const auto p = softmax_rows(apply_map(z, make(Mode::Direct, 6, std::vector<double>(6, 1.0 / t),
                                                  std::vector<double>(6, 0.0))));
    for (std::size_t i = 0; i < z.n(); ++i) {
      std::vector<double> scaled = testing::row_vector(z.row(i));
      for (double& v : scaled) v /= t;
      const auto expected = testing::oracle_softmax(scaled);
      for (std::size_t j = 0; j < z.m(); ++j) CHECK(std::abs(p(i, j) - expected[j]) <= 1e-12);
    }
  }
}

TEST_CASE("dropped count matches a brute-force rank scan") {
  std::mt19937_64 rng(67);
  const auto z = testing::random_logits(rng, 400, 12);
  const auto y = testing::random_labels(rng, 400, 12);
  for (std::size_t k : {2u, 5u, 12u}) {
    std::size_t expected = 0;
    for (std::size_t i = 0; i < z.n(); ++i) {
      std::size_t below = 0;  // classes with a smaller logit than the true class
      for (std::size_t j = 0; j < z.m(); ++j) below += z(i, j) < z(i, y[i]) ? 1 : 0;
      expected += below < 12 - k ? 1 : 0;
    }
    CHECK(prepare_ranked(z, y, k).dropped == expected);
  }
}
