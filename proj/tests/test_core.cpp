#include <doctest.h>

#include <cmath>
#include <random>

#include "mcct/core.hpp"
#include "mcct/error.hpp"
#include "mcct/parallel.hpp"
#include "support.hpp"

using namespace mcct;

TEST_CASE("matrix types enforce their invariants") {
  CHECK_THROWS_AS(LogitMatrix::from_rows({{1.0, NAN}}), InvariantError);
  CHECK_THROWS_AS(LogitMatrix::from_rows({{1.0, INFINITY}}), InvariantError);
  CHECK_THROWS_AS(LogitMatrix::from_rows({{1.0}}), InvariantError);
  CHECK_THROWS_AS(ProbMatrix::from_rows({{0.5, 0.6}}), InvariantError);
  CHECK_THROWS_AS(ProbMatrix::from_rows({{1.2, -0.2}}), InvariantError);
  CHECK_NOTHROW(ProbMatrix::from_rows({{0.25, 0.75}}));
  CHECK_THROWS_AS(LabelVector({0, 3}).validate(3), InvariantError);
  CHECK_NOTHROW(LabelVector({0, 2}).validate(3));
}

TEST_CASE("softmax matches the textbook formula and survives large logits") {
  std::mt19937_64 rng(5);
  const auto z = testing::random_logits(rng, 40, 7, -30, 30);
  const ProbMatrix p = softmax_rows(z);
  for (std::size_t i = 0; i < z.n(); ++i) {
    const auto expected = testing::oracle_softmax(testing::row_vector(z.row(i)));
    double total = 0.0;
    for (std::size_t j = 0; j < z.m(); ++j) {
      CHECK(p(i, j) == doctest::Approx(expected[j]).epsilon(1e-13));
      total += p(i, j);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
  const ProbMatrix big = softmax_rows(LogitMatrix::from_rows({{1000.0, 999.0, -1000.0}}));
  CHECK(big(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(big(0, 2) == 0.0);
}

TEST_CASE("softmax is invariant to a per-row shift") {
  const auto a = softmax_rows(LogitMatrix::from_rows({{0.5, -1.0, 2.0}}));
  const auto b = softmax_rows(LogitMatrix::from_rows({{100.5, 99.0, 102.0}}));
  for (std::size_t j = 0; j < 3; ++j) CHECK(a(0, j) == doctest::Approx(b(0, j)).epsilon(1e-12));
}

TEST_CASE("nll averages the clamped negative log of the true-class probability") {
  const ProbMatrix p = ProbMatrix::from_rows({{0.25, 0.75}, {1.0, 0.0}});
  CHECK(nll(p, LabelVector{1, 0}) == doctest::Approx(-std::log(0.75) / 2.0));
  CHECK(nll(p, LabelVector{1, 1}) == doctest::Approx((-std::log(0.75) - std::log(kLogClamp)) / 2.0));
  CHECK(std::isfinite(nll(p, LabelVector{0, 1})));
  CHECK_THROWS_AS(nll(p, LabelVector{1}), DimensionError);
}

TEST_CASE("sort_rows sorts ascending and inverse_sort_rows undoes it") {
  std::mt19937_64 rng(9);
  const auto z = testing::random_logits(rng, 25, 11);
  const SortedRows s = sort_rows(z);
  for (std::size_t i = 0; i < z.n(); ++i) {
    const auto row = s.sorted.row(i);
    const auto perm = s.perm.row(i);
    for (std::size_t j = 0; j < z.m(); ++j) {
      CHECK(row[j] == z(i, perm[j]));
      if (j > 0) CHECK(row[j - 1] <= row[j]);
    }
  }
  CHECK(inverse_sort_rows(s.sorted, s.perm) == z);
}

TEST_CASE("ties keep column order and are reported") {
  const auto z = LogitMatrix::from_rows({{2.0, 1.0, 2.0}, {0.0, 1.0, 3.0}});
  const SortedRows s = sort_rows(z);
  CHECK(s.perm.row(0)[1] == 0);
  CHECK(s.perm.row(0)[2] == 2);
  const auto ties = validate_distinct(z);
  REQUIRE(ties.size() == 1);
  CHECK(ties[0] == Tie{0, 2.0});
  CHECK(validate_distinct(LogitMatrix::from_rows({{1.0, 2.0}})).empty());
}

TEST_CASE("argmax returns the first maximum") {
  CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0, 2.0}) == 1);
  const auto labels = argmax_rows(LogitMatrix::from_rows({{0.0, 1.0}, {5.0, -1.0}}));
  CHECK(labels == LabelVector{1, 0});
}

TEST_CASE("row-parallel results do not depend on the thread count") {
  std::mt19937_64 rng(3);
  const auto z = testing::random_logits(rng, 3000, 9);
  parallel::set_threads(1);
  const ProbMatrix one = softmax_rows(z);
  parallel::set_threads(4);
  const ProbMatrix four = softmax_rows(z);
  parallel::set_threads(1);
  CHECK(one == four);
}

TEST_CASE("for_blocks visits every row once and rethrows worker errors") {
  parallel::set_threads(3);
  std::vector<int> seen(1000, 0);
  parallel::for_blocks(seen.size(), 64, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) ++seen[i];
  });
  CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
  CHECK_THROWS_AS(parallel::for_blocks(1000, 64,
                                       [](std::size_t b, std::size_t, std::size_t) {
                                         if (b == 5) throw InvariantError("boom");
                                       }),
                  InvariantError);
  parallel::set_threads(1);
}
