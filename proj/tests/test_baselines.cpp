#include <doctest.h>

#include <cmath>
#include <random>

#include "mcct/baselines.hpp"
#include "mcct/core.hpp"
#include "mcct/data_io.hpp"
#include "mcct/error.hpp"
#include "mcct/metrics.hpp"
#include "support.hpp"

using namespace mcct;

namespace {

DatasetSplit synth_split(std::size_t n, std::size_t m, double c, std::uint64_t seed,
                         double calib_fraction = 0.5) {
  SynthConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.overconfidence = c;
  cfg.seed = seed;
  const auto s = generate_synthetic(cfg);
  return split_dataset(Dataset{s.logits, s.labels}, calib_fraction, seed);
}

double temperature_of(const CalibratedModel& m) {
  return std::get<TemperatureScaling>(m.payload).temperature;
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (MethodKind k : {MethodKind::TS, MethodKind::VS, MethodKind::HB, MethodKind::EtsNll,
                       MethodKind::EtsMse, MethodKind::Mcct, MethodKind::McctI}) {
    CHECK(parse_method(method_name(k)) == k);
  }
  CHECK_THROWS_AS(parse_method("dirichlet"), InvariantError);
}

TEST_CASE("temperature scaling recovers the generating temperature") {
  const auto calibrated = synth_split(20000, 10, 1.0, 1);
  CHECK(temperature_of(fit_ts(calibrated.calibration.logits, calibrated.calibration.labels)) ==
        doctest::Approx(1.0).epsilon(0.05));
  const auto hot = synth_split(20000, 10, 2.5, 2);
  CHECK(temperature_of(fit_ts(hot.calibration.logits, hot.calibration.labels)) ==
        doctest::Approx(2.5).epsilon(0.02));
}

TEST_CASE("temperature fit is a minimum of the NLL") {
  const auto d = synth_split(3000, 5, 1.7, 3);
  FitSummary summary;
  const double t = temperature_of(fit_ts(d.calibration.logits, d.calibration.labels, &summary));
  const auto loss_at = [&](double temp) {
    const CalibratedModel m{MethodKind::TS, 5, TemperatureScaling{temp}};
    return nll(calibrate(m, d.calibration.logits), d.calibration.labels);
  };
  CHECK(summary.final_loss == doctest::Approx(loss_at(t)).epsilon(1e-12));
  CHECK(loss_at(t) <= loss_at(t * (1 + 1e-3)));
  CHECK(loss_at(t) <= loss_at(t * (1 - 1e-3)));
  CHECK(summary.final_loss <= summary.initial_loss);
}

TEST_CASE("unit temperature and identity scaling change nothing") {
  std::mt19937_64 rng(101);
  const auto z = testing::random_logits(rng, 30, 4);
  const ProbMatrix base = softmax_rows(z);
  CHECK(calibrate({MethodKind::TS, 4, TemperatureScaling{1.0}}, z) == base);
  const CalibratedModel vs{MethodKind::VS, 4, VectorScaling{std::vector<double>(4, 1.0), std::vector<double>(4, 0.0)}};
  CHECK(calibrate(vs, z) == base);
}

TEST_CASE("ensemble weights at the corners reproduce their components") {
  std::mt19937_64 rng(103);
  const auto z = testing::random_logits(rng, 30, 5);
  const ProbMatrix ts = calibrate({MethodKind::TS, 5, TemperatureScaling{1.7}}, z);
  const ProbMatrix first = calibrate({MethodKind::EtsNll, 5, EnsembleTemperature{1.7, {1.0, 0.0, 0.0}}}, z);
  CHECK(first == ts);
  const ProbMatrix uniform = calibrate({MethodKind::EtsMse, 5, EnsembleTemperature{1.7, {0.0, 0.0, 1.0}}}, z);
  for (std::size_t i = 0; i < z.n(); ++i) {
    for (std::size_t j = 0; j < 5; ++j) CHECK(uniform(i, j) == 0.2);
  }
}

TEST_CASE("ensemble fits put their weight on the temperature-scaled component") {
  const auto d = synth_split(10000, 10, 2.5, 5);
  for (EnsembleLoss loss : {EnsembleLoss::Nll, EnsembleLoss::Mse}) {
    const CalibratedModel m = fit_ets(d.calibration.logits, d.calibration.labels, loss);
    const auto& ets = std::get<EnsembleTemperature>(m.payload);
    CHECK(ets.weights[0] >= 0.9);
    CHECK(ets.weights[0] + ets.weights[1] + ets.weights[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_NOTHROW(validate(m));
    const ProbMatrix p = calibrate(m, d.test.logits);
    for (std::size_t i = 0; i < p.n(); ++i) {
      double total = 0.0;
      for (double v : p.row(i)) total += v;
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("vector scaling nests temperature scaling") {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const auto d = synth_split(6000, 6, 2.0, seed);
    const CalibratedModel ts = fit_ts(d.calibration.logits, d.calibration.labels);
    FitSummary summary;
    const CalibratedModel vs = fit_vs(d.calibration.logits, d.calibration.labels, &summary);
    CHECK(summary.converged);
    // In-sample the nesting is exact up to solver tolerance.
    CHECK(nll(calibrate(vs, d.calibration.logits), d.calibration.labels) <=
          nll(calibrate(ts, d.calibration.logits), d.calibration.labels) + 1e-9);
    // Out of sample VS pays roughly (extra parameters) / (2 n) for its freedom.
    const double allowance = 2.0 * 11.0 / (2.0 * static_cast<double>(d.calibration.logits.n()));
    CHECK(nll(calibrate(vs, d.test.logits), d.test.labels) <=
          nll(calibrate(ts, d.test.logits), d.test.labels) + allowance);
  }
}

TEST_CASE("argmax is preserved by TS and ETS but not always by VS") {
  const auto d = synth_split(2100, 20, 2.5, 12, 100.0 / 2100.0);
  const ProbMatrix before = softmax_rows(d.test.logits);
  const LabelVector base = argmax_rows(before);
  for (MethodKind k : {MethodKind::TS, MethodKind::EtsNll, MethodKind::EtsMse, MethodKind::Mcct, MethodKind::McctI}) {
    const FittedModel f = fit_method(k, d.calibration.logits, d.calibration.labels);
    const ProbMatrix after = calibrate(f.model, d.test.logits);
    CAPTURE(method_name(k));
    CHECK(argmax_rows(after) == base);
    const auto diag = ranking_diagnostics(before, after);
    CHECK(diag.prediction_change_rate == 0.0);
    CHECK(diag.uncertain_alteration_rate == 0.0);
  }
  const FittedModel vs = fit_method(MethodKind::VS, d.calibration.logits, d.calibration.labels);
  const ProbMatrix after = calibrate(vs.model, d.test.logits);
  const auto diag = ranking_diagnostics(before, after);
  CHECK(diag.prediction_change_rate > 0.0);

  // Scalar scan oracle for the two rates.
  std::size_t changed = 0, uncertain = 0, uncertain_changed = 0;
  for (std::size_t i = 0; i < before.n(); ++i) {
    double top = -1.0;
    std::size_t arg_b = 0, arg_a = 0;
    for (std::size_t j = 0; j < before.m(); ++j) {
      if (before(i, j) > top) {
        top = before(i, j);
        arg_b = j;
      }
      if (after(i, j) > after(i, arg_a)) arg_a = j;
    }
    changed += arg_a != arg_b;
    if (top < 0.7) {
      ++uncertain;
      uncertain_changed += arg_a != arg_b;
    }
  }
  CHECK(diag.prediction_change_rate == static_cast<double>(changed) / static_cast<double>(before.n()));
  CHECK(diag.uncertain_alteration_rate == static_cast<double>(uncertain_changed) / static_cast<double>(uncertain));
}

TEST_CASE("histogram binning follows per-bin accuracy") {
  // All correct at confidence 0.95: that bin maps to 1, empty bins keep midpoints.
  const ProbMatrix p = ProbMatrix::from_rows({{0.95, 0.05}, {0.95, 0.05}, {0.05, 0.95}});
  const CalibratedModel m = fit_hb(p, LabelVector{0, 0, 1});
  const auto& hb = std::get<HistogramBinning>(m.payload);
  REQUIRE(hb.confidence.size() == 15);
  CHECK(hb.confidence[14] == 1.0);
  CHECK(hb.confidence[0] == doctest::Approx(0.5 / 15.0));
  CHECK(hb.confidence[7] == doctest::Approx(7.5 / 15.0));
  CHECK_NOTHROW(validate(m));
}

TEST_CASE("histogram binning matches a group-by oracle") {
  std::mt19937_64 rng(107);
  const auto z = testing::random_logits(rng, 50, 4, -2, 2);
  const auto y = testing::random_labels(rng, 50, 4);
  const ProbMatrix p = softmax_rows(z);
  const CalibratedModel model = fit_hb(p, y, 10);
  const auto& hb = std::get<HistogramBinning>(model.payload);
  for (std::size_t k = 0; k < 10; ++k) {
    const double lo = k / 10.0, hi = (k + 1) / 10.0;
    double hits = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < 50; ++i) {
      const auto r = p.row(i);
      const std::size_t top = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
      if (r[top] > lo && r[top] <= hi) {
        ++count;
        hits += top == y[i];
      }
    }
    const double expected = count ? hits / static_cast<double>(count) : 0.5 * (lo + hi);
    CHECK(hb.confidence[k] == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("binning redistributes the remaining mass proportionally") {
  HistogramBinning hb;
  hb.edges = {0.0, 0.5, 1.0};
  hb.confidence = {0.4, 0.8};
  const ProbMatrix out = apply_binning(hb, ProbMatrix::from_rows({{0.6, 0.3, 0.1}, {1.0, 0.0, 0.0}}));
  CHECK(out(0, 0) == 0.8);
  CHECK(out(0, 1) == doctest::Approx(0.15));
  CHECK(out(0, 2) == doctest::Approx(0.05));
  CHECK(out(1, 1) == doctest::Approx(0.1));
  CHECK(out(1, 2) == doctest::Approx(0.1));
}

TEST_CASE("model validation rejects broken payloads") {
  CHECK_THROWS_AS(validate({MethodKind::TS, 3, TemperatureScaling{0.0}}), InvariantError);
  CHECK_THROWS_AS(validate({MethodKind::TS, 3, VectorScaling{}}), InvariantError);
  CHECK_THROWS_AS(validate({MethodKind::EtsNll, 3, EnsembleTemperature{1.0, {0.5, 0.6, 0.0}}}), InvariantError);
  CHECK_THROWS_AS(validate({MethodKind::EtsNll, 3, EnsembleTemperature{1.0, {1.2, -0.2, 0.0}}}), InvariantError);
  CHECK_THROWS_AS(validate({MethodKind::HB, 3, HistogramBinning{{0.0, 0.6, 0.5, 1.0}, {0.1, 0.2, 0.3}}}), InvariantError);
  CHECK_THROWS_AS(validate({MethodKind::HB, 3, HistogramBinning{{0.1, 1.0}, {0.5}}}), InvariantError);
  CHECK_THROWS_AS(validate({MethodKind::VS, 3, VectorScaling{{1, 1}, {0, 0}}}), InvariantError);
  CHECK_THROWS_AS(validate(CalibratedModel{MethodKind::McctI, 3, MonotoneParams::identity(Mode::Direct, 3, 3)}),
                  InvariantError);
  std::mt19937_64 rng(109);
  CHECK_THROWS_AS(calibrate({MethodKind::TS, 3, TemperatureScaling{1.0}}, testing::random_logits(rng, 2, 4)),
                  DimensionError);
}

TEST_CASE("fit_method covers every calibrator") {
  const auto d = synth_split(2000, 5, 2.0, 13);
  for (MethodKind k : {MethodKind::TS, MethodKind::VS, MethodKind::HB, MethodKind::EtsNll,
                       MethodKind::EtsMse, MethodKind::Mcct, MethodKind::McctI}) {
    const FittedModel f = fit_method(k, d.calibration.logits, d.calibration.labels);
    CAPTURE(method_name(k));
    CHECK(f.model.kind == k);
    CHECK(f.model.m == 5);
    CHECK_NOTHROW(validate(f.model));
    CHECK(f.summary.converged);
    const ProbMatrix p = calibrate(f.model, d.test.logits);
    CHECK(p.n() == d.test.n());
  }
  FitOptions opts;
  opts.topk = 3;
  const FittedModel top = fit_method(MethodKind::Mcct, d.calibration.logits, d.calibration.labels, opts);
  CHECK(std::get<MonotoneParams>(top.model.payload).k() == 3);
}
