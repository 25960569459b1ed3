#include <doctest.h>

#include <cmath>
#include <limits>

#include "mcct/data_io.hpp"
#include "mcct/error.hpp"
#include "mcct/serialize.hpp"

using namespace mcct;

TEST_CASE("monotone parameters use the fixed field names") {
  MonotoneParams p;
  p.mode = Mode::Inverse;
  p.m = 4;
  p.w = {2.0, 1.0 / 3.0};
  p.b = {-0.1, 0.7};
  const Json j = to_json(p);
  CHECK(j["mode"] == "inverse");
  CHECK(j["m"] == 4);
  CHECK(j["k"] == 2);
  CHECK(j["w"].size() == 2);
  CHECK(monotone_params_from_json(Json::parse(j.dump())) == p);

  Json broken = j;
  broken["mode"] = "sideways";
  CHECK_THROWS_AS(monotone_params_from_json(broken), ParseError);
  broken = j;
  broken["k"] = 3;
  CHECK_THROWS_AS(monotone_params_from_json(broken), ParseError);
  broken = j;
  broken["w"] = {1.0, 2.0};  // increasing w is invalid for the inverse map
  CHECK_THROWS_AS(monotone_params_from_json(broken), InvariantError);
  broken = j;
  broken.erase("b");
  CHECK_THROWS_AS(monotone_params_from_json(broken), ParseError);
}

TEST_CASE("every model kind round-trips through JSON text") {
  MonotoneParams mp = MonotoneParams::identity(Mode::Direct, 3, 2);
  mp.w = {0.1, 0.30000000000000004};
  const std::vector<CalibratedModel> models = {
      {MethodKind::TS, 3, TemperatureScaling{2.345678901234567}},
      {MethodKind::VS, 3, VectorScaling{{1.0, 0.5, 0.25}, {0.0, -1e-17, 3.0}}},
      {MethodKind::HB, 3, HistogramBinning{{0.0, 0.5, 1.0}, {0.2, 0.9}}},
      {MethodKind::EtsNll, 3, EnsembleTemperature{1.5, {0.7, 0.2, 0.1}}},
      {MethodKind::EtsMse, 3, EnsembleTemperature{0.8, {0.0, 0.0, 1.0}}},
      {MethodKind::Mcct, 3, mp},
  };
  for (const auto& m : models) {
    const std::string text = to_json(m).dump();
    CAPTURE(text);
    CHECK(model_from_json(Json::parse(text)) == m);
  }
  CHECK(to_json(models[0])["kind"] == "ts");
  CHECK(to_json(models[5])["mode"] == "direct");
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"kind":"platt","m":2})")), ParseError);
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"kind":"ts","m":2,"temperature":-1})")), InvariantError);
}

TEST_CASE("solver config reads the documented fields") {
  const SolverConfig cfg = solver_config_from_json(
      Json::parse(R"({"max_iterations": 50, "stationarity_tol": 1e-6, "w_floor": 1e-6, "strategy": "spg"})"));
  CHECK(cfg.max_iterations == 50);
  CHECK(cfg.stationarity_tol == 1e-6);
  CHECK(cfg.constraint_tol == SolverConfig{}.constraint_tol);
  CHECK(cfg.w_floor == 1e-6);
  CHECK(cfg.strategy == SolverStrategy::ProjectedGradient);
  CHECK(solver_config_from_json(to_json(cfg)) == cfg);
  CHECK_THROWS_AS(solver_config_from_json(Json::parse(R"({"tolerance": 1})")), ParseError);
  CHECK_THROWS_AS(solver_config_from_json(Json::parse(R"({"max_iterations": 0})")), InvariantError);
}

TEST_CASE("metric reports serialize with null for undefined values") {
  MetricReport r;
  r.n = 3;
  r.ece = 0.125;
  r.ece_kde = std::numeric_limits<double>::quiet_NaN();
  r.bins.bins = {Bin{0.0, 0.5, 1, 0.4, 0.0}, Bin{0.5, 1.0, 2, 0.8, 1.0}};
  const Json j = to_json(r);
  CHECK(j["ece"] == 0.125);
  CHECK(j["ece_kde"].is_null());
  CHECK(j["bins"].size() == 2);
  CHECK(j["bins"][1]["count"] == 2);

  const std::string csv = bins_csv(r.bins);
  CHECK(csv == "bin,lower,upper,count,mean_confidence,accuracy\n0,0,0.5,1,0.4,0\n1,0.5,1,2,0.8,1\n");
  const std::string line = report_csv(r);
  CHECK(line.find("ece_kde") != std::string::npos);
  CHECK(line.find("nan") != std::string::npos);
}
