#include "mcct/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mcct/data_io.hpp"
#include "mcct/error.hpp"

namespace mcct {
namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

template <typename T>
T field(const Json& j, const char* name) {
  if (!j.contains(name)) throw ParseError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad field '") + name + "': " + e.what());
  }
}

}  // namespace

Json to_json(const MonotoneParams& params) {
  Json j;
  j["mode"] = params.mode == Mode::Direct ? "direct" : "inverse";
  j["m"] = params.m;
  j["k"] = params.k();
  j["w"] = params.w;
  j["b"] = params.b;
  return j;
}

MonotoneParams monotone_params_from_json(const Json& j) {
  MonotoneParams p;
  const auto mode = field<std::string>(j, "mode");
  if (mode == "direct") {
    p.mode = Mode::Direct;
  } else if (mode == "inverse") {
    p.mode = Mode::Inverse;
  } else {
    throw ParseError("mode must be 'direct' or 'inverse', got '" + mode + "'");
  }
  p.m = field<std::size_t>(j, "m");
  p.w = field<std::vector<double>>(j, "w");
  p.b = field<std::vector<double>>(j, "b");
  if (j.contains("k") && field<std::size_t>(j, "k") != p.w.size()) {
    throw ParseError("k does not match the length of w");
  }
  validate(p);
  return p;
}

Json to_json(const CalibratedModel& model) {
  Json j;
  j["kind"] = method_name(model.kind);
  switch (model.kind) {
    case MethodKind::TS:
      j["m"] = model.m;
      j["temperature"] = std::get<TemperatureScaling>(model.payload).temperature;
      break;
    case MethodKind::VS: {
      const auto& vs = std::get<VectorScaling>(model.payload);
      j["m"] = model.m;
      j["scale"] = vs.scale;
      j["bias"] = vs.bias;
      break;
    }
    case MethodKind::HB: {
      const auto& hb = std::get<HistogramBinning>(model.payload);
      j["m"] = model.m;
      j["edges"] = hb.edges;
      j["confidence"] = hb.confidence;
      break;
    }
    case MethodKind::EtsNll:
    case MethodKind::EtsMse: {
      const auto& ets = std::get<EnsembleTemperature>(model.payload);
      j["m"] = model.m;
      j["temperature"] = ets.temperature;
      j["weights"] = ets.weights;
      break;
    }
    case MethodKind::Mcct:
    case MethodKind::McctI: {
      const Json params = to_json(std::get<MonotoneParams>(model.payload));
      for (const auto& [key, value] : params.items()) j[key] = value;
      break;
    }
  }
  return j;
}

CalibratedModel model_from_json(const Json& j) {
  CalibratedModel model;
  try {
    model.kind = parse_method(field<std::string>(j, "kind"));
  } catch (const InvariantError& e) {
    throw ParseError(e.what());
  }
  model.m = field<std::size_t>(j, "m");
  switch (model.kind) {
    case MethodKind::TS:
      model.payload = TemperatureScaling{field<double>(j, "temperature")};
      break;
    case MethodKind::VS:
      model.payload =
          VectorScaling{field<std::vector<double>>(j, "scale"), field<std::vector<double>>(j, "bias")};
      break;
    case MethodKind::HB:
      model.payload = HistogramBinning{field<std::vector<double>>(j, "edges"),
                                       field<std::vector<double>>(j, "confidence")};
      break;
    case MethodKind::EtsNll:
    case MethodKind::EtsMse:
      model.payload = EnsembleTemperature{field<double>(j, "temperature"),
                                          field<std::array<double, 3>>(j, "weights")};
      break;
    case MethodKind::Mcct:
    case MethodKind::McctI:
      model.payload = monotone_params_from_json(j);
      break;
  }
  validate(model);
  return model;
}

Json to_json(const SolverConfig& cfg) {
  Json j;
  j["max_iterations"] = cfg.max_iterations;
  j["stationarity_tol"] = cfg.stationarity_tol;
  j["constraint_tol"] = cfg.constraint_tol;
  j["w_floor"] = cfg.w_floor;
  j["strategy"] = strategy_name(cfg.strategy);
  return j;
}

SolverConfig solver_config_from_json(const Json& j, SolverConfig base) {
  if (!j.is_object()) throw ParseError("solver config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "max_iterations") {
      base.max_iterations = field<int>(j, "max_iterations");
    } else if (key == "stationarity_tol") {
      base.stationarity_tol = field<double>(j, "stationarity_tol");
    } else if (key == "constraint_tol") {
      base.constraint_tol = field<double>(j, "constraint_tol");
    } else if (key == "w_floor") {
      base.w_floor = field<double>(j, "w_floor");
    } else if (key == "strategy") {
      base.strategy = parse_strategy(field<std::string>(j, "strategy"));
    } else {
      throw ParseError("unknown solver config field '" + key + "'");
    }
  }
  base.validate();
  return base;
}

Json to_json(const BinStats& bins) {
  Json arr = Json::array();
  for (const Bin& b : bins.bins) {
    arr.push_back({{"lower", b.lower},
                   {"upper", b.upper},
                   {"count", b.count},
                   {"mean_confidence", b.mean_confidence},
                   {"accuracy", b.accuracy}});
  }
  return arr;
}

Json to_json(const MetricReport& r) {
  Json j;
  j["n"] = r.n;
  j["ece"] = number(r.ece);
  j["eq_mass_ece"] = number(r.eq_mass_ece);
  j["ece_kde"] = number(r.ece_kde);
  j["accuracy"] = number(r.accuracy);
  j["nll"] = number(r.nll);
  j["prediction_change_rate"] = number(r.prediction_change_rate);
  j["uncertain_alteration_rate"] = number(r.uncertain_alteration_rate);
  j["uncertain_count"] = r.uncertain_count;
  j["bins"] = to_json(r.bins);
  return j;
}

std::string bins_csv(const BinStats& bins) {
  std::ostringstream out;
  out << "bin,lower,upper,count,mean_confidence,accuracy\n";
  for (std::size_t k = 0; k < bins.bins.size(); ++k) {
    const Bin& b = bins.bins[k];
    out << k << ',' << format_number(b.lower) << ',' << format_number(b.upper) << ',' << b.count
        << ',' << format_number(b.mean_confidence) << ',' << format_number(b.accuracy) << '\n';
  }
  return out.str();
}

std::string report_csv(const MetricReport& r) {
  std::ostringstream out;
  out << "n,ece,eq_mass_ece,ece_kde,accuracy,nll,prediction_change_rate,"
         "uncertain_alteration_rate,uncertain_count\n";
  out << r.n << ',' << format_number(r.ece) << ',' << format_number(r.eq_mass_ece) << ','
      << format_number(r.ece_kde) << ',' << format_number(r.accuracy) << ','
      << format_number(r.nll) << ',' << format_number(r.prediction_change_rate) << ','
      << format_number(r.uncertain_alteration_rate) << ',' << r.uncertain_count << '\n';
  return out.str();
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace mcct
