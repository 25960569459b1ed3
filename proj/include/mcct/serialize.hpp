#pragma once

// JSON and CSV forms of models, solver settings and metric reports.
//
// Monotone parameters:  {"mode": "direct"|"inverse", "m", "k", "w": [...], "b": [...]}
// Calibrated models add a "kind" discriminator:
//   ts                 {"kind", "m", "temperature"}
//   vs                 {"kind", "m", "scale": [...], "bias": [...]}
//   hb                 {"kind", "m", "edges": [...], "confidence": [...]}
//   ets-nll, ets-mse   {"kind", "m", "temperature", "weights": [w1, w2, w3]}
//   mcct, mcct-i       {"kind", plus the monotone parameter fields}
// Non-finite metric values are written as null.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "mcct/baselines.hpp"
#include "mcct/metrics.hpp"
#include "mcct/optim.hpp"
#include "mcct/transform.hpp"

namespace mcct {

using Json = nlohmann::ordered_json;

Json to_json(const MonotoneParams& params);
MonotoneParams monotone_params_from_json(const Json& j);

Json to_json(const CalibratedModel& model);
CalibratedModel model_from_json(const Json& j);

/// Strategy is included as "strategy"; missing fields keep their defaults.
Json to_json(const SolverConfig& cfg);
SolverConfig solver_config_from_json(const Json& j, SolverConfig base = {});

Json to_json(const BinStats& bins);
Json to_json(const MetricReport& report);

/// "bin,lower,upper,count,mean_confidence,accuracy", one line per bin.
std::string bins_csv(const BinStats& bins);

/// Header line of metric names and a single line of values.
std::string report_csv(const MetricReport& report);

/// Throws Error with the path on failure.
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mcct
