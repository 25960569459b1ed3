#pragma once

// Command-line workflows. Each command reads its inputs, writes its outputs
// plus a "<output>.manifest.json" describing the run, and returns an exit code.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcct/baselines.hpp"
#include "mcct/data_io.hpp"
#include "mcct/optim.hpp"

namespace mcct::cli {

enum ExitCode : int {
  kOk = 0,
  kError = 1,         // unreadable input, bad data, incompatible model
  kUsage = 2,         // bad flags
  kNotConverged = 3,  // fit finished without meeting the tolerance; model still written
  kPartial = 4,       // some compare/sweep cells failed
};

struct Global {
  std::uint64_t seed = 0;
  unsigned threads = 0;                 // 0: all hardware threads
  std::optional<DatasetFormat> format;  // overrides extension-based detection
};

struct FitArgs {
  std::filesystem::path data;
  MethodKind method = MethodKind::Mcct;
  std::size_t topk = 0;
  std::filesystem::path out;
  FitOptions options;
};

struct ApplyArgs {
  std::filesystem::path data;
  std::filesystem::path model;
  std::filesystem::path out;
};

struct EvalArgs {
  std::filesystem::path data;
  std::filesystem::path model;
  std::size_t bins = 15;
  std::filesystem::path out;
};

struct CompareArgs {
  std::filesystem::path data;
  std::vector<MethodKind> methods;
  double split = 0.5;  // calibration fraction
  std::size_t runs = 10;
  std::size_t bins = 15;
  std::filesystem::path out;  // stem: writes .csv, .ranks.csv and .json
  FitOptions options;
};

struct SweepSizeArgs {
  std::filesystem::path data;
  std::vector<double> fractions;
  std::vector<MethodKind> methods;
  std::size_t seeds = 10;
  double split = 0.5;
  std::size_t bins = 15;
  std::filesystem::path out;  // stem: writes .csv and .json
  FitOptions options;
};

struct SweepTopkArgs {
  std::filesystem::path data;
  std::vector<std::size_t> kvalues;
  Mode mode = Mode::Direct;
  double split = 0.5;
  std::size_t bins = 15;
  std::filesystem::path out;  // stem: writes .csv and .json
  SolverConfig solver;
};

struct GenSynthArgs {
  SynthConfig config;  // seed comes from Global
  std::filesystem::path out;
};

int cmd_fit(const Global& g, const FitArgs& a);
int cmd_apply(const Global& g, const ApplyArgs& a);
int cmd_eval(const Global& g, const EvalArgs& a);
int cmd_compare(const Global& g, const CompareArgs& a);
int cmd_sweep_size(const Global& g, const SweepSizeArgs& a);
int cmd_sweep_topk(const Global& g, const SweepTopkArgs& a);
int cmd_gen_synth(const Global& g, const GenSynthArgs& a);

/// Parses argv-style arguments (without the program name) and runs the
/// selected command.
int run(const std::vector<std::string>& args);

/// Output stem: a trailing .csv or .json extension is dropped.
std::filesystem::path output_stem(const std::filesystem::path& out);

std::filesystem::path manifest_path(const std::filesystem::path& output);

}  // namespace mcct::cli
