#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "mcct/core.hpp"
#include "mcct/error.hpp"
#include "mcct/metrics.hpp"
#include "mcct/parallel.hpp"
#include "mcct/serialize.hpp"

namespace mcct::cli {
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class Manifest {
 public:
  Manifest(const std::string& command, const Global& g) {
    j_["command"] = command;
    j_["seed"] = g.seed;
    j_["threads"] = parallel::threads();
    j_["inputs"] = Json::object();
    j_["outputs"] = Json::array();
    j_["wall_time_seconds"] = Json::object();
  }
  void input(const std::string& name, const fs::path& p) { j_["inputs"][name] = p.string(); }
  void output(const fs::path& p) { j_["outputs"].push_back(p.string()); }
  void phase(const std::string& name, double seconds) { j_["wall_time_seconds"][name] = seconds; }
  Json& operator[](const std::string& key) { return j_[key]; }
  void write(const fs::path& primary) const { write_json(manifest_path(primary), j_); }

 private:
  Json j_;
};

void apply_global(const Global& g) { parallel::set_threads(g.threads); }

Dataset load(const Global& g, const fs::path& p) {
  return read_dataset(DatasetFile{p, g.format.value_or(format_for_path(p))});
}

std::vector<std::string> method_names(const std::vector<MethodKind>& methods) {
  std::vector<std::string> out;
  for (MethodKind k : methods) out.emplace_back(method_name(k));
  return out;
}

struct MetricColumn {
  const char* name;
  double MetricReport::*field;
};

constexpr MetricColumn kColumns[] = {
    {"ece", &MetricReport::ece},
    {"eq_mass_ece", &MetricReport::eq_mass_ece},
    {"ece_kde", &MetricReport::ece_kde},
    {"accuracy", &MetricReport::accuracy},
    {"nll", &MetricReport::nll},
    {"prediction_change_rate", &MetricReport::prediction_change_rate},
    {"uncertain_alteration_rate", &MetricReport::uncertain_alteration_rate},
};

// Estimators that enter the ranking, lower is better.
constexpr std::size_t kRankedColumns = 3;

std::string column_header() {
  std::string h;
  for (const auto& c : kColumns) h += std::string(",") + c.name;
  return h;
}

std::string column_values(const MetricReport& r) {
  std::string s;
  for (const auto& c : kColumns) s += "," + format_number(r.*c.field);
  return s;
}

Json column_json(const MetricReport& r) {
  Json j;
  for (const auto& c : kColumns) {
    const double v = r.*c.field;
    j[c.name] = std::isfinite(v) ? Json(v) : Json(nullptr);
  }
  return j;
}

// One fit-and-evaluate cell of a comparison table.
struct Cell {
  std::string method;
  bool ok = false;
  bool converged = true;
  std::string error;
  MetricReport report;
  FitSummary summary;
  double fit_seconds = 0.0;
};

Cell run_cell(MethodKind kind, const Dataset& cal, const Dataset& test, const ProbMatrix& before,
              const FitOptions& options, std::size_t bins) {
  Cell cell;
  cell.method = std::string(method_name(kind));
  try {
    const auto t0 = Clock::now();
    FittedModel fitted = fit_method(kind, cal.logits, cal.labels, options);
    cell.fit_seconds = seconds_since(t0);
    cell.summary = fitted.summary;
    cell.converged = fitted.summary.converged;
    cell.report = evaluate(before, calibrate(fitted.model, test.logits), test.labels, bins);
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.error = e.what();
    warn(cell.method + ": " + cell.error);
  }
  return cell;
}

Cell reference_cell(const ProbMatrix& before, const LabelVector& y, std::size_t bins) {
  Cell cell;
  cell.method = "uncalibrated";
  cell.report = evaluate(before, before, y, bins);
  cell.ok = true;
  return cell;
}

std::string status_of(const Cell& c) { return c.ok ? "ok" : "error"; }

Json cell_json(const Cell& c) {
  Json j;
  j["method"] = c.method;
  j["status"] = status_of(c);
  if (!c.ok) j["error"] = c.error;
  j["converged"] = c.converged;
  j["metrics"] = c.ok ? column_json(c.report) : Json(nullptr);
  return j;
}

// Mean of each metric over the successful cells; NaN entries are skipped.
MetricReport mean_report(const std::vector<const Cell*>& cells) {
  MetricReport mean;
  for (const auto& c : kColumns) {
    double total = 0.0;
    std::size_t count = 0;
    for (const Cell* cell : cells) {
      const double v = cell->report.*c.field;
      if (cell->ok && std::isfinite(v)) {
        total += v;
        ++count;
      }
    }
    mean.*c.field = count > 0 ? total / static_cast<double>(count) : kNaN;
  }
  return mean;
}

// Ascending fractional ranks (ties share the mean rank); NaN values get NaN.
std::vector<double> fractional_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size(), kNaN);
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = r;
    i = j + 1;
  }
  return rank;
}

FitOptions with_topk(FitOptions o, std::size_t topk) {
  o.topk = topk;
  return o;
}

void check_fraction(double f, const char* what) {
  if (!(f > 0.0 && f < 1.0)) {
    throw InvariantError(std::string(what) + " must lie in (0, 1), got " + format_number(f));
  }
}

}  // namespace

fs::path output_stem(const fs::path& out) {
  const auto ext = out.extension();
  if (ext == ".csv" || ext == ".json") {
    fs::path stem = out;
    stem.replace_extension();
    return stem;
  }
  return out;
}

fs::path manifest_path(const fs::path& output) { return fs::path(output.string() + ".manifest.json"); }

int cmd_fit(const Global& g, const FitArgs& a) {
  apply_global(g);
  Manifest manifest("fit", g);
  manifest.input("data", a.data);
  manifest["method"] = method_name(a.method);
  manifest["solver"] = to_json(a.options.solver);

  auto t0 = Clock::now();
  const Dataset data = load(g, a.data);
  manifest.phase("read", seconds_since(t0));

  t0 = Clock::now();
  const FittedModel fitted = fit_method(a.method, data.logits, data.labels, with_topk(a.options, a.topk));
  const double fit_seconds = seconds_since(t0);
  manifest.phase("fit", fit_seconds);

  Json model = to_json(fitted.model);
  model["converged"] = fitted.summary.converged;
  write_json(a.out, model);
  manifest.output(a.out);
  manifest["fit"] = {{"initial_loss", fitted.summary.initial_loss},
                     {"final_loss", fitted.summary.final_loss},
                     {"iterations", fitted.summary.iterations},
                     {"converged", fitted.summary.converged},
                     {"samples_used", fitted.summary.samples_used},
                     {"dropped", fitted.summary.dropped},
                     {"wall_time_seconds", fit_seconds}};
  manifest.write(a.out);
  std::cout << method_name(a.method) << ": final loss " << format_number(fitted.summary.final_loss)
            << " after " << fitted.summary.iterations << " iterations"
            << (fitted.summary.converged ? "" : " (not converged)") << "\n";
  return fitted.summary.converged ? kOk : kNotConverged;
}

int cmd_apply(const Global& g, const ApplyArgs& a) {
  apply_global(g);
  Manifest manifest("apply", g);
  manifest.input("data", a.data);
  manifest.input("model", a.model);
  auto t0 = Clock::now();
  const Dataset data = load(g, a.data);
  const CalibratedModel model = model_from_json(read_json(a.model));
  manifest.phase("read", seconds_since(t0));
  t0 = Clock::now();
  const ProbMatrix p = calibrate(model, data.logits);
  manifest.phase("apply", seconds_since(t0));
  write_probabilities_csv(a.out, p.matrix());
  manifest.output(a.out);
  manifest.write(a.out);
  return kOk;
}

int cmd_eval(const Global& g, const EvalArgs& a) {
  apply_global(g);
  Manifest manifest("eval", g);
  manifest.input("data", a.data);
  manifest.input("model", a.model);
  auto t0 = Clock::now();
  const Dataset data = load(g, a.data);
  const CalibratedModel model = model_from_json(read_json(a.model));
  manifest.phase("read", seconds_since(t0));

  t0 = Clock::now();
  const ProbMatrix before = softmax_rows(data.logits);
  const MetricReport report = evaluate(before, calibrate(model, data.logits), data.labels, a.bins);
  manifest.phase("evaluate", seconds_since(t0));

  const fs::path stem = output_stem(a.out);
  const fs::path json_path = stem.string() + ".json";
  const fs::path csv_path = stem.string() + ".csv";
  const fs::path bins_path = stem.string() + ".reliability.csv";
  Json j = to_json(report);
  j["method"] = method_name(model.kind);
  write_json(json_path, j);
  write_text(csv_path, report_csv(report));
  write_text(bins_path, bins_csv(report.bins));
  for (const auto& p : {json_path, csv_path, bins_path}) manifest.output(p);
  manifest["method"] = method_name(model.kind);
  manifest.write(stem);
  std::cout << "ece " << format_number(report.ece) << ", accuracy " << format_number(report.accuracy)
            << "\n";
  return kOk;
}

int cmd_compare(const Global& g, const CompareArgs& a) {
  apply_global(g);
  if (a.methods.empty()) throw InvariantError("compare needs at least one method");
  if (a.runs == 0) throw InvariantError("compare needs at least one run");
  check_fraction(a.split, "--split");
  Manifest manifest("compare", g);
  manifest.input("data", a.data);
  manifest["methods"] = method_names(a.methods);
  manifest["solver"] = to_json(a.options.solver);
  manifest["runs"] = a.runs;
  manifest["split"] = a.split;

  auto t0 = Clock::now();
  const Dataset data = load(g, a.data);
  manifest.phase("read", seconds_since(t0));

  // cells[r][0] is the uncalibrated reference, then one cell per method.
  std::vector<std::vector<Cell>> cells(a.runs);
  double fit_total = 0.0;
  for (std::size_t r = 0; r < a.runs; ++r) {
    const std::uint64_t seed = g.seed + r;
    const DatasetSplit split = split_dataset(data, a.split, seed);
    const ProbMatrix before = softmax_rows(split.test.logits);
    cells[r].push_back(reference_cell(before, split.test.labels, a.bins));
    for (MethodKind k : a.methods) {
      cells[r].push_back(run_cell(k, split.calibration, split.test, before, a.options, a.bins));
      fit_total += cells[r].back().fit_seconds;
    }
  }
  manifest.phase("fit", fit_total);

  const std::size_t columns = a.methods.size() + 1;
  std::vector<MetricReport> means(columns);
  std::vector<std::size_t> successes(columns, 0);
  for (std::size_t c = 0; c < columns; ++c) {
    std::vector<const Cell*> col;
    for (const auto& run : cells) {
      col.push_back(&run[c]);
      successes[c] += run[c].ok ? 1 : 0;
    }
    means[c] = mean_report(col);
  }

  // Ranks among the calibrators only.
  std::vector<std::vector<double>> ranks(kRankedColumns);
  for (std::size_t m = 0; m < kRankedColumns; ++m) {
    std::vector<double> v;
    for (std::size_t c = 1; c < columns; ++c) v.push_back(means[c].*kColumns[m].field);
    ranks[m] = fractional_ranks(v);
  }
  std::vector<double> average_rank(a.methods.size(), kNaN);
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& r : ranks) {
      if (std::isfinite(r[i])) {
        total += r[i];
        ++count;
      }
    }
    if (count > 0) average_rank[i] = total / static_cast<double>(count);
  }

  std::ostringstream csv;
  csv << "row,run,seed,method,status,converged" << column_header() << "\n";
  for (std::size_t r = 0; r < a.runs; ++r) {
    for (const Cell& c : cells[r]) {
      csv << "run," << r << ',' << g.seed + r << ',' << c.method << ',' << status_of(c) << ','
          << (c.converged ? 1 : 0);
      if (c.ok) {
        csv << column_values(c.report);
      } else {
        for (std::size_t i = 0; i < std::size(kColumns); ++i) csv << ',';
      }
      csv << "\n";
    }
  }
  for (std::size_t c = 0; c < columns; ++c) {
    csv << "mean,,," << cells[0][c].method << ',' << successes[c] << '/' << a.runs << ",";
    csv << column_values(means[c]) << "\n";
  }

  std::ostringstream rank_csv;
  rank_csv << "method";
  for (std::size_t m = 0; m < kRankedColumns; ++m) rank_csv << ",rank_" << kColumns[m].name;
  rank_csv << ",average_rank\n";
  Json rank_json = Json::array();
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    rank_csv << method_name(a.methods[i]);
    Json rj;
    rj["method"] = method_name(a.methods[i]);
    for (std::size_t m = 0; m < kRankedColumns; ++m) {
      rank_csv << ',' << format_number(ranks[m][i]);
      rj[std::string("rank_") + kColumns[m].name] =
          std::isfinite(ranks[m][i]) ? Json(ranks[m][i]) : Json(nullptr);
    }
    rank_csv << ',' << format_number(average_rank[i]) << "\n";
    rj["average_rank"] = std::isfinite(average_rank[i]) ? Json(average_rank[i]) : Json(nullptr);
    rank_json.push_back(rj);
  }

  Json j;
  j["methods"] = method_names(a.methods);
  j["runs"] = Json::array();
  for (std::size_t r = 0; r < a.runs; ++r) {
    Json run;
    run["run"] = r;
    run["seed"] = g.seed + r;
    run["cells"] = Json::array();
    for (const Cell& c : cells[r]) run["cells"].push_back(cell_json(c));
    j["runs"].push_back(run);
  }
  j["mean"] = Json::array();
  for (std::size_t c = 0; c < columns; ++c) {
    Json mj;
    mj["method"] = cells[0][c].method;
    mj["successful_runs"] = successes[c];
    mj["metrics"] = column_json(means[c]);
    j["mean"].push_back(mj);
  }
  j["ranks"] = rank_json;

  const fs::path stem = output_stem(a.out);
  const fs::path csv_path = stem.string() + ".csv";
  const fs::path rank_path = stem.string() + ".ranks.csv";
  const fs::path json_path = stem.string() + ".json";
  write_text(csv_path, csv.str());
  write_text(rank_path, rank_csv.str());
  write_json(json_path, j);
  for (const auto& p : {csv_path, rank_path, json_path}) manifest.output(p);
  manifest.write(stem);

  const bool all_ok = std::all_of(successes.begin(), successes.end(),
                                  [&](std::size_t s) { return s == a.runs; });
  return all_ok ? kOk : kPartial;
}

int cmd_sweep_size(const Global& g, const SweepSizeArgs& a) {
  apply_global(g);
  if (a.methods.empty()) throw InvariantError("sweep-size needs at least one method");
  if (a.fractions.empty()) throw InvariantError("sweep-size needs at least one fraction");
  if (a.seeds == 0) throw InvariantError("sweep-size needs at least one seed");
  check_fraction(a.split, "--split");
  for (double f : a.fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw InvariantError("fractions must lie in (0, 1], got " + format_number(f));
    }
  }
  Manifest manifest("sweep-size", g);
  manifest.input("data", a.data);
  manifest["methods"] = method_names(a.methods);
  manifest["fractions"] = a.fractions;
  manifest["seeds"] = a.seeds;
  manifest["split"] = a.split;
  manifest["solver"] = to_json(a.options.solver);

  auto t0 = Clock::now();
  const Dataset data = load(g, a.data);
  const DatasetSplit split = split_dataset(data, a.split, g.seed);
  const ProbMatrix before = softmax_rows(split.test.logits);
  manifest.phase("read", seconds_since(t0));

  std::ostringstream csv;
  csv << "row,fraction,seed,samples,method,status,converged" << column_header() << "\n";
  Json rows = Json::array();
  Json means = Json::array();
  bool all_ok = true;
  double fit_total = 0.0;
  for (double f : a.fractions) {
    std::vector<std::vector<Cell>> by_method(a.methods.size());
    std::size_t samples = 0;
    for (std::size_t s = 0; s < a.seeds; ++s) {
      const std::uint64_t seed = g.seed + s;
      const auto idx = subsample_indices(split.calibration.n(), f, seed);
      const Dataset cal = split.calibration.subset(idx);
      samples = cal.n();
      for (std::size_t mi = 0; mi < a.methods.size(); ++mi) {
        const MethodKind k = a.methods[mi];
        if (k == MethodKind::HB && cal.n() < a.options.hb_bins) {
          warn("hb: " + std::to_string(cal.n()) + " calibration samples for " +
               std::to_string(a.options.hb_bins) + " bins at fraction " + format_number(f));
        }
        Cell c = run_cell(k, cal, split.test, before, a.options, a.bins);
        fit_total += c.fit_seconds;
        all_ok = all_ok && c.ok;
        csv << "run," << format_number(f) << ',' << seed << ',' << cal.n() << ',' << c.method << ','
            << status_of(c) << ',' << (c.converged ? 1 : 0);
        if (c.ok) {
          csv << column_values(c.report);
        } else {
          for (std::size_t i = 0; i < std::size(kColumns); ++i) csv << ',';
        }
        csv << "\n";
        Json rj = cell_json(c);
        rj["fraction"] = f;
        rj["seed"] = seed;
        rj["samples"] = cal.n();
        rows.push_back(rj);
        by_method[mi].push_back(std::move(c));
      }
    }
    for (std::size_t mi = 0; mi < a.methods.size(); ++mi) {
      std::vector<const Cell*> col;
      std::size_t ok = 0;
      for (const Cell& c : by_method[mi]) {
        col.push_back(&c);
        ok += c.ok ? 1 : 0;
      }
      const MetricReport mean = mean_report(col);
      csv << "mean," << format_number(f) << ",," << samples << ',' << method_name(a.methods[mi])
          << ',' << ok << '/' << a.seeds << ',' << column_values(mean) << "\n";
      Json mj;
      mj["fraction"] = f;
      mj["method"] = method_name(a.methods[mi]);
      mj["successful_runs"] = ok;
      mj["metrics"] = column_json(mean);
      means.push_back(mj);
    }
  }
  manifest.phase("fit", fit_total);

  const fs::path stem = output_stem(a.out);
  const fs::path csv_path = stem.string() + ".csv";
  const fs::path json_path = stem.string() + ".json";
  write_text(csv_path, csv.str());
  write_json(json_path, Json{{"rows", rows}, {"mean", means}});
  manifest.output(csv_path);
  manifest.output(json_path);
  manifest.write(stem);
  return all_ok ? kOk : kPartial;
}

int cmd_sweep_topk(const Global& g, const SweepTopkArgs& a) {
  apply_global(g);
  check_fraction(a.split, "--split");
  Manifest manifest("sweep-topk", g);
  manifest.input("data", a.data);
  manifest["mode"] = a.mode == Mode::Direct ? "direct" : "inverse";
  manifest["solver"] = to_json(a.solver);
  manifest["split"] = a.split;

  auto t0 = Clock::now();
  const Dataset data = load(g, a.data);
  const DatasetSplit split = split_dataset(data, a.split, g.seed);
  const ProbMatrix before = softmax_rows(split.test.logits);
  manifest.phase("read", seconds_since(t0));

  std::vector<std::size_t> ks = a.kvalues;
  if (ks.empty()) {
    const std::size_t m = data.m();
    for (std::size_t q = 1; q <= 4; ++q) ks.push_back(std::max<std::size_t>(2, m * q / 4));
  }
  for (std::size_t k : ks) {
    if (k < 2 || k > data.m()) {
      throw InvariantError("k values must lie in [2, " + std::to_string(data.m()) + "], got " +
                           std::to_string(k));
    }
  }
  manifest["kvalues"] = ks;

  const MethodKind kind = a.mode == Mode::Direct ? MethodKind::Mcct : MethodKind::McctI;
  FitOptions options;
  options.solver = a.solver;
  std::ostringstream csv;
  csv << "k,status,converged,iterations,samples_used,dropped,fit_seconds" << column_header() << "\n";
  Json rows = Json::array();
  bool all_ok = true;
  double fit_total = 0.0;
  for (std::size_t k : ks) {
    Cell c = run_cell(kind, split.calibration, split.test, before, with_topk(options, k), a.bins);
    fit_total += c.fit_seconds;
    all_ok = all_ok && c.ok;
    csv << k << ',' << status_of(c) << ',' << (c.converged ? 1 : 0) << ',' << c.summary.iterations
        << ',' << c.summary.samples_used << ',' << c.summary.dropped << ','
        << format_number(c.fit_seconds);
    if (c.ok) {
      csv << column_values(c.report);
    } else {
      for (std::size_t i = 0; i < std::size(kColumns); ++i) csv << ',';
    }
    csv << "\n";
    Json rj = cell_json(c);
    rj["k"] = k;
    rj["iterations"] = c.summary.iterations;
    rj["samples_used"] = c.summary.samples_used;
    rj["dropped"] = c.summary.dropped;
    rj["fit_seconds"] = c.fit_seconds;
    rows.push_back(rj);
  }
  manifest.phase("fit", fit_total);

  const fs::path stem = output_stem(a.out);
  const fs::path csv_path = stem.string() + ".csv";
  const fs::path json_path = stem.string() + ".json";
  write_text(csv_path, csv.str());
  write_json(json_path, Json{{"rows", rows}});
  manifest.output(csv_path);
  manifest.output(json_path);
  manifest.write(stem);
  return all_ok ? kOk : kPartial;
}

int cmd_gen_synth(const Global& g, const GenSynthArgs& a) {
  apply_global(g);
  SynthConfig cfg = a.config;
  cfg.seed = g.seed;
  Manifest manifest("gen-synth", g);
  manifest["config"] = {{"n", cfg.n},
                        {"m", cfg.m},
                        {"alpha", cfg.alpha},
                        {"overconfidence", cfg.overconfidence},
                        {"noise_sd", cfg.noise_sd}};
  const auto t0 = Clock::now();
  const SyntheticData s = generate_synthetic(cfg);
  const DatasetFormat format = g.format.value_or(format_for_path(a.out));
  write_dataset(a.out, s.logits, s.labels, format);
  manifest.output(a.out);
  if (format == DatasetFormat::RawBinary) manifest.output(sidecar_path(a.out));
  const fs::path probs = a.out.string() + ".probs.csv";
  write_probabilities_csv(probs, s.true_probs.matrix());
  manifest.output(probs);
  manifest.phase("generate", seconds_since(t0));
  manifest.write(a.out);
  return kOk;
}

namespace {

void add_solver_flags(CLI::App* cmd, SolverConfig& cfg, std::string& config_file,
                      std::string& strategy) {
  cmd->add_option("--max-iterations", cfg.max_iterations, "Solver iteration limit");
  cmd->add_option("--stationarity-tol", cfg.stationarity_tol, "Stationarity tolerance");
  cmd->add_option("--constraint-tol", cfg.constraint_tol, "Allowed constraint violation");
  cmd->add_option("--w-floor", cfg.w_floor, "Lower bound on every w");
  cmd->add_option("--solver", strategy, "projected-newton | projected-gradient");
  cmd->add_option("--solver-config", config_file, "JSON file with solver settings");
}

// Config file first, explicit flags override it.
SolverConfig resolve_solver(const CLI::App* cmd, const SolverConfig& flags,
                            const std::string& config_file, const std::string& strategy) {
  SolverConfig cfg;
  if (!config_file.empty()) cfg = solver_config_from_json(read_json(config_file));
  if (cmd->count("--max-iterations") > 0) cfg.max_iterations = flags.max_iterations;
  if (cmd->count("--stationarity-tol") > 0) cfg.stationarity_tol = flags.stationarity_tol;
  if (cmd->count("--constraint-tol") > 0) cfg.constraint_tol = flags.constraint_tol;
  if (cmd->count("--w-floor") > 0) cfg.w_floor = flags.w_floor;
  if (!strategy.empty()) cfg.strategy = parse_strategy(strategy);
  cfg.validate();
  return cfg;
}

std::vector<MethodKind> parse_methods(const std::vector<std::string>& names) {
  std::vector<MethodKind> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

const std::vector<std::string> kAllMethods = {"mcct", "mcct-i", "ts", "vs", "hb", "ets-nll",
                                              "ets-mse"};

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Rank-wise monotone calibration of classifier logits", "mcct"};
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  std::string format;
  app.add_option("--seed", g.seed, "Seed for splits, subsampling and generation")
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--format", format, "Dataset format: csv | bin")
      ->check(CLI::IsMember({"csv", "bin"}));

  SolverConfig solver_flags;
  std::string solver_file, strategy;

  FitArgs fit;
  std::string fit_method_name = "mcct";
  auto* fit_cmd = app.add_subcommand("fit", "Fit a calibrator");
  fit_cmd->add_option("--data", fit.data, "Calibration dataset")->required();
  fit_cmd->add_option("--method", fit_method_name, "mcct | mcct-i | ts | vs | hb | ets-nll | ets-mse")
      ->check(CLI::IsMember(kAllMethods))
      ->capture_default_str();
  fit_cmd->add_option("--topk", fit.topk, "Ranks fitted by mcct/mcct-i (default: all)");
  fit_cmd->add_option("--hb-bins", fit.options.hb_bins, "Histogram binning bins")->capture_default_str();
  fit_cmd->add_option("--out", fit.out, "Model JSON")->required();
  add_solver_flags(fit_cmd, solver_flags, solver_file, strategy);

  ApplyArgs apply;
  auto* apply_cmd = app.add_subcommand("apply", "Write calibrated probabilities");
  apply_cmd->add_option("--data", apply.data)->required();
  apply_cmd->add_option("--model", apply.model)->required();
  apply_cmd->add_option("--out", apply.out, "Probability CSV")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a calibrator");
  eval_cmd->add_option("--data", eval.data)->required();
  eval_cmd->add_option("--model", eval.model)->required();
  eval_cmd->add_option("--bins", eval.bins)->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Report path (.json, .csv and .reliability.csv)")->required();

  CompareArgs compare;
  std::vector<std::string> compare_methods = kAllMethods;
  auto* compare_cmd = app.add_subcommand("compare", "Fit and evaluate several calibrators");
  compare_cmd->add_option("--data", compare.data)->required();
  compare_cmd->add_option("--methods", compare_methods)->delimiter(',')->capture_default_str();
  compare_cmd->add_option("--split", compare.split, "Calibration fraction")->capture_default_str();
  compare_cmd->add_option("--runs", compare.runs, "Repetitions with split seeds seed, seed+1, ...")
      ->capture_default_str();
  compare_cmd->add_option("--bins", compare.bins)->capture_default_str();
  compare_cmd->add_option("--topk", compare.options.topk);
  compare_cmd->add_option("--out", compare.out, "Output stem")->required();
  add_solver_flags(compare_cmd, solver_flags, solver_file, strategy);

  SweepSizeArgs sweep_size;
  sweep_size.fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::string> size_methods = kAllMethods;
  auto* size_cmd = app.add_subcommand("sweep-size", "ECE against calibration-set size");
  size_cmd->add_option("--data", sweep_size.data)->required();
  size_cmd->add_option("--fractions", sweep_size.fractions)->delimiter(',')->capture_default_str();
  size_cmd->add_option("--methods", size_methods)->delimiter(',')->capture_default_str();
  size_cmd->add_option("--seeds", sweep_size.seeds, "Subsample seeds per fraction")->capture_default_str();
  size_cmd->add_option("--split", sweep_size.split, "Calibration fraction")->capture_default_str();
  size_cmd->add_option("--bins", sweep_size.bins)->capture_default_str();
  size_cmd->add_option("--out", sweep_size.out, "Output stem")->required();
  add_solver_flags(size_cmd, solver_flags, solver_file, strategy);

  SweepTopkArgs sweep_topk;
  std::string mode = "direct";
  auto* topk_cmd = app.add_subcommand("sweep-topk", "ECE and fit time against k");
  topk_cmd->add_option("--data", sweep_topk.data)->required();
  topk_cmd->add_option("--kvalues", sweep_topk.kvalues)->delimiter(',');
  topk_cmd->add_option("--mode", mode)->check(CLI::IsMember({"direct", "inverse"}))->capture_default_str();
  topk_cmd->add_option("--split", sweep_topk.split, "Calibration fraction")->capture_default_str();
  topk_cmd->add_option("--bins", sweep_topk.bins)->capture_default_str();
  topk_cmd->add_option("--out", sweep_topk.out, "Output stem")->required();
  add_solver_flags(topk_cmd, solver_flags, solver_file, strategy);

  GenSynthArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-synth", "Generate a synthetic miscalibrated dataset");
  gen_cmd->add_option("--n", gen.config.n)->capture_default_str();
  gen_cmd->add_option("--m", gen.config.m)->capture_default_str();
  gen_cmd->add_option("--alpha", gen.config.alpha)->capture_default_str();
  gen_cmd->add_option("--overconfidence", gen.config.overconfidence)->capture_default_str();
  gen_cmd->add_option("--noise-sd", gen.config.noise_sd)->capture_default_str();
  gen_cmd->add_option("--out", gen.out)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (!format.empty()) g.format = format == "csv" ? DatasetFormat::Csv : DatasetFormat::RawBinary;
    if (*fit_cmd) {
      fit.method = parse_method(fit_method_name);
      fit.options.solver = resolve_solver(fit_cmd, solver_flags, solver_file, strategy);
      return cmd_fit(g, fit);
    }
    if (*apply_cmd) return cmd_apply(g, apply);
    if (*eval_cmd) return cmd_eval(g, eval);
    if (*compare_cmd) {
      compare.methods = parse_methods(compare_methods);
      compare.options.solver = resolve_solver(compare_cmd, solver_flags, solver_file, strategy);
      return cmd_compare(g, compare);
    }
    if (*size_cmd) {
      sweep_size.methods = parse_methods(size_methods);
      sweep_size.options.solver = resolve_solver(size_cmd, solver_flags, solver_file, strategy);
      return cmd_sweep_size(g, sweep_size);
    }
    if (*topk_cmd) {
      sweep_topk.mode = mode == "direct" ? Mode::Direct : Mode::Inverse;
      sweep_topk.solver = resolve_solver(topk_cmd, solver_flags, solver_file, strategy);
      return cmd_sweep_topk(g, sweep_topk);
    }
    if (*gen_cmd) return cmd_gen_synth(g, gen);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kUsage;
}

}  // namespace mcct::cli
