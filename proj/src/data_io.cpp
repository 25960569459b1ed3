#include "mcct/data_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace mcct {
namespace fs = std::filesystem;

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  return {logits.select_rows(idx), labels.select(idx)};
}

DatasetFormat format_for_path(const fs::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::RawBinary;
}

fs::path sidecar_path(const fs::path& path) {
  fs::path p = path;
  p += ".meta.json";
  return p;
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = trim(text.substr(start, nl - start));
    if (!line.empty()) lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

Dataset read_csv(const fs::path& path) {
  const std::string text = read_text(path);
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(path.string() + ": empty file");

  const auto header = split_fields(lines[0]);
  if (header.size() < 3 || trim(header.back()) != "label") {
    throw ParseError(path.string() + ": header must be z0,...,z{m-1},label");
  }
  const std::size_t m = header.size() - 1;
  for (std::size_t j = 0; j < m; ++j) {
    if (trim(header[j]) != "z" + std::to_string(j)) {
      throw ParseError(path.string() + ": header column " + std::to_string(j) + " must be z" +
                       std::to_string(j));
    }
  }

  const std::size_t n = lines.size() - 1;
  std::vector<double> values;
  values.reserve(n * m);
  std::vector<LabelVector::value_type> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = split_fields(lines[i + 1]);
    const std::string where = path.string() + ":" + std::to_string(i + 2);
    if (fields.size() != m + 1) {
      throw ParseError(where + ": expected " + std::to_string(m + 1) + " fields, found " +
                       std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < m; ++j) {
      double v = 0.0;
      if (!parse_number(fields[j], v) || !std::isfinite(v)) {
        throw ParseError(where + ": bad logit '" + std::string(fields[j]) + "'");
      }
      values.push_back(v);
    }
    long long label = 0;
    if (!parse_number(fields[m], label)) {
      throw ParseError(where + ": bad label '" + std::string(fields[m]) + "'");
    }
    if (label < 0 || static_cast<unsigned long long>(label) >= m) {
      throw LabelRangeError(where + ": label " + std::to_string(label) + " outside [0, " +
                            std::to_string(m) + ")");
    }
    labels.push_back(static_cast<LabelVector::value_type>(label));
  }
  if (n == 0) throw ParseError(path.string() + ": no samples");
  return {LogitMatrix(n, m, std::move(values)), LabelVector(std::move(labels))};
}

template <typename T>
T from_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

Dataset read_binary(const fs::path& path) {
  const fs::path meta_path = sidecar_path(path);
  if (!fs::exists(meta_path)) throw SidecarError("missing sidecar " + meta_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw SidecarError(meta_path.string() + ": " + e.what());
  }
  if (!meta.contains("n") || !meta.contains("m") || !meta["n"].is_number_unsigned() ||
      !meta["m"].is_number_unsigned()) {
    throw SidecarError(meta_path.string() + ": n and m must be non-negative integers");
  }
  if (meta.value("dtype", std::string()) != "f32") {
    throw SidecarError(meta_path.string() + ": only dtype f32 is supported");
  }
  if (meta.contains("v") && meta["v"] != 1) {
    throw SidecarError(meta_path.string() + ": unsupported sidecar version");
  }
  const auto n = meta["n"].get<std::size_t>();
  const auto m = meta["m"].get<std::size_t>();
  const std::uintmax_t expected = n * m * sizeof(float) + n * sizeof(std::uint32_t);
  const std::uintmax_t actual = fs::file_size(path);
  if (actual != expected) {
    throw SidecarError(path.string() + ": " + std::to_string(actual) + " bytes, sidecar implies " +
                       std::to_string(expected));
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<float> raw(n * m);
  std::vector<std::uint32_t> raw_labels(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(raw_labels.data()),
          static_cast<std::streamsize>(raw_labels.size() * sizeof(std::uint32_t)));
  if (!in) throw ParseError(path.string() + ": short read");

  std::vector<double> values(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    values[i] = static_cast<double>(from_little_endian(raw[i]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    raw_labels[i] = from_little_endian(raw_labels[i]);
    if (raw_labels[i] >= m) {
      throw LabelRangeError(path.string() + ": label " + std::to_string(raw_labels[i]) +
                            " at sample " + std::to_string(i) + " outside [0, " +
                            std::to_string(m) + ")");
    }
  }
  return {LogitMatrix(n, m, std::move(values)), LabelVector(std::move(raw_labels))};
}

void write_csv(const fs::path& path, const LogitMatrix& z, const LabelVector& y) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t j = 0; j < z.m(); ++j) out << 'z' << j << ',';
  out << "label\n";
  for (std::size_t i = 0; i < z.n(); ++i) {
    for (double v : z.row(i)) out << format_number(v) << ',';
    out << y[i] << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

void write_binary(const fs::path& path, const LogitMatrix& z, const LabelVector& y) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (double v : z.matrix().values()) {
    const float f = from_little_endian(static_cast<float>(v));
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
  for (auto label : y) {
    const std::uint32_t l = from_little_endian(static_cast<std::uint32_t>(label));
    out.write(reinterpret_cast<const char*>(&l), sizeof l);
  }
  if (!out) throw Error("write failed for " + path.string());

  const nlohmann::json meta = {{"v", 1}, {"n", z.n()}, {"m", z.m()}, {"dtype", "f32"}};
  std::ofstream side(sidecar_path(path));
  side << meta.dump(2) << '\n';
  if (!side) throw Error("write failed for " + sidecar_path(path).string());
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Dataset read_dataset(const DatasetFile& file) {
  Dataset d = file.format == DatasetFormat::Csv ? read_csv(file.path) : read_binary(file.path);
  if ((file.n != 0 && file.n != d.n()) || (file.m != 0 && file.m != d.m())) {
    throw SidecarError(file.path.string() + ": declared shape " + std::to_string(file.n) + "x" +
                       std::to_string(file.m) + " but file holds " + std::to_string(d.n()) + "x" +
                       std::to_string(d.m()));
  }
  return d;
}

Dataset read_dataset(const fs::path& path) {
  return read_dataset(DatasetFile{path, format_for_path(path), 0, 0});
}

DatasetFile write_dataset(const fs::path& path, const LogitMatrix& z, const LabelVector& y,
                          DatasetFormat format) {
  if (y.size() != z.n()) throw DimensionError("logit rows and labels differ in count");
  y.validate(z.m());
  if (format == DatasetFormat::Csv) {
    write_csv(path, z, y);
  } else {
    write_binary(path, z, y);
  }
  return {path, format, z.n(), z.m()};
}

void write_probabilities_csv(const fs::path& path, const Matrix& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t j = 0; j < p.cols(); ++j) out << (j ? "," : "") << 'p' << j;
  out << '\n';
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const auto r = p.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_number(r[j]);
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

Matrix read_probabilities_csv(const fs::path& path) {
  const std::string text = read_text(path);
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(path.string() + ": empty file");
  const std::size_t m = split_fields(lines[0]).size();
  std::vector<double> values;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != m) throw ParseError(path.string() + ": ragged row " + std::to_string(i + 1));
    for (auto f : fields) {
      double v = 0.0;
      if (!parse_number(f, v)) throw ParseError(path.string() + ": bad value '" + std::string(f) + "'");
      values.push_back(v);
    }
  }
  return Matrix(lines.size() - 1, m, std::move(values));
}

Split split_indices(std::size_t n, double calib_fraction, std::uint64_t seed) {
  if (!(calib_fraction > 0.0 && calib_fraction < 1.0)) {
    throw InvariantError("calibration fraction must lie strictly between 0 and 1");
  }
  const auto n_calib = static_cast<std::size_t>(std::llround(calib_fraction * static_cast<double>(n)));
  if (n_calib == 0 || n_calib >= n) {
    throw InvariantError("fraction " + format_number(calib_fraction) + " of " + std::to_string(n) +
                         " samples leaves an empty part");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  Split s;
  s.calibration.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_calib));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_calib), order.end());
  return s;
}

DatasetSplit split_dataset(const Dataset& data, double calib_fraction, std::uint64_t seed) {
  const Split s = split_indices(data.n(), calib_fraction, seed);
  return {data.subset(s.calibration), data.subset(s.test)};
}

std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvariantError("fraction must lie in (0, 1]");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (fraction == 1.0) return idx;
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (keep == 0) throw InvariantError("subsample is empty");
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void SynthConfig::validate() const {
  if (n < 1) throw InvariantError("synthetic n must be >= 1");
  if (m < 2) throw InvariantError("synthetic m must be >= 2");
  if (!(alpha > 0.0)) throw InvariantError("alpha must be > 0");
  if (!(overconfidence > 0.0)) throw InvariantError("overconfidence must be > 0");
  if (!(noise_sd >= 0.0)) throw InvariantError("noise_sd must be >= 0");
}

SyntheticData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::gamma_distribution<double> gamma(cfg.alpha, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.noise_sd > 0.0 ? cfg.noise_sd : 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix z(cfg.n, cfg.m);
  Matrix p(cfg.n, cfg.m);
  std::vector<LabelVector::value_type> labels(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    auto pr = p.row(i);
    double total = 0.0;
    for (double& v : pr) {
      // Tiny concentrations can underflow to zero; log p must stay finite.
      v = std::max(gamma(rng), std::numeric_limits<double>::min());
      total += v;
    }
    for (double& v : pr) v /= total;

    const double u = unit(rng);
    double cumulative = 0.0;
    std::size_t label = cfg.m - 1;
    for (std::size_t j = 0; j < cfg.m; ++j) {
      cumulative += pr[j];
      if (u < cumulative) {
        label = j;
        break;
      }
    }
    labels[i] = static_cast<LabelVector::value_type>(label);

    auto zr = z.row(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < cfg.m; ++j) {
      zr[j] = cfg.overconfidence * std::log(pr[j]);
      if (cfg.noise_sd > 0.0) zr[j] += noise(rng);
      mean += zr[j];
    }
    mean /= static_cast<double>(cfg.m);
    for (double& v : zr) v -= mean;
  }
  return {LogitMatrix(std::move(z)), LabelVector(std::move(labels)), ProbMatrix(std::move(p))};
}

}  // namespace mcct
