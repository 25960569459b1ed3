#pragma once

// Logit/label files, dataset splitting and the synthetic classifier generator.
//
// CSV: header "z0,...,z{m-1},label", one sample per line.
// RawBinary: little-endian f32 logits (row-major n x m) followed by n u32
// labels, described by a JSON sidecar at <path>.meta.json:
//   {"v": 1, "n": <rows>, "m": <classes>, "dtype": "f32"}

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcct/error.hpp"
#include "mcct/matrix.hpp"

namespace mcct {

class ParseError : public Error {
 public:
  using Error::Error;
};

class LabelRangeError : public Error {
 public:
  using Error::Error;
};

class SidecarError : public Error {
 public:
  using Error::Error;
};

/// Shortest decimal text that reads back to the same double ("nan", "inf" for
/// non-finite values).
std::string format_number(double v);

enum class DatasetFormat { Csv, RawBinary };

struct Dataset {
  LogitMatrix logits;
  LabelVector labels;

  std::size_t n() const noexcept { return logits.n(); }
  std::size_t m() const noexcept { return logits.m(); }
  Dataset subset(std::span<const std::size_t> idx) const;
};

/// A file on disk. n and m of 0 mean "not declared"; otherwise they must match.
struct DatasetFile {
  std::filesystem::path path;
  DatasetFormat format = DatasetFormat::Csv;
  std::size_t n = 0;
  std::size_t m = 0;
};

/// ".csv" selects CSV, anything else RawBinary.
DatasetFormat format_for_path(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

Dataset read_dataset(const DatasetFile& file);
Dataset read_dataset(const std::filesystem::path& path);

DatasetFile write_dataset(const std::filesystem::path& path, const LogitMatrix& z,
                          const LabelVector& y, DatasetFormat format);

/// Probability rows as CSV with header "p0,...,p{m-1}".
void write_probabilities_csv(const std::filesystem::path& path, const Matrix& p);
Matrix read_probabilities_csv(const std::filesystem::path& path);

struct Split {
  std::vector<std::size_t> calibration;  // row indices into the source
  std::vector<std::size_t> test;
};

/// Seeded shuffle, then the first round(calib_fraction * n) rows calibrate.
Split split_indices(std::size_t n, double calib_fraction, std::uint64_t seed);

struct DatasetSplit {
  Dataset calibration;
  Dataset test;
};

DatasetSplit split_dataset(const Dataset& data, double calib_fraction, std::uint64_t seed);

/// Seeded subset of round(fraction * n) indices, in ascending order. fraction 1
/// returns every index.
std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed);

struct SynthConfig {
  std::size_t n = 10000;
  std::size_t m = 10;
  double alpha = 0.5;           // symmetric Dirichlet concentration
  double overconfidence = 2.5;  // logit scale c; 1 is calibrated
  double noise_sd = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  LogitMatrix logits;
  LabelVector labels;
  ProbMatrix true_probs;
};

/// Per sample: p ~ Dirichlet(alpha), label ~ Categorical(p),
/// z = c * log p + N(0, noise_sd^2), then each row is centred on its mean.
/// With c = 1 and no noise, softmax(z) == p.
SyntheticData generate_synthetic(const SynthConfig& cfg);

}  // namespace mcct
