#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "nfce/harness/pipeline.hpp"
#include "nfce/image.hpp"

namespace nfce::harness {

/// Global min-max affine map to [0, 1], fitted on the training split.
struct Normalization {
  double min = 0.0;
  double max = 1.0;

  static Normalization fit(const std::vector<const Image*>& images);
  double scale() const { return max - min; }
  void apply(Image& img) const;
  void invert(Image& img) const;
};

struct SplitRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Paired side-information / target images with train/val/test split bounds.
struct Dataset {
  ScenarioConfig scenario;
  std::uint64_t seed = 0;
  Image side;    // count × 2 × N × K, raw channel units
  Image target;  // same shape
  std::vector<double> snr_db;
  SplitRange train, val, test;
  Normalization norm;

  std::size_t count() const { return static_cast<std::size_t>(side.batch); }

  /// Copies records [begin, end) of one array.
  static Image slice(const Image& src, std::size_t begin, std::size_t end);
  Image gather(const Image& src, const std::vector<std::size_t>& indices) const;
};

/// 5:1:1 split of count records, rounded so every split is non-empty.
void split_bounds(std::size_t count, SplitRange& train, SplitRange& val, SplitRange& test);

/// Runs the full simulation pipeline per record; record i uses stream (seed, i).
Dataset generate_dataset(const ScenarioConfig& sc, std::size_t count, std::uint64_t seed);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace nfce::harness
