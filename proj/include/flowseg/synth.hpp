#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "flowseg/sample.hpp"

namespace flowseg {

/// Rows: background, whole-tumor ring, core ring, enhancing core.
/// Columns: image channels.
using IntensityTable = std::array<std::array<double, 4>, 4>;

inline constexpr IntensityTable kDefaultIntensities{{
    {0.0, 0.0, 0.0, 0.0},
    {1.0, 0.2, 1.2, 0.4},
    {0.4, 1.0, 0.6, 1.2},
    {1.2, 1.4, 0.2, 2.0},
}};

struct SynthConfig {
  std::size_t count = 200;
  std::size_t height = 64;
  std::size_t width = 64;
  double noise_sigma = 0.15;
  IntensityTable intensities = kDefaultIntensities;
  /// Ellipse centre range as a fraction of the image size.
  double center_min = 0.375;
  double center_max = 0.625;
  /// Whole-tumor semi-axis range as a fraction of min(height, width).
  double axis_min = 0.1875;
  double axis_max = 0.3125;
  /// Core and enhancing-core ellipses scale the whole-tumor axes.
  double core_scale = 0.65;
  double enhancing_scale = 0.35;
  bool standardize = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Sample `index` of the dataset; depends only on (cfg.seed, index).
Sample generate_sample(const SynthConfig& cfg, std::size_t index);
std::vector<Sample> generate(const SynthConfig& cfg);

/// Seeded shuffle, then the first llround(fraction * n) samples train.
std::pair<std::vector<Sample>, std::vector<Sample>> split(const std::vector<Sample>& dataset, double train_fraction,
                                                          std::uint64_t seed);

}  // namespace flowseg
