#pragma once

#include <cstdint>
#include <vector>

#include "flowseg/field.hpp"
#include "flowseg/solver.hpp"

namespace flowseg {

/// Binary labeling, one byte per pixel holding 0 or 1.
class Mask {
 public:
  Mask() = default;
  explicit Mask(GridDomain domain, std::uint8_t fill = 0);
  /// Throws std::invalid_argument if any value is not 0 or 1.
  Mask(GridDomain domain, std::vector<std::uint8_t> values);

  const GridDomain& domain() const { return domain_; }
  std::size_t size() const { return values_.size(); }

  std::uint8_t operator[](std::size_t i) const { return values_[i]; }
  std::uint8_t at(std::size_t row, std::size_t col) const { return values_[domain_.index(row, col)]; }
  void set(std::size_t i, bool on) { values_[i] = on ? 1 : 0; }
  void set(std::size_t row, std::size_t col, bool on) { set(domain_.index(row, col), on); }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  ScalarField to_field() const;
  std::span<const std::uint8_t> values() const { return values_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  GridDomain domain_;
  std::vector<std::uint8_t> values_;
};

Mask mask_and(const Mask& a, const Mask& b);
Mask mask_not(const Mask& a);
/// True when every foreground pixel of inner is foreground in outer.
bool is_subset(const Mask& inner, const Mask& outer);

/// Values this close to the level count as ties.
inline constexpr double kThresholdTieTolerance = 1e-9;

/// Foreground where lambda >= level. Ties, including roundoff within
/// kThresholdTieTolerance, go to foreground.
Mask threshold(const ScalarField& lambda, double level);

struct Pixel {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

using Contour = std::vector<Pixel>;

/// Foreground pixels on the image border or touching background through a
/// 4-neighbor, in row-major order.
Contour extract_contour(const Mask& mask);

struct SweepEntry {
  int iteration = 0;
  double level = 0.0;
  Mask mask;
};

/// One solve, thresholding the lambda snapshot at each checkpoint by each
/// level. Entries are ordered by checkpoint, then level.
std::vector<SweepEntry> sweep(const CapacityMaps& caps, const SolverConfig& cfg,
                              const std::vector<int>& iteration_checkpoints, const std::vector<double>& levels);

}  // namespace flowseg
