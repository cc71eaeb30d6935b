#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "flowseg/levelset.hpp"

namespace flowseg {

/// 2|A n B| / (|A| + |B|); 1 when both are empty.
double dice(const Mask& a, const Mask& b);
/// TP / (TP + FN); 1 when truth is empty.
double sensitivity(const Mask& pred, const Mask& truth);
/// TN / (TN + FP); 1 when truth covers the whole grid.
double specificity(const Mask& pred, const Mask& truth);

enum class HausdorffVariant { max, p95 };

HausdorffVariant parse_hausdorff_variant(const std::string& name);
std::string to_string(HausdorffVariant variant);

/// Symmetric Hausdorff distance between the contours of a and b, in pixels.
/// max: larger of the two directed distances. p95: 95th percentile of the
/// pooled nearest-neighbour distances. Empty when either mask is empty.
std::optional<double> hausdorff(const Mask& a, const Mask& b, HausdorffVariant variant = HausdorffVariant::max);

/// q in [0, 100], linear interpolation between order statistics.
double percentile(std::vector<double> values, double q);

struct RegionMetrics {
  double dice = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  std::optional<double> hausdorff;
};

RegionMetrics region_metrics(const Mask& pred, const Mask& truth, HausdorffVariant variant);

struct Aggregate {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

/// All fields NaN and count 0 for an empty input.
Aggregate aggregate(const std::vector<double>& values);

struct RegionReport {
  std::vector<RegionMetrics> per_sample;
  Aggregate dice;
  Aggregate sensitivity;
  Aggregate specificity;
  Aggregate hausdorff;
  std::size_t hausdorff_excluded = 0;
};

using MaskTriple = std::array<Mask, 3>;

struct MetricReport {
  HausdorffVariant variant = HausdorffVariant::max;
  std::array<RegionReport, 3> regions;
};

/// Throws std::invalid_argument on a length or domain mismatch.
MetricReport evaluate_dataset(const std::vector<MaskTriple>& preds, const std::vector<MaskTriple>& truths,
                              HausdorffVariant variant = HausdorffVariant::max);

/// One line per region and metric.
std::string format_report(const MetricReport& report);

}  // namespace flowseg
