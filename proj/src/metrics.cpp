#include "flowseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace flowseg {

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Counts confusion(const Mask& pred, const Mask& truth) {
  require_same_domain(pred.domain(), truth.domain(), "metric masks");
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double ratio(std::size_t num, std::size_t den) { return static_cast<double>(num) / static_cast<double>(den); }

// Distance from each point of `from` to its nearest point of `to`.
std::vector<double> nearest_distances(const Contour& from, const Contour& to) {
  std::vector<double> out;
  out.reserve(from.size());
  for (const Pixel& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Pixel& q : to) {
      const double dr = static_cast<double>(p.row) - static_cast<double>(q.row);
      const double dc = static_cast<double>(p.col) - static_cast<double>(q.col);
      best = std::min(best, dr * dr + dc * dc);
    }
    out.push_back(std::sqrt(best));
  }
  return out;
}

}  // namespace

double dice(const Mask& a, const Mask& b) {
  const Counts c = confusion(a, b);
  const std::size_t den = 2 * c.tp + c.fp + c.fn;
  return den == 0 ? 1.0 : ratio(2 * c.tp, den);
}

double sensitivity(const Mask& pred, const Mask& truth) {
  const Counts c = confusion(pred, truth);
  return c.tp + c.fn == 0 ? 1.0 : ratio(c.tp, c.tp + c.fn);
}

double specificity(const Mask& pred, const Mask& truth) {
  const Counts c = confusion(pred, truth);
  return c.tn + c.fp == 0 ? 1.0 : ratio(c.tn, c.tn + c.fp);
}

HausdorffVariant parse_hausdorff_variant(const std::string& name) {
  if (name == "max") return HausdorffVariant::max;
  if (name == "p95") return HausdorffVariant::p95;
  throw std::invalid_argument("unknown hausdorff variant '" + name + "' (expected max or p95)");
}

std::string to_string(HausdorffVariant variant) { return variant == HausdorffVariant::max ? "max" : "p95"; }

std::optional<double> hausdorff(const Mask& a, const Mask& b, HausdorffVariant variant) {
  require_same_domain(a.domain(), b.domain(), "hausdorff masks");
  if (a.empty() || b.empty()) return std::nullopt;
  const Contour ca = extract_contour(a);
  const Contour cb = extract_contour(b);
  std::vector<double> ab = nearest_distances(ca, cb);
  const std::vector<double> ba = nearest_distances(cb, ca);
  if (variant == HausdorffVariant::max) {
    return std::max(*std::max_element(ab.begin(), ab.end()), *std::max_element(ba.begin(), ba.end()));
  }
  ab.insert(ab.end(), ba.begin(), ba.end());
  return percentile(std::move(ab), 95.0);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty list");
  if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("percentile must be in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

RegionMetrics region_metrics(const Mask& pred, const Mask& truth, HausdorffVariant variant) {
  return RegionMetrics{dice(pred, truth), sensitivity(pred, truth), specificity(pred, truth),
                       hausdorff(pred, truth, variant)};
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    a.mean = a.stddev = a.median = a.q25 = a.q75 = nan;
    return a;
  }
  a.count = values.size();
  const double n = static_cast<double>(values.size());
  double total = 0.0;
  for (double v : values) total += v;
  a.mean = total / n;
  double var = 0.0;
  for (double v : values) var += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(var / n);
  a.median = percentile(values, 50.0);
  a.q25 = percentile(values, 25.0);
  a.q75 = percentile(values, 75.0);
  return a;
}

MetricReport evaluate_dataset(const std::vector<MaskTriple>& preds, const std::vector<MaskTriple>& truths,
                              HausdorffVariant variant) {
  if (preds.size() != truths.size()) {
    throw std::invalid_argument("evaluate_dataset: " + std::to_string(preds.size()) + " predictions vs " +
                                std::to_string(truths.size()) + " ground truths");
  }
  MetricReport report;
  report.variant = variant;
  for (std::size_t r = 0; r < 3; ++r) {
    RegionReport& rr = report.regions[r];
    rr.per_sample.resize(preds.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(preds.size()); ++i) {
      const auto k = static_cast<std::size_t>(i);
      rr.per_sample[k] = region_metrics(preds[k][r], truths[k][r], variant);
    }
    std::vector<double> d, se, sp, h;
    for (const auto& m : rr.per_sample) {
      d.push_back(m.dice);
      se.push_back(m.sensitivity);
      sp.push_back(m.specificity);
      if (m.hausdorff) h.push_back(*m.hausdorff);
      else ++rr.hausdorff_excluded;
    }
    rr.dice = aggregate(d);
    rr.sensitivity = aggregate(se);
    rr.specificity = aggregate(sp);
    rr.hausdorff = aggregate(h);
  }
  return report;
}

std::string format_report(const MetricReport& report) {
  std::ostringstream out;
  out.precision(6);
  const char* names[3] = {"WT", "TC", "EC"};
  for (std::size_t r = 0; r < 3; ++r) {
    const RegionReport& rr = report.regions[r];
    const auto line = [&](const char* metric, const Aggregate& a) {
      out << names[r] << ' ' << metric << " mean=" << a.mean << " std=" << a.stddev << " median=" << a.median
          << " q25=" << a.q25 << " q75=" << a.q75 << " n=" << a.count << '\n';
    };
    line("dice", rr.dice);
    line("sensitivity", rr.sensitivity);
    line("specificity", rr.specificity);
    line(report.variant == HausdorffVariant::max ? "hausdorff" : "hausdorff95", rr.hausdorff);
    out << names[r] << " hausdorff_excluded=" << rr.hausdorff_excluded << '\n';
  }
  return out.str();
}

}  // namespace flowseg
