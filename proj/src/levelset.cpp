#include "flowseg/levelset.hpp"

#include <algorithm>
#include <numeric>

namespace flowseg {

Mask::Mask(GridDomain domain, std::uint8_t fill) : domain_(domain), values_(domain.size(), fill ? 1 : 0) {}

Mask::Mask(GridDomain domain, std::vector<std::uint8_t> values) : domain_(domain), values_(std::move(values)) {
  if (values_.size() != domain_.size()) throw std::invalid_argument("mask length does not match its domain");
  if (std::any_of(values_.begin(), values_.end(), [](std::uint8_t v) { return v > 1; })) {
    throw std::invalid_argument("mask values must be 0 or 1");
  }
}

std::size_t Mask::count() const { return std::accumulate(values_.begin(), values_.end(), std::size_t{0}); }

ScalarField Mask::to_field() const {
  ScalarField f(domain_);
  for (std::size_t i = 0; i < values_.size(); ++i) f[i] = values_[i];
  return f;
}

Mask mask_and(const Mask& a, const Mask& b) {
  require_same_domain(a.domain(), b.domain(), "mask_and");
  Mask out(a.domain());
  for (std::size_t i = 0; i < a.size(); ++i) out.set(i, a[i] && b[i]);
  return out;
}

Mask mask_not(const Mask& a) {
  Mask out(a.domain());
  for (std::size_t i = 0; i < a.size(); ++i) out.set(i, !a[i]);
  return out;
}

bool is_subset(const Mask& inner, const Mask& outer) {
  require_same_domain(inner.domain(), outer.domain(), "is_subset");
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (inner[i] && !outer[i]) return false;
  }
  return true;
}

Mask threshold(const ScalarField& lambda, double level) {
  if (!(level >= 0.0 && level <= 1.0)) throw std::invalid_argument("threshold level must lie in [0, 1]");
  Mask out(lambda.domain());
  for (std::size_t i = 0; i < lambda.size(); ++i) out.set(i, lambda[i] >= level - kThresholdTieTolerance);
  return out;
}

Contour extract_contour(const Mask& mask) {
  const GridDomain d = mask.domain();
  Contour out;
  for (std::size_t r = 0; r < d.height; ++r) {
    for (std::size_t c = 0; c < d.width; ++c) {
      if (!mask.at(r, c)) continue;
      const bool border = r == 0 || c == 0 || r + 1 == d.height || c + 1 == d.width;
      const bool touches_background = border || !mask.at(r - 1, c) || !mask.at(r + 1, c) ||
                                      !mask.at(r, c - 1) || !mask.at(r, c + 1);
      if (touches_background) out.push_back({r, c});
    }
  }
  return out;
}

std::vector<SweepEntry> sweep(const CapacityMaps& caps, const SolverConfig& cfg,
                              const std::vector<int>& iteration_checkpoints, const std::vector<double>& levels) {
  if (!std::is_sorted(iteration_checkpoints.begin(), iteration_checkpoints.end())) {
    throw std::invalid_argument("sweep checkpoints must be sorted ascending");
  }
  for (int it : iteration_checkpoints) {
    if (it < 1 || it > cfg.iterations) {
      throw std::invalid_argument("sweep checkpoint " + std::to_string(it) + " outside the iteration budget of " +
                                  std::to_string(cfg.iterations));
    }
  }
  for (double l : levels) {
    if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("sweep level must lie in [0, 1]");
  }

  SolverConfig run = cfg;
  run.record_trajectory = true;
  run.residual_tolerance = 0.0;
  const SolverResult result = solve(caps, run);

  std::vector<SweepEntry> out;
  out.reserve(iteration_checkpoints.size() * levels.size());
  for (int it : iteration_checkpoints) {
    const ScalarField& snapshot = result.trajectory[static_cast<std::size_t>(it - 1)];
    for (double l : levels) out.push_back({it, l, threshold(snapshot, l)});
  }
  return out;
}

}  // namespace flowseg
