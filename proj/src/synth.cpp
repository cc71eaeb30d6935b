#include "flowseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace flowseg {

void SynthConfig::validate() const {
  if (count < 1) throw std::invalid_argument("count must be at least 1");
  if (height == 0 || width == 0 || height % 8 != 0 || width % 8 != 0) {
    throw std::invalid_argument("height and width must be positive multiples of 8");
  }
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
  if (!(0.0 <= center_min && center_min <= center_max && center_max <= 1.0)) {
    throw std::invalid_argument("centre range must satisfy 0 <= min <= max <= 1");
  }
  if (!(0.0 < axis_min && axis_min <= axis_max)) throw std::invalid_argument("axis range must satisfy 0 < min <= max");
  if (!(0.0 < enhancing_scale && enhancing_scale < core_scale && core_scale < 1.0)) {
    throw std::invalid_argument("scales must satisfy 0 < enhancing < core < 1");
  }
}

namespace {

struct Ellipse {
  double cy, cx, a, b, theta;

  bool contains(double y, double x, double scale) const {
    const double dy = y - cy;
    const double dx = x - cx;
    const double u = dx * std::cos(theta) + dy * std::sin(theta);
    const double v = -dx * std::sin(theta) + dy * std::cos(theta);
    const double su = u / (a * scale);
    const double sv = v / (b * scale);
    return su * su + sv * sv <= 1.0;
  }
};

}  // namespace

Sample generate_sample(const SynthConfig& cfg, std::size_t index) {
  cfg.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  const GridDomain d(cfg.height, cfg.width);
  const double h = static_cast<double>(cfg.height);
  const double w = static_cast<double>(cfg.width);
  const double side = std::min(h, w);
  std::uniform_real_distribution<double> cy_dist(cfg.center_min * h, cfg.center_max * h);
  std::uniform_real_distribution<double> cx_dist(cfg.center_min * w, cfg.center_max * w);
  std::uniform_real_distribution<double> axis_dist(cfg.axis_min * side, cfg.axis_max * side);
  std::uniform_real_distribution<double> angle_dist(0.0, std::numbers::pi);

  Sample s;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) throw std::runtime_error("could not place regions inside the image after 100 attempts");
    Ellipse e{cy_dist(rng), cx_dist(rng), axis_dist(rng), axis_dist(rng), angle_dist(rng)};
    const double ext_y = std::hypot(e.a * std::sin(e.theta), e.b * std::cos(e.theta));
    const double ext_x = std::hypot(e.a * std::cos(e.theta), e.b * std::sin(e.theta));
    if (e.cy - ext_y < 0.0 || e.cy + ext_y > h - 1.0 || e.cx - ext_x < 0.0 || e.cx + ext_x > w - 1.0) continue;

    std::array<Mask, 3> labels{Mask(d), Mask(d), Mask(d)};
    const std::array<double, 3> scales{1.0, cfg.core_scale, cfg.enhancing_scale};
    for (std::size_t r = 0; r < cfg.height; ++r) {
      for (std::size_t c = 0; c < cfg.width; ++c) {
        for (std::size_t k = 0; k < 3; ++k) {
          if (e.contains(static_cast<double>(r), static_cast<double>(c), scales[k])) labels[k].set(r, c, true);
        }
      }
    }
    if (labels[2].empty()) continue;
    s.labels = std::move(labels);
    break;
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t ch = 0; ch < 4; ++ch) {
    ScalarField f(d);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const std::size_t region = s.labels[0][i] + s.labels[1][i] + s.labels[2][i];
      f[i] = cfg.intensities[region][ch];
      if (cfg.noise_sigma > 0.0) f[i] += cfg.noise_sigma * noise(rng);
    }
    s.image.channels.push_back(std::move(f));
  }
  if (cfg.standardize) s.image = standardize(s.image);
  return s;
}

std::vector<Sample> generate(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<Sample> out(cfg.count);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cfg.count); ++i) {
    out[static_cast<std::size_t>(i)] = generate_sample(cfg, static_cast<std::size_t>(i));
  }
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split(const std::vector<Sample>& dataset, double train_fraction,
                                                          std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must be in (0, 1)");
  const std::size_t n = dataset.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw std::invalid_argument("split of " + std::to_string(n) + " samples leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (std::size_t k = 0; k < n; ++k) (k < n_train ? out.first : out.second).push_back(dataset[order[k]]);
  return out;
}

}  // namespace flowseg
