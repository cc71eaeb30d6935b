#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "flowseg/synth.hpp"
#include "flowseg/trainer.hpp"
#include "oracles.hpp"

using namespace flowseg;

namespace {

SynthConfig small_synth(std::size_t count, std::size_t side) {
  SynthConfig s;
  s.count = count;
  s.height = side;
  s.width = side;
  return s;
}

NetConfig tiny_net() {
  NetConfig cfg;
  cfg.down_widths = {2, 2};
  return cfg;
}

double total(const std::array<LossReport, 3>& r) { return r[0].total + r[1].total + r[2].total; }

}  // namespace

TEST(TrainConfig, DefaultsAndValidation) {
  const TrainConfig t;
  EXPECT_EQ(t.optim.learning_rate, 0.002);
  EXPECT_EQ(t.optim.weight_decay, 1e-6);
  EXPECT_EQ(t.solver.iterations, 15);
  EXPECT_EQ(t.level, 0.5);
  EXPECT_EQ(t.loss_form, FlowLossForm::deviation);
  TrainConfig bad;
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(TrainStep, BitDeterministic) {
  const Sample s = generate_sample(small_synth(1, 32), 0);
  const NetConfig cfg;
  NetParams a = init_params(cfg), b = init_params(cfg);
  const TrainConfig t;
  for (int k = 0; k < 2; ++k) {
    const auto ra = train_step(a, cfg, s, t, 5 + k);
    const auto rb = train_step(b, cfg, s, t, 5 + k);
    EXPECT_EQ(total(ra), total(rb));
  }
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    EXPECT_EQ(a.tensors[i].value, b.tensors[i].value);
    EXPECT_EQ(a.tensors[i].momentum, b.tensors[i].momentum);
  }
}

TEST(TrainStep, StationarySampleGivesZeroUpdate) {
  // Zero weights give uniform capacities ln 2, whose solve saturates p_s and
  // p_t everywhere; with empty labels both loss terms have zero gradient.
  Sample s = generate_sample(small_synth(1, 16), 0);
  for (auto& m : s.labels) m = Mask(m.domain());
  const NetConfig cfg;
  NetParams p = zero_params(cfg);
  TrainConfig t;
  t.optim.weight_decay = 0.0;
  t.energy_reference = EnergyReference::background;
  const auto reports = train_step(p, cfg, s, t, 0);
  for (const auto& r : reports) EXPECT_EQ(r.total, 0.0);
  for (const auto& tensor : p.tensors) {
    for (double v : tensor.value) EXPECT_EQ(v, 0.0);
    for (double v : tensor.momentum) EXPECT_EQ(v, 0.0);
  }
}

TEST(TrainStep, OverfitsOneSample) {
  const Sample s = generate_sample(SynthConfig{}, 3);
  const NetConfig cfg;
  NetParams p = init_params(cfg);
  const TrainConfig t;
  std::vector<double> flow, gap;
  for (int k = 0; k < 50; ++k) {
    const auto r = train_step(p, cfg, s, t, static_cast<std::uint64_t>(k));
    flow.push_back(r[0].flow_loss + r[1].flow_loss + r[2].flow_loss);
    gap.push_back(std::abs(r[0].energy_loss + r[1].energy_loss + r[2].energy_loss));
  }
  EXPECT_LE(flow.back(), 0.5 * flow.front()) << flow.front() << " -> " << flow.back();
  double previous = *std::min_element(flow.begin(), flow.begin() + 10);
  for (long w = 10; w < 50; w += 10) {
    const double window_best = *std::min_element(flow.begin() + w, flow.begin() + w + 10);
    EXPECT_LE(window_best, previous) << "window starting at step " << w;
    previous = window_best;
  }
  const double first_gap = *std::max_element(gap.begin(), gap.begin() + 10);
  const double last_gap = *std::max_element(gap.end() - 10, gap.end());
  EXPECT_LE(last_gap, 0.25 * first_gap) << first_gap << " -> " << last_gap;
  const HierarchyResult h = infer_full(p, cfg, s.image, t.solver, t.level);
  EXPECT_GE(dice(h.masks[0], s.labels[0]), 0.9);
}

TEST(AccumulateGradients, MatchesFiniteDifferencesWithFrozenFlows) {
  const SynthConfig sc = small_synth(1, 8);
  const Sample s = generate_sample(sc, 1);
  const NetConfig cfg = tiny_net();
  NetParams p = init_params(cfg);
  std::mt19937_64 rng(3);
  for (auto& t : p.tensors)
    if (t.shape.size() == 1)
      for (double& v : t.value) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  TrainConfig t;
  const std::uint64_t seed = 42;
  const auto frozen = solve_flows(p, cfg, s.image, t.solver, seed);
  accumulate_gradients(p, cfg, s, t, seed);
  double diff = 0.0, scale = 0.0;
  const double h = 1e-4;
  for (auto& tensor : p.tensors) {
    for (std::size_t i = 0; i < tensor.value.size(); ++i) {
      const double keep = tensor.value[i];
      tensor.value[i] = keep + h;
      const double up = total_loss_at(p, cfg, s, t, seed, frozen);
      tensor.value[i] = keep - h;
      const double down = total_loss_at(p, cfg, s, t, seed, frozen);
      tensor.value[i] = keep;
      const double numeric = (up - down) / (2 * h);
      diff = std::max(diff, std::abs(numeric - tensor.grad[i]));
      scale = std::max({scale, std::abs(numeric), std::abs(tensor.grad[i])});
    }
  }
  ASSERT_GT(scale, 0.0);
  EXPECT_LE(diff / scale, 1e-3);
}

TEST(Train, SingleSampleSingleEpoch) {
  const std::vector<Sample> data{generate_sample(small_synth(1, 16), 0)};
  const NetConfig cfg;
  NetParams p = init_params(cfg);
  TrainConfig t;
  t.epochs = 1;
  int calls = 0;
  const TrainStats st = train(p, cfg, data, {}, t, [&](int epoch, const TrainStats& s) {
    EXPECT_EQ(epoch, 0);
    EXPECT_EQ(s.total_loss.size(), 1u);
    ++calls;
  });
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(st.total_loss.size(), 1u);
  EXPECT_EQ(st.flow_loss.size(), 1u);
  EXPECT_EQ(st.energy_loss.size(), 1u);
  EXPECT_EQ(st.validation_dice.size(), 1u);
}

TEST(Train, RejectsEmptyDataset) {
  const NetConfig cfg;
  NetParams p = init_params(cfg);
  EXPECT_THROW(train(p, cfg, {}, {}, TrainConfig{}), std::invalid_argument);
}

TEST(Train, ReproducibleAcrossRuns) {
  const auto data = generate(small_synth(4, 16));
  const NetConfig cfg;
  TrainConfig t;
  t.epochs = 2;
  t.shuffle_seed = 9;
  NetParams a = init_params(cfg), b = init_params(cfg);
  const TrainStats sa = train(a, cfg, data, {}, t);
  const TrainStats sb = train(b, cfg, data, {}, t);
  EXPECT_EQ(sa.total_loss, sb.total_loss);
  EXPECT_EQ(sa.flow_loss, sb.flow_loss);
  EXPECT_EQ(sa.validation_dice, sb.validation_dice);
  for (std::size_t i = 0; i < a.tensors.size(); ++i) EXPECT_EQ(a.tensors[i].value, b.tensors[i].value);
}

TEST(InferGroups, ZeroSourceGivesEmptyMasks) {
  const GridDomain d(8, 8);
  CapacityGroups groups;
  for (auto& g : groups) g = CapacityMaps{ScalarField(d, 0.0), ScalarField(d, 1.0), ScalarField(d, 1.0)};
  const HierarchyResult r = infer_groups(groups, SolverConfig{}, 0.5);
  for (const auto& m : r.masks) EXPECT_TRUE(m.empty());
}

TEST(InferGroups, NestingAlwaysHolds) {
  std::mt19937_64 rng(4);
  for (bool masking : {false, true}) {
    for (int t = 0; t < 20; ++t) {
      CapacityGroups groups;
      for (auto& g : groups) g = oracle::random_caps(GridDomain(8, 8), rng);
      const HierarchyResult r = infer_groups(groups, SolverConfig{}, 0.5, masking);
      EXPECT_TRUE(is_subset(r.masks[1], r.masks[0]));
      EXPECT_TRUE(is_subset(r.masks[2], r.masks[1]));
    }
  }
}

TEST(InferFull, ShapesAndNesting) {
  const Sample s = generate_sample(small_synth(1, 16), 2);
  const NetConfig cfg;
  const HierarchyResult r = infer_full(init_params(cfg), cfg, s.image, SolverConfig{}, 0.5);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(r.masks[k].domain(), s.image.domain());
    EXPECT_EQ(r.lambda[k].domain(), s.image.domain());
  }
  EXPECT_TRUE(is_subset(r.masks[1], r.masks[0]));
  EXPECT_TRUE(is_subset(r.masks[2], r.masks[1]));
}

TEST(EvaluateDataset, PerfectPredictions) {
  const auto data = generate(small_synth(2, 16));
  std::vector<HierarchyResult> preds;
  for (const auto& s : data) {
    HierarchyResult h;
    h.masks = s.labels;
    preds.push_back(h);
  }
  const MetricReport rep = evaluate_dataset(preds, data);
  for (const auto& region : rep.regions) {
    EXPECT_EQ(region.dice.mean, 1.0);
    EXPECT_EQ(region.hausdorff.mean, 0.0);
  }
  preds.pop_back();
  EXPECT_THROW(evaluate_dataset(preds, data), std::invalid_argument);
}
