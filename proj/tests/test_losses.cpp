#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "flowseg/gradcheck.hpp"
#include "flowseg/losses.hpp"
#include "oracles.hpp"

using namespace flowseg;

namespace {

CapacityMaps row_caps(std::vector<double> s, std::vector<double> t, std::vector<double> g) {
  const GridDomain d(1, s.size());
  return {ScalarField(d, std::move(s)), ScalarField(d, std::move(t)), ScalarField(d, std::move(g))};
}

// 1x2 instance where label [1, 0] is saturated and conserving.
struct SaturatedInstance {
  Mask label{GridDomain(1, 2), {1, 0}};
  CapacityMaps caps = row_caps({2.0, 1.0}, {1.0, 1.0}, {0.5, 0.7});
  FlowState flows;

  SaturatedInstance() {
    const GridDomain d(1, 2);
    flows.source = ScalarField(d, {0.5, 1.0});
    flows.sink = ScalarField(d, {1.0, 0.5});
    flows.spatial = VectorField(ScalarField(d, {-0.5, 0.0}), ScalarField(d, {0.0, 0.0}));
    flows.lambda = ScalarField(d, 0.5);
  }
};

FlowState random_flows(const CapacityMaps& caps, std::mt19937_64& rng) {
  const GridDomain d = caps.domain();
  FlowState f;
  f.source = oracle::random_field(d, rng, 0, 1);
  f.sink = oracle::random_field(d, rng, 0, 1);
  f.spatial = VectorField(oracle::random_field(d, rng, -1, 1), oracle::random_field(d, rng, -1, 1));
  f.lambda = oracle::random_field(d, rng, 0, 1);
  for (std::size_t i = 0; i < d.size(); ++i) {
    f.source[i] = std::min(f.source[i], caps.source[i]);
    f.sink[i] = std::min(f.sink[i], caps.sink[i]);
  }
  f.spatial = project_vector_capacity(f.spatial, caps.edge, TvMode::isotropic);
  return f;
}

Mask rectangle(GridDomain d, std::size_t r0, std::size_t c0, std::size_t r1, std::size_t c1) {
  Mask m(d);
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) m.set(r, c, true);
  return m;
}

// Vector-relative error of analytic capacity gradients against central differences.
double fd_error(CapacityMaps caps, const CapacityGradients& grad, const std::function<double(const CapacityMaps&)>& f,
                double h) {
  double diff = 0.0, scale = 0.0;
  ScalarField CapacityMaps::*members[3] = {&CapacityMaps::source, &CapacityMaps::sink, &CapacityMaps::edge};
  const ScalarField* grads[3] = {&grad.source, &grad.sink, &grad.edge};
  for (int k = 0; k < 3; ++k) {
    ScalarField& field = caps.*members[k];
    for (std::size_t i = 0; i < field.size(); ++i) {
      const double keep = field[i];
      field[i] = keep + h;
      const double up = f(caps);
      field[i] = keep - h;
      const double down = f(caps);
      field[i] = keep;
      const double numeric = (up - down) / (2 * h);
      diff = std::max(diff, std::abs(numeric - (*grads[k])[i]));
      scale = std::max({scale, std::abs(numeric), std::abs((*grads[k])[i])});
    }
  }
  return scale == 0.0 ? diff : diff / scale;
}

}  // namespace

TEST(Huber, Examples) {
  const HuberParams p{1.0};
  EXPECT_EQ(huber(0.0, p), 0.0);
  EXPECT_EQ(huber(0.5, p), 0.125);
  EXPECT_EQ(huber(2.0, p), 1.5);
  EXPECT_EQ(huber(-2.0, p), 1.5);
  EXPECT_EQ(huber_derivative(0.5, p), 0.5);
  EXPECT_EQ(huber_derivative(-3.0, p), -1.0);
}

TEST(Huber, ContinuouslyDifferentiableAtDelta) {
  for (double delta : {0.1, 1.0, 2.5}) {
    const HuberParams p{delta};
    const double eps = 1e-13;
    EXPECT_NEAR(huber_derivative(delta - eps, p), huber_derivative(delta + eps, p), 1e-12);
    EXPECT_NEAR(huber_derivative(-delta - eps, p), huber_derivative(-delta + eps, p), 1e-12);
    const double h = 1e-7;
    const double left = (huber(delta, p) - huber(delta - h, p)) / h;
    const double right = (huber(delta + h, p) - huber(delta, p)) / h;
    EXPECT_NEAR(left, right, 1e-6);
  }
}

TEST(Energy, HandExample) {
  const CapacityMaps caps = row_caps({2, 3}, {1, 4}, {1, 1});
  EXPECT_DOUBLE_EQ(energy(Mask(GridDomain(1, 2), {1, 0}), caps, TvMode::isotropic), 5.0);
}

TEST(Energy, AllBackgroundAndAllForeground) {
  std::mt19937_64 rng(1);
  const CapacityMaps caps = oracle::random_caps(GridDomain(6, 6), rng);
  EXPECT_NEAR(energy(Mask(caps.domain(), 0), caps, TvMode::isotropic), sum(caps.source), 1e-12);
  EXPECT_NEAR(energy(Mask(caps.domain(), 1), caps, TvMode::isotropic), sum(caps.sink), 1e-12);
}

TEST(Energy, AnisotropicMatchesOracle) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const CapacityMaps caps = oracle::random_caps(GridDomain(4, 5), rng);
    const Mask m = oracle::random_mask(caps.domain(), rng);
    EXPECT_NEAR(energy(m, caps, TvMode::anisotropic), oracle::anisotropic_energy(m, caps), 1e-12);
  }
}

TEST(Energy, RejectsDomainMismatch) {
  const CapacityMaps caps = row_caps({2, 3}, {1, 4}, {1, 1});
  EXPECT_THROW(energy(Mask(GridDomain(2, 1)), caps, TvMode::isotropic), DomainError);
}

TEST(Energy, BruteForceOptimumIsMinimal) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 5; ++t) {
    const CapacityMaps caps = oracle::random_caps(GridDomain(4, 4), rng);
    const oracle::BruteForce bf = oracle::brute_force_min(caps);
    const double best = energy(bf.best, caps, TvMode::anisotropic);
    for (int k = 0; k < 200; ++k) {
      EXPECT_LE(best, energy(oracle::random_mask(caps.domain(), rng), caps, TvMode::anisotropic) + 1e-12);
    }
  }
}

TEST(EnergyLoss, LinearTermGradients) {
  std::mt19937_64 rng(4);
  const CapacityMaps caps = oracle::random_caps(GridDomain(3, 3), rng);
  Mask label(caps.domain());
  label.set(1, 1, true);
  const LossTerm t = energy_loss(label, caps, TvMode::isotropic);
  EXPECT_EQ(t.grad.source.at(1, 1), -1.0);
  EXPECT_EQ(t.grad.sink.at(1, 1), 1.0);
  EXPECT_EQ(t.grad.source.at(0, 0), 0.0);
}

TEST(EnergyLoss, EmptyLabelIsZero) {
  std::mt19937_64 rng(5);
  const CapacityMaps caps = oracle::random_caps(GridDomain(5, 5), rng);
  const LossTerm t = energy_loss(Mask(caps.domain()), caps, TvMode::isotropic);
  EXPECT_EQ(t.value, 0.0);
  for (double g : t.grad.edge.values()) EXPECT_EQ(g, 0.0);
  for (double g : t.grad.sink.values()) EXPECT_EQ(g, 0.0);
}

TEST(EnergyLoss, ZeroReferenceMatchesPlainForm) {
  std::mt19937_64 rng(6);
  const CapacityMaps caps = oracle::random_caps(GridDomain(8, 8), rng);
  const Mask label = rectangle(caps.domain(), 2, 1, 6, 5);
  const LossTerm a = energy_loss(label, caps, TvMode::isotropic);
  const LossTerm b = energy_loss(label, caps, TvMode::isotropic, ScalarField(caps.domain()));
  EXPECT_NEAR(a.value, b.value, 1e-12);
  EXPECT_EQ(a.grad.edge, b.grad.edge);
}

TEST(EnergyLoss, FiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const CapacityMaps caps = oracle::random_caps(GridDomain(8, 8), rng, 0.1, 1.0);
    const Mask label = oracle::random_mask(caps.domain(), rng);
    for (TvMode mode : {TvMode::isotropic, TvMode::anisotropic}) {
      const LossTerm lt = energy_loss(label, caps, mode);
      const double err = fd_error(
          caps, lt.grad, [&](const CapacityMaps& c) { return energy_loss(label, c, mode).value; }, 1e-4);
      EXPECT_LE(err, 1e-6);
      const ScalarField ref = oracle::random_field(caps.domain(), rng, 0, 1);
      const LossTerm lr = energy_loss(label, caps, mode, ref);
      const double err_ref = fd_error(
          caps, lr.grad, [&](const CapacityMaps& c) { return energy_loss(label, c, mode, ref).value; }, 1e-4);
      EXPECT_LE(err_ref, 1e-6);
    }
  }
}

TEST(SaturatedFlows, HatDefinitions) {
  const GridDomain d(1, 3);
  const CapacityMaps caps = row_caps({1.0, 1.0, 1.0}, {2.0, 2.0, 2.0}, {10.0, 10.0, 10.0});
  FlowState f;
  f.source = ScalarField(d, {0.4, 0.3, 0.2});
  f.sink = ScalarField(d, {0.1, 0.6, 0.7});
  f.spatial = VectorField(ScalarField(d, {3.0, 3.0, 0.0}), ScalarField(d, {4.0, 4.0, 0.0}));
  f.lambda = ScalarField(d, 0.5);
  const Mask label(d, {0, 1, 1});
  const SaturatedFlows s = saturated_flows(label, caps, f);
  EXPECT_EQ(s.source[0], 1.0);
  EXPECT_EQ(s.source[1], 0.3);
  EXPECT_EQ(s.sink[0], 0.1);
  EXPECT_EQ(s.sink[1], 2.0);
  EXPECT_NEAR(s.spatial.x[0], 6.0, 1e-12);
  EXPECT_NEAR(s.spatial.y[0], 8.0, 1e-12);
  EXPECT_EQ(s.spatial.x[1], 3.0);
  EXPECT_EQ(s.spatial.x[2], 0.0);
}

TEST(SaturatedFlows, ZeroFlowOnBoundaryStaysZero) {
  const GridDomain d(1, 2);
  const CapacityMaps caps = row_caps({1, 1}, {1, 1}, {1, 1});
  FlowState f;
  f.source = ScalarField(d);
  f.sink = ScalarField(d);
  f.spatial = VectorField(d);
  f.lambda = ScalarField(d);
  const SaturatedFlows s = saturated_flows(Mask(d, {1, 0}), caps, f);
  EXPECT_EQ(s.spatial.x[0], 0.0);
  EXPECT_EQ(s.spatial.y[0], 0.0);
}

TEST(LabelBoundary, ForwardDifferenceStencil) {
  const Mask m(GridDomain(1, 4), {0, 1, 1, 0});
  EXPECT_EQ(label_boundary(m), Mask(GridDomain(1, 4), {1, 0, 1, 0}));
}

TEST(FlowLoss, SaturatedInstanceIsZeroInBothForms) {
  const SaturatedInstance s;
  for (FlowLossForm form : {FlowLossForm::deviation, FlowLossForm::residual}) {
    EXPECT_NEAR(flow_loss(s.label, s.caps, s.flows, HuberParams{}, form).value, 0.0, 1e-15);
  }
}

TEST(FlowLoss, ZeroIffSaturated) {
  const SaturatedInstance base;
  auto perturbed = [&](auto&& edit) {
    SaturatedInstance s;
    edit(s);
    return flow_loss(s.label, s.caps, s.flows, HuberParams{}, FlowLossForm::deviation).value;
  };
  EXPECT_GT(perturbed([](SaturatedInstance& s) { s.flows.source[1] = 0.9; }), 0.0);
  EXPECT_GT(perturbed([](SaturatedInstance& s) { s.flows.sink[0] = 0.9; }), 0.0);
  EXPECT_GT(perturbed([](SaturatedInstance& s) { s.flows.spatial.x[0] = -0.4; }), 0.0);
  EXPECT_EQ(perturbed([](SaturatedInstance& s) { s.flows.source[0] = 0.1; }), 0.0);
}

TEST(FlowLoss, SinglePixelHandChainRule) {
  const GridDomain d(2, 2);
  const CapacityMaps caps{ScalarField(d, 1.0), ScalarField(d, 1.0), ScalarField(d, 1.0)};
  FlowState f;
  f.source = ScalarField(d, 1.0);
  f.source[0] = 0.5;
  f.sink = ScalarField(d, 0.3);
  f.spatial = VectorField(d);
  f.lambda = ScalarField(d, 0.5);
  const LossTerm t = flow_loss(Mask(d), caps, f, HuberParams{1.0}, FlowLossForm::deviation);
  EXPECT_DOUBLE_EQ(t.value, 0.125 / 4);
  EXPECT_DOUBLE_EQ(t.grad.source[0], 0.5 / 4);
  EXPECT_EQ(t.grad.source[1], 0.0);
  for (double g : t.grad.sink.values()) EXPECT_EQ(g, 0.0);
}

TEST(FlowLoss, FiniteDifferencesBothForms) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const CapacityMaps caps = oracle::random_caps(GridDomain(8, 8), rng, 0.1, 1.0);
    const Mask label = rectangle(caps.domain(), 1 + t % 3, 2, 6, 5 + t % 3);
    const FlowState flows = random_flows(caps, rng);
    for (FlowLossForm form : {FlowLossForm::deviation, FlowLossForm::residual}) {
      const HuberParams hp{0.5};
      const LossTerm lt = flow_loss(label, caps, flows, hp, form);
      const double err = fd_error(
          caps, lt.grad, [&](const CapacityMaps& c) { return flow_loss(label, c, flows, hp, form).value; }, 1e-4);
      EXPECT_LE(err, 1e-4) << to_string(form) << " instance " << t;
    }
  }
}

TEST(TrainLoss, Additivity) {
  std::mt19937_64 rng(9);
  const CapacityMaps caps = oracle::random_caps(GridDomain(8, 8), rng, 0.1, 1.0);
  const Mask label = rectangle(caps.domain(), 2, 2, 5, 6);
  const FlowState flows = random_flows(caps, rng);
  const HuberParams hp;
  const LossReport r = train_loss(label, caps, flows, hp, FlowLossForm::deviation, TvMode::isotropic);
  const LossTerm fl = flow_loss(label, caps, flows, hp, FlowLossForm::deviation);
  const LossTerm el = energy_loss(label, caps, TvMode::isotropic);
  EXPECT_EQ(r.flow_loss, fl.value);
  EXPECT_EQ(r.energy_loss, el.value);
  EXPECT_EQ(r.total, fl.value + el.value);
  for (std::size_t i = 0; i < caps.domain().size(); ++i) {
    EXPECT_EQ(r.grad.source[i], fl.grad.source[i] + el.grad.source[i]);
    EXPECT_EQ(r.grad.sink[i], fl.grad.sink[i] + el.grad.sink[i]);
    EXPECT_EQ(r.grad.edge[i], fl.grad.edge[i] + el.grad.edge[i]);
  }
}

TEST(TrainLoss, ZeroFlowLossGivesEnergyOnly) {
  const SaturatedInstance s;
  const LossReport r = train_loss(s.label, s.caps, s.flows, HuberParams{}, FlowLossForm::deviation, TvMode::isotropic);
  EXPECT_EQ(r.flow_loss, 0.0);
  EXPECT_EQ(r.total, energy_loss(s.label, s.caps, TvMode::isotropic).value);
}

TEST(TrainLoss, EmptyLabelHasNoSinkGradientFromEnergy) {
  std::mt19937_64 rng(10);
  const CapacityMaps caps = oracle::random_caps(GridDomain(6, 6), rng, 0.1, 1.0);
  const LossTerm el = energy_loss(Mask(caps.domain()), caps, TvMode::isotropic);
  for (double g : el.grad.sink.values()) EXPECT_EQ(g, 0.0);
}

TEST(TrainLoss, InferredReferenceRequiresLambda) {
  const SaturatedInstance s;
  TrainLossOptions opt;
  opt.reference = EnergyReference::inferred;
  EXPECT_THROW(train_loss(s.label, s.caps, s.flows, opt), std::invalid_argument);
  const LossReport r = train_loss(s.label, s.caps, s.flows, opt, &s.flows.lambda);
  EXPECT_NEAR(r.energy_loss,
              energy(s.label, s.caps, TvMode::isotropic) - relaxed_energy(s.flows.lambda, s.caps, TvMode::isotropic),
              1e-12);
}

TEST(Gradcheck, LossSuite) {
  GradcheckOptions opt;
  const GradcheckResult r = check_loss_gradients(opt);
  EXPECT_EQ(r.instances, 20u);
  EXPECT_TRUE(r.passed()) << r.max_error;
}

TEST(Gradcheck, AdjointSuite) {
  const GradcheckResult r = check_adjoint(GradcheckOptions{});
  EXPECT_TRUE(r.passed()) << r.max_error;
}
