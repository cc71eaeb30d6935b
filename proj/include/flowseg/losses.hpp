#pragma once

#include <optional>
#include <string>

#include "flowseg/field.hpp"
#include "flowseg/levelset.hpp"
#include "flowseg/solver.hpp"

namespace flowseg {

struct HuberParams {
  double delta = 1.0;
};

/// r^2/2 inside [-delta, delta], delta(|r| - delta/2) outside.
double huber(double r, const HuberParams& params);
/// r clipped to [-delta, delta].
double huber_derivative(double r, const HuberParams& params);

/// deviation: |p^_s - p_s| + |p^_t - p_t| + |p^ - p| per pixel.
/// residual: p^_s - p^_t - div p^ per pixel.
enum class FlowLossForm { deviation, residual };

FlowLossForm parse_flow_loss_form(const std::string& name);
std::string to_string(FlowLossForm form);

/// Labeling the energy loss is contrasted against.
///   background: lambda == 0, giving -sum l C_s + sum l C_t + sum C_g |grad l|.
///   inferred:   the solver's relaxed lambda, giving E(l) - E(lambda).
enum class EnergyReference { background, inferred };

EnergyReference parse_energy_reference(const std::string& name);
std::string to_string(EnergyReference ref);

/// Flows with the optimality conditions imposed at a given labeling.
struct SaturatedFlows {
  ScalarField source;
  ScalarField sink;
  VectorField spatial;
};

struct CapacityGradients {
  ScalarField source;
  ScalarField sink;
  ScalarField edge;

  explicit CapacityGradients(GridDomain d) : source(d), sink(d), edge(d) {}
  CapacityGradients& operator+=(const CapacityGradients& other);
  CapacityGradients& operator*=(double s);
};

struct LossTerm {
  double value = 0.0;
  CapacityGradients grad;
};

struct LossReport {
  double flow_loss = 0.0;
  double energy_loss = 0.0;
  double total = 0.0;
  CapacityGradients grad;
};

/// sum (1 - l) C_s + sum l C_t + tv_energy(l, C_g). Accepts relaxed l.
double relaxed_energy(const ScalarField& lambda, const CapacityMaps& caps, TvMode mode);
double energy(const Mask& label, const CapacityMaps& caps, TvMode mode);

/// Pixels where the forward-difference gradient of the label is nonzero.
Mask label_boundary(const Mask& label);

/// -sum l C_s + sum l C_t + sum C_g |grad l|, with capacity gradients.
LossTerm energy_loss(const Mask& label, const CapacityMaps& caps, TvMode mode);
/// E(label) - E(reference); reference == 0 reproduces the overload above.
LossTerm energy_loss(const Mask& label, const CapacityMaps& caps, TvMode mode, const ScalarField& reference);

SaturatedFlows saturated_flows(const Mask& label, const CapacityMaps& caps, const FlowState& flows);

/// Mean Huber penalty of the per-pixel flow residual. Flows are constants;
/// gradients reach the capacities only through the saturated flows.
LossTerm flow_loss(const Mask& label, const CapacityMaps& caps, const FlowState& flows, const HuberParams& params,
                   FlowLossForm form);

struct TrainLossOptions {
  HuberParams huber;
  FlowLossForm form = FlowLossForm::deviation;
  TvMode mode = TvMode::isotropic;
  EnergyReference reference = EnergyReference::background;
  /// Multiplies the energy term (value and gradients).
  double energy_weight = 1.0;
  bool include_flow = true;
  bool include_energy = true;
};

/// flow_loss + energy_weight * energy_loss. `inferred_lambda` is required
/// when options.reference is inferred.
LossReport train_loss(const Mask& label, const CapacityMaps& caps, const FlowState& flows,
                      const TrainLossOptions& options, const ScalarField* inferred_lambda = nullptr);
LossReport train_loss(const Mask& label, const CapacityMaps& caps, const FlowState& flows, const HuberParams& params,
                      FlowLossForm form, TvMode mode);

}  // namespace flowseg
