#pragma once

#include <functional>
#include <vector>

#include "flowseg/field.hpp"

namespace flowseg {

/// Source, sink and edge capacities of one max-flow problem.
struct CapacityMaps {
  ScalarField source;  // C_s
  ScalarField sink;    // C_t
  ScalarField edge;    // C_g

  const GridDomain& domain() const { return source.domain(); }

  /// Throws DomainError on mismatched grids, std::invalid_argument on
  /// negative or non-finite capacities.
  void validate() const;
};

struct SolverConfig {
  double step_size = 0.16;  // alpha
  double penalty = 0.3;     // c
  int iterations = 15;
  TvMode tv_mode = TvMode::isotropic;
  bool clamp_lambda_final = true;
  bool record_trajectory = false;
  bool record_energy = false;
  /// Stop once the conservation residual drops below this. 0 disables.
  double residual_tolerance = 0.0;

  void validate() const;
};

/// Primal-dual iterate: source/sink/spatial flows and the multiplier lambda.
struct FlowState {
  ScalarField source;
  ScalarField sink;
  VectorField spatial;
  ScalarField lambda;
};

struct SolverResult {
  FlowState final_state;
  std::vector<double> residual_norms;
  std::vector<double> energy_trace;        // filled when record_energy
  std::vector<ScalarField> trajectory;     // lambda after each iteration, when record_trajectory
};

enum class Substep { spatial, source, sink, multiplier };

/// Called after each substep; lets callers audit feasibility mid-iteration.
using SubstepObserver = std::function<void(Substep, const FlowState&)>;

FlowState initialize(const CapacityMaps& caps);

/// One ADMM sweep: spatial flow, source flow, sink flow, multiplier. Each
/// substep reads the fields written by the previous one.
void step(FlowState& state, const CapacityMaps& caps, const SolverConfig& cfg,
          const SubstepObserver& observer = {});

SolverResult solve(const CapacityMaps& caps, const SolverConfig& cfg, const SubstepObserver& observer = {});

/// || div p - p_s + p_t ||_2
double residual_norm(const FlowState& state);
ScalarField conservation_residual(const FlowState& state);

/// Largest amount by which any flow exceeds its capacity (<= 0 when feasible).
double max_capacity_violation(const FlowState& state, const CapacityMaps& caps, TvMode mode);

}  // namespace flowseg
