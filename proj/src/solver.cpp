#include "flowseg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowseg/levelset.hpp"
#include "flowseg/losses.hpp"

namespace flowseg {

namespace {

void require_nonnegative(const ScalarField& f, const char* name) {
  for (double v : f.values()) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(name) + " has non-finite capacity");
    if (v < 0.0) throw std::invalid_argument(std::string(name) + " has negative capacity");
  }
}

}  // namespace

void CapacityMaps::validate() const {
  require_same_domain(source.domain(), sink.domain(), "CapacityMaps sink");
  require_same_domain(source.domain(), edge.domain(), "CapacityMaps edge");
  require_nonnegative(source, "c_source");
  require_nonnegative(sink, "c_sink");
  require_nonnegative(edge, "c_edge");
}

void SolverConfig::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("solver step_size must be positive");
  if (!(penalty > 0.0)) throw std::invalid_argument("solver penalty must be positive");
  if (iterations < 1) throw std::invalid_argument("solver iterations must be >= 1");
  if (residual_tolerance < 0.0) throw std::invalid_argument("solver residual_tolerance must be >= 0");
}

FlowState initialize(const CapacityMaps& caps) {
  const GridDomain d = caps.domain();
  FlowState s{ScalarField(d), ScalarField(d), VectorField(d), ScalarField(d, 0.5)};
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(d.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double m = std::min(caps.source[i], caps.sink[i]);
    s.source[i] = m;
    s.sink[i] = m;
  }
  return s;
}

void step(FlowState& state, const CapacityMaps& caps, const SolverConfig& cfg, const SubstepObserver& observer) {
  const double alpha = cfg.step_size;
  const double c = cfg.penalty;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(caps.domain().size());

  // Spatial flow: ascend -(c/2)|div p - p_s + p_t|^2 + <lambda, div p>, then project.
  {
    ScalarField g = divergence(state.spatial);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) g[i] = g[i] - state.source[i] + state.sink[i] - state.lambda[i] / c;
    VectorField dir = gradient(g);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      dir.x[i] = state.spatial.x[i] + alpha * dir.x[i];
      dir.y[i] = state.spatial.y[i] + alpha * dir.y[i];
    }
    state.spatial = project_vector_capacity(dir, caps.edge, cfg.tv_mode);
  }
  if (observer) observer(Substep::spatial, state);

  const ScalarField div_p = divergence(state.spatial);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double v = state.source[i] +
                     alpha * (div_p[i] + state.sink[i] - state.source[i] - (state.lambda[i] - 1.0) / c);
    state.source[i] = std::min(v, caps.source[i]);
  }
  if (observer) observer(Substep::source, state);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double v =
        state.sink[i] + alpha * (-div_p[i] - state.sink[i] + state.source[i] + state.lambda[i] / c);
    state.sink[i] = std::min(v, caps.sink[i]);
  }
  if (observer) observer(Substep::sink, state);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    state.lambda[i] -= alpha * (div_p[i] - state.source[i] + state.sink[i]);
  }
  if (observer) observer(Substep::multiplier, state);
}

ScalarField conservation_residual(const FlowState& state) {
  ScalarField r = divergence(state.spatial);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(r.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) r[i] = r[i] - state.source[i] + state.sink[i];
  return r;
}

double residual_norm(const FlowState& state) { return l2_norm(conservation_residual(state)); }

namespace {

ScalarField clamped(const ScalarField& lambda) {
  ScalarField out = lambda;
  for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace

SolverResult solve(const CapacityMaps& caps, const SolverConfig& cfg, const SubstepObserver& observer) {
  caps.validate();
  cfg.validate();

  SolverResult result;
  result.final_state = initialize(caps);
  FlowState& state = result.final_state;
  result.residual_norms.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int it = 0; it < cfg.iterations; ++it) {
    step(state, caps, cfg, observer);
    const double res = residual_norm(state);
    result.residual_norms.push_back(res);
    if (cfg.record_energy) {
      result.energy_trace.push_back(energy(threshold(state.lambda, 0.5), caps, cfg.tv_mode));
    }
    if (cfg.record_trajectory) {
      result.trajectory.push_back(cfg.clamp_lambda_final ? clamped(state.lambda) : state.lambda);
    }
    if (cfg.residual_tolerance > 0.0 && res < cfg.residual_tolerance) break;
  }

  if (cfg.clamp_lambda_final) state.lambda = clamped(state.lambda);
  return result;
}

double max_capacity_violation(const FlowState& state, const CapacityMaps& caps, TvMode mode) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < caps.domain().size(); ++i) {
    worst = std::max(worst, state.source[i] - caps.source[i]);
    worst = std::max(worst, state.sink[i] - caps.sink[i]);
    worst = std::max(worst, constraint_magnitude(state.spatial.x[i], state.spatial.y[i], mode) - caps.edge[i]);
  }
  return worst;
}

}  // namespace flowseg
