#include "flowseg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace flowseg {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_shared(const Mask& label, const CapacityMaps& caps, const char* what) {
  require_same_domain(label.domain(), caps.source.domain(), what);
  require_same_domain(label.domain(), caps.sink.domain(), what);
  require_same_domain(label.domain(), caps.edge.domain(), what);
}

void require_shared(const Mask& label, const CapacityMaps& caps, const FlowState& flows, const char* what) {
  require_shared(label, caps, what);
  require_same_domain(label.domain(), flows.source.domain(), what);
  require_same_domain(label.domain(), flows.sink.domain(), what);
  require_same_domain(label.domain(), flows.spatial.domain(), what);
}

}  // namespace

double huber(double r, const HuberParams& params) {
  const double a = std::abs(r);
  return a <= params.delta ? 0.5 * r * r : params.delta * (a - 0.5 * params.delta);
}

double huber_derivative(double r, const HuberParams& params) {
  return std::clamp(r, -params.delta, params.delta);
}

FlowLossForm parse_flow_loss_form(const std::string& name) {
  if (name == "deviation") return FlowLossForm::deviation;
  if (name == "residual") return FlowLossForm::residual;
  throw std::invalid_argument("unknown flow loss form '" + name + "'");
}

std::string to_string(FlowLossForm form) { return form == FlowLossForm::deviation ? "deviation" : "residual"; }

EnergyReference parse_energy_reference(const std::string& name) {
  if (name == "background") return EnergyReference::background;
  if (name == "inferred") return EnergyReference::inferred;
  throw std::invalid_argument("unknown energy reference '" + name + "'");
}

std::string to_string(EnergyReference ref) { return ref == EnergyReference::background ? "background" : "inferred"; }

CapacityGradients& CapacityGradients::operator+=(const CapacityGradients& other) {
  for (std::size_t i = 0; i < source.size(); ++i) {
    source[i] += other.source[i];
    sink[i] += other.sink[i];
    edge[i] += other.edge[i];
  }
  return *this;
}

CapacityGradients& CapacityGradients::operator*=(double s) {
  for (std::size_t i = 0; i < source.size(); ++i) {
    source[i] *= s;
    sink[i] *= s;
    edge[i] *= s;
  }
  return *this;
}

double relaxed_energy(const ScalarField& lambda, const CapacityMaps& caps, TvMode mode) {
  require_same_domain(lambda.domain(), caps.domain(), "energy");
  require_same_domain(lambda.domain(), caps.sink.domain(), "energy");
  double region = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    region += (1.0 - lambda[i]) * caps.source[i] + lambda[i] * caps.sink[i];
  }
  return region + tv_energy(lambda, caps.edge, mode);
}

double energy(const Mask& label, const CapacityMaps& caps, TvMode mode) {
  require_shared(label, caps, "energy");
  return relaxed_energy(label.to_field(), caps, mode);
}

Mask label_boundary(const Mask& label) {
  const VectorField g = gradient(label.to_field());
  Mask out(label.domain());
  for (std::size_t i = 0; i < label.size(); ++i) out.set(i, g.x[i] != 0.0 || g.y[i] != 0.0);
  return out;
}

LossTerm energy_loss(const Mask& label, const CapacityMaps& caps, TvMode mode, const ScalarField& reference) {
  require_shared(label, caps, "energy_loss");
  require_same_domain(label.domain(), reference.domain(), "energy_loss reference");
  const GridDomain d = label.domain();
  const ScalarField l = label.to_field();
  const ScalarField tv_label = magnitude(gradient(l), mode);
  const ScalarField tv_ref = magnitude(gradient(reference), mode);

  LossTerm out{0.0, CapacityGradients(d)};
  double value = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    // E(l) - E(ref) = sum (ref - l) C_s + (l - ref) C_t + (|grad l| - |grad ref|) C_g
    const double ds = reference[i] - l[i];
    const double dt = l[i] - reference[i];
    const double dg = tv_label[i] - tv_ref[i];
    value += ds * caps.source[i] + dt * caps.sink[i] + dg * caps.edge[i];
    out.grad.source[i] = ds;
    out.grad.sink[i] = dt;
    out.grad.edge[i] = dg;
  }
  out.value = value;
  return out;
}

LossTerm energy_loss(const Mask& label, const CapacityMaps& caps, TvMode mode) {
  return energy_loss(label, caps, mode, ScalarField(label.domain(), 0.0));
}

SaturatedFlows saturated_flows(const Mask& label, const CapacityMaps& caps, const FlowState& flows) {
  require_shared(label, caps, flows, "saturated_flows");
  const Mask boundary = label_boundary(label);
  SaturatedFlows hat{flows.source, flows.sink, flows.spatial};
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i]) {
      hat.sink[i] = caps.sink[i];
    } else {
      hat.source[i] = caps.source[i];
    }
    if (boundary[i]) {
      const double px = flows.spatial.x[i];
      const double py = flows.spatial.y[i];
      const double m = std::sqrt(px * px + py * py);
      if (m > 0.0) {
        hat.spatial.x[i] = px * caps.edge[i] / m;
        hat.spatial.y[i] = py * caps.edge[i] / m;
      } else {
        hat.spatial.x[i] = 0.0;
        hat.spatial.y[i] = 0.0;
      }
    }
  }
  return hat;
}

namespace {

constexpr double kSaturationRoundoff = 1e-12;

LossTerm deviation_loss(const Mask& label, const CapacityMaps& caps, const FlowState& flows,
                        const HuberParams& params) {
  const GridDomain d = label.domain();
  const Mask boundary = label_boundary(label);
  const double inv_n = 1.0 / static_cast<double>(d.size());

  LossTerm out{0.0, CapacityGradients(d)};
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    // Only the substituted terms differ from the raw flows.
    double r = 0.0;
    double ds = 0.0, dt = 0.0, dg = 0.0;
    if (label[i]) {
      const double e = caps.sink[i] - flows.sink[i];
      r += std::abs(e);
      dt = sign(e);
    } else {
      const double e = caps.source[i] - flows.source[i];
      r += std::abs(e);
      ds = sign(e);
    }
    if (boundary[i]) {
      const double m = magnitude(flows.spatial.x[i], flows.spatial.y[i], TvMode::isotropic);
      if (m > 0.0) {
        // |p C_g/|p| - p| = |C_g - |p||; projected flows match C_g only to roundoff.
        double e = caps.edge[i] - m;
        if (std::abs(e) <= kSaturationRoundoff * caps.edge[i]) e = 0.0;
        r += std::abs(e);
        dg = sign(e);
      }
    }
    total += huber(r, params);
    const double h = huber_derivative(r, params) * inv_n;
    out.grad.source[i] = h * ds;
    out.grad.sink[i] = h * dt;
    out.grad.edge[i] = h * dg;
  }
  out.value = total * inv_n;
  return out;
}

LossTerm residual_loss(const Mask& label, const CapacityMaps& caps, const FlowState& flows,
                       const HuberParams& params) {
  const GridDomain d = label.domain();
  const Mask boundary = label_boundary(label);
  const SaturatedFlows hat = saturated_flows(label, caps, flows);
  const ScalarField div_hat = divergence(hat.spatial);
  const double inv_n = 1.0 / static_cast<double>(d.size());

  LossTerm out{0.0, CapacityGradients(d)};
  ScalarField weight(d);
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = hat.source[i] - hat.sink[i] - div_hat[i];
    total += huber(r, params);
    weight[i] = huber_derivative(r, params) * inv_n;
    if (label[i]) {
      out.grad.sink[i] = -weight[i];
    } else {
      out.grad.source[i] = weight[i];
    }
  }
  out.value = total * inv_n;

  // d/dp^ of -sum w div p^ is grad w (div is the negative adjoint of grad);
  // p^ = C_g p/|p| on boundary pixels.
  const VectorField gw = gradient(weight);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!boundary[i]) continue;
    const double m = magnitude(flows.spatial.x[i], flows.spatial.y[i], TvMode::isotropic);
    if (m > 0.0) out.grad.edge[i] = (gw.x[i] * flows.spatial.x[i] + gw.y[i] * flows.spatial.y[i]) / m;
  }
  return out;
}

}  // namespace

LossTerm flow_loss(const Mask& label, const CapacityMaps& caps, const FlowState& flows, const HuberParams& params,
                   FlowLossForm form) {
  require_shared(label, caps, flows, "flow_loss");
  if (!(params.delta > 0.0)) throw std::invalid_argument("huber delta must be positive");
  return form == FlowLossForm::deviation ? deviation_loss(label, caps, flows, params)
                                         : residual_loss(label, caps, flows, params);
}

LossReport train_loss(const Mask& label, const CapacityMaps& caps, const FlowState& flows,
                      const TrainLossOptions& options, const ScalarField* inferred_lambda) {
  const GridDomain d = label.domain();
  LossReport report{0.0, 0.0, 0.0, CapacityGradients(d)};
  if (options.include_flow) {
    LossTerm f = flow_loss(label, caps, flows, options.huber, options.form);
    report.flow_loss = f.value;
    report.grad += f.grad;
  }
  if (options.include_energy) {
    LossTerm e = [&] {
      if (options.reference == EnergyReference::background) return energy_loss(label, caps, options.mode);
      if (!inferred_lambda) throw std::invalid_argument("inferred energy reference needs the solver's lambda");
      return energy_loss(label, caps, options.mode, *inferred_lambda);
    }();
    e.grad *= options.energy_weight;
    report.energy_loss = options.energy_weight * e.value;
    report.grad += e.grad;
  }
  report.total = report.flow_loss + report.energy_loss;
  return report;
}

LossReport train_loss(const Mask& label, const CapacityMaps& caps, const FlowState& flows, const HuberParams& params,
                      FlowLossForm form, TvMode mode) {
  TrainLossOptions options;
  options.huber = params;
  options.form = form;
  options.mode = mode;
  return train_loss(label, caps, flows, options);
}

}  // namespace flowseg
