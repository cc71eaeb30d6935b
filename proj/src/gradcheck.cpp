#include "flowseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "flowseg/capnet.hpp"
#include "flowseg/losses.hpp"
#include "flowseg/trainer.hpp"

namespace flowseg {

namespace {

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return scale > 0.0 ? diff / scale : diff;
}

ScalarField random_field(GridDomain d, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  ScalarField f(d);
  for (double& v : f.values()) v = u(rng);
  return f;
}

// Axis-aligned rectangle, at least one pixel, never the full grid.
Mask random_rectangle(GridDomain d, std::mt19937_64& rng, const Mask* inside = nullptr) {
  for (;;) {
    std::uniform_int_distribution<std::size_t> row(0, d.height - 1), col(0, d.width - 1);
    std::size_t r0 = row(rng), r1 = row(rng), c0 = col(rng), c1 = col(rng);
    if (r0 > r1) std::swap(r0, r1);
    if (c0 > c1) std::swap(c0, c1);
    Mask m(d);
    for (std::size_t r = r0; r <= r1; ++r) {
      for (std::size_t c = c0; c <= c1; ++c) m.set(r, c, true);
    }
    if (inside) m = mask_and(m, *inside);
    if (!m.empty() && m.count() < d.size()) return m;
  }
}

CapacityMaps random_caps(GridDomain d, std::mt19937_64& rng) {
  return CapacityMaps{random_field(d, rng, 0.05, 1.5), random_field(d, rng, 0.05, 1.5), random_field(d, rng, 0.05, 1.0)};
}

}  // namespace

GradcheckResult check_loss_gradients(const GradcheckOptions& options) {
  GradcheckResult res{"loss capacity gradients", 0.0, options.loss_tolerance, 0, 0};
  const GridDomain d(options.size, options.size);
  std::mt19937_64 rng(options.seed);
  const SolverConfig scfg;
  for (std::size_t inst = 0; inst < options.instances; ++inst) {
    CapacityMaps caps = random_caps(d, rng);
    const Mask label = random_rectangle(d, rng);
    const FlowState flows = solve(caps, scfg).final_state;
    for (FlowLossForm form : {FlowLossForm::deviation, FlowLossForm::residual}) {
      for (EnergyReference ref : {EnergyReference::background, EnergyReference::inferred}) {
        TrainLossOptions opts;
        opts.form = form;
        opts.reference = ref;
        opts.energy_weight = 1.0 / static_cast<double>(d.size());
        const auto loss = [&](const CapacityMaps& c) { return train_loss(label, c, flows, opts, &flows.lambda).total; };
        const LossReport report = train_loss(label, caps, flows, opts, &flows.lambda);
        std::vector<double> analytic, numeric;
        ScalarField* fields[3] = {&caps.source, &caps.sink, &caps.edge};
        const ScalarField* grads[3] = {&report.grad.source, &report.grad.sink, &report.grad.edge};
        for (int k = 0; k < 3; ++k) {
          for (std::size_t i = 0; i < d.size(); ++i) {
            double& v = (*fields[k])[i];
            const double saved = v;
            v = saved + options.step;
            const double up = loss(caps);
            v = saved - options.step;
            const double down = loss(caps);
            v = saved;
            analytic.push_back((*grads[k])[i]);
            numeric.push_back((up - down) / (2.0 * options.step));
          }
        }
        res.max_error = std::max(res.max_error, relative_error(analytic, numeric));
        res.coordinates += analytic.size();
      }
    }
    ++res.instances;
  }
  return res;
}

GradcheckResult check_network_gradients(const GradcheckOptions& options) {
  GradcheckResult res{"network parameter gradients", 0.0, options.network_tolerance, 0, 0};
  const GridDomain d(options.size, options.size);
  NetConfig cfg;
  cfg.down_widths = {2, 2};
  TrainConfig tcfg;
  tcfg.optim.weight_decay = 0.0;
  const std::size_t instances = std::min<std::size_t>(options.instances, 3);
  for (std::size_t inst = 0; inst < instances; ++inst) {
    std::mt19937_64 rng(options.seed + 7919 * inst);
    cfg.seed = options.seed + inst;
    Sample s;
    for (std::size_t c = 0; c < cfg.in_channels; ++c) s.image.channels.push_back(random_field(d, rng, -1.0, 1.0));
    s.labels[0] = random_rectangle(d, rng);
    s.labels[1] = random_rectangle(d, rng, &s.labels[0]);
    s.labels[2] = random_rectangle(d, rng, &s.labels[1]);
    tcfg.loss_form = inst % 2 == 0 ? FlowLossForm::deviation : FlowLossForm::residual;

    NetParams params = init_params(cfg);
    for (auto& t : params.tensors) {
      if (t.name.ends_with(".bias")) {
        for (double& v : t.value) v = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
      }
    }
    const std::uint64_t dropout_seed = 11 + inst;
    const auto frozen = solve_flows(params, cfg, s.image, tcfg.solver, dropout_seed);
    params.zero_grad();
    accumulate_gradients(params, cfg, s, tcfg, dropout_seed);

    std::vector<double> analytic, numeric;
    for (auto& t : params.tensors) {
      for (std::size_t i = 0; i < t.value.size(); ++i) {
        const double saved = t.value[i];
        t.value[i] = saved + options.step;
        const double up = total_loss_at(params, cfg, s, tcfg, dropout_seed, frozen);
        t.value[i] = saved - options.step;
        const double down = total_loss_at(params, cfg, s, tcfg, dropout_seed, frozen);
        t.value[i] = saved;
        analytic.push_back(t.grad[i]);
        numeric.push_back((up - down) / (2.0 * options.step));
      }
    }
    res.max_error = std::max(res.max_error, relative_error(analytic, numeric));
    res.coordinates += analytic.size();
    ++res.instances;
  }
  return res;
}

GradcheckResult check_adjoint(const GradcheckOptions& options) {
  GradcheckResult res{"gradient/divergence adjoint", 0.0, options.adjoint_tolerance, 0, 0};
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> dim(1, 2 * options.size);
  for (std::size_t inst = 0; inst < options.instances; ++inst) {
    const GridDomain d(dim(rng), dim(rng));
    const ScalarField u = random_field(d, rng, -1.0, 1.0);
    const VectorField p(random_field(d, rng, -1.0, 1.0), random_field(d, rng, -1.0, 1.0));
    const double lhs = inner(gradient(u), p);
    const double rhs = -inner(u, divergence(p));
    res.max_error = std::max(res.max_error, std::abs(lhs - rhs));
    res.coordinates += d.size();
    ++res.instances;
  }
  return res;
}

std::vector<GradcheckResult> run_gradchecks(const GradcheckOptions& options) {
  return {check_adjoint(options), check_loss_gradients(options), check_network_gradients(options)};
}

}  // namespace flowseg
