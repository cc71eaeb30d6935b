#include "flowseg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <stdexcept>

namespace flowseg {

void TrainConfig::validate() const {
  optim.validate();
  solver.validate();
  if (!(huber.delta > 0.0)) throw std::invalid_argument("huber delta must be positive");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(level >= 0.0 && level <= 1.0)) throw std::invalid_argument("level must be in [0, 1]");
  if (!use_flow_loss && !use_energy_loss) throw std::invalid_argument("at least one loss term must be enabled");
}

namespace {

TrainLossOptions loss_options(const TrainConfig& tcfg, GridDomain d) {
  TrainLossOptions o;
  o.huber = tcfg.huber;
  o.form = tcfg.loss_form;
  o.mode = tcfg.solver.tv_mode;
  o.reference = tcfg.energy_reference;
  o.energy_weight = tcfg.normalize_energy ? 1.0 / static_cast<double>(d.size()) : 1.0;
  o.include_flow = tcfg.use_flow_loss;
  o.include_energy = tcfg.use_energy_loss;
  return o;
}

std::array<FlowState, 3> solve_groups(const CapacityGroups& groups, const SolverConfig& scfg) {
  SolverConfig cfg = scfg;
  cfg.record_trajectory = false;
  cfg.record_energy = false;
  std::array<FlowState, 3> out;
  for (std::size_t g = 0; g < 3; ++g) out[g] = solve(groups[g], cfg).final_state;
  return out;
}

std::array<LossReport, 3> region_losses(const HeadOutput& head, const Sample& sample, const TrainConfig& tcfg,
                                        const std::array<FlowState, 3>& flows) {
  const TrainLossOptions opts = loss_options(tcfg, sample.image.domain());
  return {train_loss(sample.labels[0], head.groups[0], flows[0], opts, &flows[0].lambda),
          train_loss(sample.labels[1], head.groups[1], flows[1], opts, &flows[1].lambda),
          train_loss(sample.labels[2], head.groups[2], flows[2], opts, &flows[2].lambda)};
}

}  // namespace

std::array<LossReport, 3> accumulate_gradients(NetParams& params, const NetConfig& cfg, const Sample& sample,
                                               const TrainConfig& tcfg, std::uint64_t dropout_seed) {
  sample.validate();
  ForwardResult fwd = forward(params, cfg, sample.image, true, dropout_seed);
  const HeadOutput head = capacity_head(fwd.raw_maps);
  const auto flows = solve_groups(head.groups, tcfg.solver);
  auto reports = region_losses(head, sample, tcfg, flows);
  std::array<const ScalarField*, 9> grads{};
  for (std::size_t g = 0; g < 3; ++g) {
    grads[3 * g] = &reports[g].grad.source;
    grads[3 * g + 1] = &reports[g].grad.sink;
    grads[3 * g + 2] = &reports[g].grad.edge;
  }
  backward(params, cfg, fwd.tape, chain_through_head(head, grads));
  return reports;
}

std::array<LossReport, 3> train_step(NetParams& params, const NetConfig& cfg, const Sample& sample,
                                     const TrainConfig& tcfg, std::uint64_t dropout_seed) {
  tcfg.validate();
  auto reports = accumulate_gradients(params, cfg, sample, tcfg, dropout_seed);
  sgd_momentum_step(params, tcfg.optim);
  return reports;
}

std::array<FlowState, 3> solve_flows(const NetParams& params, const NetConfig& cfg, const MultiChannelImage& image,
                                     const SolverConfig& scfg, std::uint64_t dropout_seed) {
  const ForwardResult fwd = forward(params, cfg, image, true, dropout_seed);
  return solve_groups(capacity_head(fwd.raw_maps).groups, scfg);
}

double total_loss_at(const NetParams& params, const NetConfig& cfg, const Sample& sample, const TrainConfig& tcfg,
                     std::uint64_t dropout_seed, const std::array<FlowState, 3>& frozen) {
  const ForwardResult fwd = forward(params, cfg, sample.image, true, dropout_seed);
  const HeadOutput head = capacity_head(fwd.raw_maps);
  const auto reports = region_losses(head, sample, tcfg, frozen);
  return reports[0].total + reports[1].total + reports[2].total;
}

TrainStats train(NetParams& params, const NetConfig& cfg, const std::vector<Sample>& dataset,
                 const std::vector<Sample>& validation, const TrainConfig& tcfg, const EpochCallback& on_epoch) {
  tcfg.validate();
  if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
  const std::vector<Sample>& val = validation.empty() ? dataset : validation;
  TrainStats stats;
  std::vector<std::size_t> order(dataset.size());
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(tcfg.shuffle_seed + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0, flow = 0.0, energy = 0.0;
    for (std::size_t idx : order) {
      const auto reports = train_step(params, cfg, dataset[idx], tcfg, tcfg.shuffle_seed * 1000003u + step++);
      for (const auto& r : reports) {
        total += r.total;
        flow += r.flow_loss;
        energy += r.energy_loss;
      }
    }
    const double n = static_cast<double>(dataset.size());
    stats.total_loss.push_back(total / n);
    stats.flow_loss.push_back(flow / n);
    stats.energy_loss.push_back(energy / n);
    stats.validation_dice.push_back(mean_dice(params, cfg, val, tcfg));
    stats.epoch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    if (on_epoch) on_epoch(epoch, stats);
  }
  return stats;
}

HierarchyResult infer_groups(const CapacityGroups& groups, const SolverConfig& scfg, double level,
                             bool nest_by_masking) {
  SolverConfig cfg = scfg;
  cfg.record_trajectory = false;
  cfg.record_energy = false;
  HierarchyResult out;
  for (std::size_t g = 0; g < 3; ++g) {
    CapacityMaps caps = groups[g];
    if (nest_by_masking && g > 0) {
      const Mask& parent = out.masks[g - 1];
      for (std::size_t i = 0; i < parent.size(); ++i) {
        if (!parent[i]) caps.source[i] = 0.0;
      }
    }
    out.lambda[g] = solve(caps, cfg).final_state.lambda;
    out.masks[g] = threshold(out.lambda[g], level);
    if (g > 0) out.masks[g] = mask_and(out.masks[g], out.masks[g - 1]);
  }
  return out;
}

HierarchyResult infer_full(const NetParams& params, const NetConfig& cfg, const MultiChannelImage& image,
                           const SolverConfig& scfg, double level, bool nest_by_masking) {
  const ForwardResult fwd = forward(params, cfg, image, false, 0);
  return infer_groups(capacity_head(fwd.raw_maps).groups, scfg, level, nest_by_masking);
}

std::array<double, 3> mean_dice(const NetParams& params, const NetConfig& cfg, const std::vector<Sample>& samples,
                                const TrainConfig& tcfg) {
  std::array<double, 3> acc{0.0, 0.0, 0.0};
  if (samples.empty()) return acc;
  for (const Sample& s : samples) {
    const HierarchyResult h = infer_full(params, cfg, s.image, tcfg.solver, tcfg.level, tcfg.nest_by_masking);
    for (std::size_t r = 0; r < 3; ++r) acc[r] += dice(h.masks[r], s.labels[r]);
  }
  for (double& v : acc) v /= static_cast<double>(samples.size());
  return acc;
}

MetricReport evaluate_dataset(const std::vector<HierarchyResult>& preds, const std::vector<Sample>& truths,
                              HausdorffVariant variant) {
  std::vector<MaskTriple> p, t;
  for (const auto& h : preds) p.push_back(h.masks);
  for (const auto& s : truths) t.push_back(s.labels);
  return evaluate_dataset(p, t, variant);
}

}  // namespace flowseg
