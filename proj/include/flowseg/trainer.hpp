#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "flowseg/capnet.hpp"
#include "flowseg/losses.hpp"
#include "flowseg/metrics.hpp"
#include "flowseg/sample.hpp"
#include "flowseg/solver.hpp"

namespace flowseg {

struct TrainConfig {
  OptimConfig optim;
  SolverConfig solver;
  HuberParams huber;
  FlowLossForm loss_form = FlowLossForm::deviation;
  int epochs = 30;
  std::uint64_t shuffle_seed = 0;
  EnergyReference energy_reference = EnergyReference::inferred;
  /// Scales the energy term by 1 / pixel count, matching the flow term's mean.
  bool normalize_energy = true;
  bool use_flow_loss = true;
  bool use_energy_loss = true;
  /// Threshold level for validation and inference.
  double level = 0.5;
  /// Restrict each inner region's solve to its parent mask before intersecting.
  bool nest_by_masking = false;

  void validate() const;
};

struct TrainStats {
  std::vector<double> total_loss;
  std::vector<double> flow_loss;
  std::vector<double> energy_loss;
  /// Mean validation Dice per region (WT, TC, EC), one entry per epoch.
  std::vector<std::array<double, 3>> validation_dice;
  std::vector<double> epoch_seconds;
};

struct HierarchyResult {
  std::array<ScalarField, 3> lambda;
  std::array<Mask, 3> masks;
};

/// One optimizer update on one sample. `dropout_seed` fixes the dropout mask.
std::array<LossReport, 3> train_step(NetParams& params, const NetConfig& cfg, const Sample& sample,
                                     const TrainConfig& tcfg, std::uint64_t dropout_seed);

/// Loss reports and accumulated parameter gradients, without the update.
/// Gradients add onto whatever the buffers already hold.
std::array<LossReport, 3> accumulate_gradients(NetParams& params, const NetConfig& cfg, const Sample& sample,
                                               const TrainConfig& tcfg, std::uint64_t dropout_seed);

/// Forward pass plus one solve per group; the flows the loss is taken at.
std::array<FlowState, 3> solve_flows(const NetParams& params, const NetConfig& cfg, const MultiChannelImage& image,
                                     const SolverConfig& scfg, std::uint64_t dropout_seed);

/// Sum of the three region losses with the flows held at `frozen`.
double total_loss_at(const NetParams& params, const NetConfig& cfg, const Sample& sample, const TrainConfig& tcfg,
                     std::uint64_t dropout_seed, const std::array<FlowState, 3>& frozen);

using EpochCallback = std::function<void(int epoch, const TrainStats& stats)>;

/// Shuffled per-sample training. Validation Dice comes from `validation`, or
/// from `dataset` when `validation` is empty.
TrainStats train(NetParams& params, const NetConfig& cfg, const std::vector<Sample>& dataset,
                 const std::vector<Sample>& validation, const TrainConfig& tcfg, const EpochCallback& on_epoch = {});

/// Solves each group, thresholds at `level` and enforces WT >= TC >= EC.
HierarchyResult infer_groups(const CapacityGroups& groups, const SolverConfig& scfg, double level,
                             bool nest_by_masking = false);

HierarchyResult infer_full(const NetParams& params, const NetConfig& cfg, const MultiChannelImage& image,
                           const SolverConfig& scfg, double level, bool nest_by_masking = false);

/// Mean Dice per region of infer_full over `samples`.
std::array<double, 3> mean_dice(const NetParams& params, const NetConfig& cfg, const std::vector<Sample>& samples,
                                const TrainConfig& tcfg);

MetricReport evaluate_dataset(const std::vector<HierarchyResult>& preds, const std::vector<Sample>& truths,
                              HausdorffVariant variant = HausdorffVariant::max);

}  // namespace flowseg
