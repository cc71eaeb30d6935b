#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "flowseg/capnet.hpp"
#include "flowseg/gradcheck.hpp"
#include "flowseg/metrics.hpp"
#include "flowseg/synth.hpp"
#include "flowseg/trainer.hpp"

namespace flowseg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a CLI run can configure. JSON sections:
///   solver      step_size penalty iterations tv_mode residual_tolerance
///   inference   level nest_by_masking
///   net         in_channels down_widths out_maps dropout_rate seed
///   optim       learning_rate momentum weight_decay
///   loss        huber_delta flow_form energy_reference normalize_energy use_flow use_energy
///   train       epochs shuffle_seed train_fraction split_seed checkpoint_every
///   synth       count height width noise_sigma intensities center_min center_max
///               axis_min axis_max core_scale enhancing_scale standardize seed
///   handcrafted fg_mean bg_mean edge_scale edge_sharpness channel_index
///   eval        hausdorff
///   gradcheck   instances size seed step loss_tolerance network_tolerance adjoint_tolerance
/// Unknown sections or keys are rejected; missing ones keep their defaults.
struct RunConfig {
  TrainConfig train;
  NetConfig net;
  SynthConfig synth;
  HandcraftedParams handcrafted;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  int checkpoint_every = 1;
  HausdorffVariant hausdorff = HausdorffVariant::max;
  GradcheckOptions gradcheck;

  /// Throws ConfigError naming the offending value.
  void validate() const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
/// Complete document with every effective value.
std::string serialize_config(const RunConfig& cfg);

}  // namespace flowseg
