#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "flowseg/conv.hpp"
#include "flowseg/field.hpp"
#include "flowseg/solver.hpp"

namespace flowseg {

/// Co-registered image channels (T1, T2, Flair, T1c by convention).
struct MultiChannelImage {
  std::vector<ScalarField> channels;
  bool standardized = false;

  const GridDomain& domain() const { return channels.front().domain(); }
  /// Throws if there are no channels or the channels disagree on the grid.
  void validate() const;
  Tensor3 to_tensor() const;
};

/// Per-channel z-score over all pixels (population standard deviation).
/// Throws std::invalid_argument on a zero-variance channel.
MultiChannelImage standardize(const MultiChannelImage& image);

struct HandcraftedParams {
  double fg_mean = 1.0;
  double bg_mean = 0.0;
  double edge_scale = 1.0;      // gamma
  double edge_sharpness = 1.0;  // eta
  std::size_t channel_index = 0;
};

/// Region terms from squared distance to the reference intensities, edge
/// term gamma / (1 + eta |Sobel I|).
CapacityMaps handcrafted_caps(const MultiChannelImage& image, const HandcraftedParams& params);

/// Euclidean magnitude of the 3x3 Sobel response, replicating edge pixels.
ScalarField sobel_magnitude(const ScalarField& image);

struct NetConfig {
  std::size_t in_channels = 4;
  /// Pairs of (stride-2, stride-1) convolution widths, one pair per block.
  std::vector<std::size_t> down_widths{8, 16, 16, 32, 32, 64};
  std::size_t out_maps = 9;
  double dropout_rate = 0.3;
  std::uint64_t seed = 1;

  std::size_t blocks() const { return down_widths.size() / 2; }
  /// Spatial dimensions must be divisible by this.
  std::size_t size_multiple() const { return std::size_t{1} << blocks(); }
  void validate() const;
};

enum class LayerKind { conv, deconv };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  ConvShape shape;
};

/// Layer sequence: down blocks, up blocks (deconv then conv), final conv.
std::vector<LayerSpec> layer_plan(const NetConfig& cfg);

/// One trainable tensor with its gradient and momentum buffers.
struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<double> momentum;
};

/// Weights and biases in layer_plan order: for each layer, weight then bias.
struct NetParams {
  std::vector<ParamTensor> tensors;

  ParamTensor& weight(std::size_t layer) { return tensors[2 * layer]; }
  ParamTensor& bias(std::size_t layer) { return tensors[2 * layer + 1]; }
  const ParamTensor& weight(std::size_t layer) const { return tensors[2 * layer]; }
  const ParamTensor& bias(std::size_t layer) const { return tensors[2 * layer + 1]; }

  std::size_t parameter_count() const;
  void zero_grad();
};

/// He-normal weights (seeded by cfg.seed), zero biases, zero buffers.
NetParams init_params(const NetConfig& cfg);
/// Zero-valued parameters with the shapes cfg implies.
NetParams zero_params(const NetConfig& cfg);
/// Throws std::invalid_argument if the tensors do not match cfg's shapes.
void check_params(const NetParams& params, const NetConfig& cfg);

/// Activations recorded by forward() for backward().
struct Tape {
  std::size_t layers = 0;
  std::vector<Tensor3> inputs;   // input to each layer
  std::vector<Tensor3> outputs;  // output of each layer (post-activation where applicable)
  std::vector<std::uint8_t> dropout_keep;
  double dropout_scale = 1.0;
  bool training = false;
};

struct ForwardResult {
  std::vector<ScalarField> raw_maps;
  Tape tape;
};

/// Throws std::invalid_argument if the image dimensions are not multiples
/// of cfg.size_multiple() or the channel count disagrees with cfg.
ForwardResult forward(const NetParams& params, const NetConfig& cfg, const MultiChannelImage& image, bool training,
                      std::uint64_t seed);

double softplus(double z);
double sigmoid(double z);

/// Three groups (whole tumor, tumor core, enhancing core) of source, sink
/// and edge capacities.
using CapacityGroups = std::array<CapacityMaps, 3>;

struct HeadOutput {
  CapacityGroups groups;
  /// d capacity / d raw, same layout as the raw maps.
  std::vector<ScalarField> derivative;
};

/// softplus of each raw map; maps 3g..3g+2 feed group g. Needs exactly 9 maps.
HeadOutput capacity_head(const std::vector<ScalarField>& raw_maps);

/// Turns per-group capacity gradients into raw-map gradients.
std::vector<ScalarField> chain_through_head(const HeadOutput& head,
                                            const std::array<const ScalarField*, 9>& capacity_grads);

/// Accumulates parameter gradients into params' grad buffers.
void backward(NetParams& params, const NetConfig& cfg, const Tape& tape, const std::vector<ScalarField>& grad_raw_maps);

struct OptimConfig {
  double learning_rate = 0.002;
  double momentum = 0.9;
  double weight_decay = 1e-6;

  void validate() const;
};

/// g += wd*w; v = mu*v + g; w -= lr*v; then zero g.
void sgd_momentum_step(NetParams& params, const OptimConfig& optim);

}  // namespace flowseg
