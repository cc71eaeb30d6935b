#include "flowseg/capnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace flowseg {

void MultiChannelImage::validate() const {
  if (channels.empty()) throw std::invalid_argument("image has no channels");
  for (const auto& ch : channels) require_same_domain(ch.domain(), channels.front().domain(), "image channels");
}

Tensor3 MultiChannelImage::to_tensor() const {
  validate();
  const GridDomain& d = domain();
  Tensor3 t(channels.size(), d.height, d.width);
  for (std::size_t c = 0; c < channels.size(); ++c) std::copy_n(channels[c].data(), d.size(), t.channel(c));
  return t;
}

MultiChannelImage standardize(const MultiChannelImage& image) {
  image.validate();
  MultiChannelImage out = image;
  for (std::size_t c = 0; c < out.channels.size(); ++c) {
    ScalarField& ch = out.channels[c];
    const double n = static_cast<double>(ch.size());
    const double mean = sum(ch) / n;
    double var = 0.0;
    for (double v : ch.values()) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    if (!(sd > 0.0)) throw std::invalid_argument("channel " + std::to_string(c) + " has zero variance");
    for (double& v : ch.values()) v = (v - mean) / sd;
  }
  out.standardized = true;
  return out;
}

ScalarField sobel_magnitude(const ScalarField& image) {
  const GridDomain d = image.domain();
  ScalarField out(d);
  const auto px = [&](long r, long c) {
    r = std::clamp(r, 0L, static_cast<long>(d.height) - 1);
    c = std::clamp(c, 0L, static_cast<long>(d.width) - 1);
    return image.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
#pragma omp parallel for schedule(static)
  for (long r = 0; r < static_cast<long>(d.height); ++r) {
    for (long c = 0; c < static_cast<long>(d.width); ++c) {
      const double gx = (px(r - 1, c + 1) + 2 * px(r, c + 1) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2 * px(r, c - 1) + px(r + 1, c - 1));
      const double gy = (px(r + 1, c - 1) + 2 * px(r + 1, c) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2 * px(r - 1, c) + px(r - 1, c + 1));
      out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

CapacityMaps handcrafted_caps(const MultiChannelImage& image, const HandcraftedParams& params) {
  image.validate();
  if (params.channel_index >= image.channels.size()) throw std::invalid_argument("channel_index out of range");
  if (!(params.edge_scale > 0.0)) throw std::invalid_argument("edge_scale must be positive");
  if (!(params.edge_sharpness >= 0.0)) throw std::invalid_argument("edge_sharpness must be non-negative");
  const ScalarField& img = image.channels[params.channel_index];
  const GridDomain d = img.domain();
  const ScalarField sobel = sobel_magnitude(img);
  CapacityMaps caps{ScalarField(d), ScalarField(d), ScalarField(d)};
  for (std::size_t i = 0; i < d.size(); ++i) {
    caps.source[i] = (img[i] - params.bg_mean) * (img[i] - params.bg_mean);
    caps.sink[i] = (img[i] - params.fg_mean) * (img[i] - params.fg_mean);
    caps.edge[i] = params.edge_scale / (1.0 + params.edge_sharpness * sobel[i]);
  }
  return caps;
}

void NetConfig::validate() const {
  if (in_channels == 0) throw std::invalid_argument("in_channels must be positive");
  if (down_widths.empty() || down_widths.size() % 2 != 0) {
    throw std::invalid_argument("down_widths must hold a positive, even number of entries");
  }
  if (std::find(down_widths.begin(), down_widths.end(), std::size_t{0}) != down_widths.end()) {
    throw std::invalid_argument("down_widths entries must be positive");
  }
  if (out_maps == 0 || out_maps % 3 != 0) throw std::invalid_argument("out_maps must be a positive multiple of 3");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("dropout_rate must be in [0, 1)");
}

std::vector<LayerSpec> layer_plan(const NetConfig& cfg) {
  cfg.validate();
  const auto& w = cfg.down_widths;
  const std::size_t blocks = cfg.blocks();
  std::vector<LayerSpec> plan;
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t in = b == 0 ? cfg.in_channels : w[2 * b - 1];
    plan.push_back({"down" + std::to_string(b) + "a", LayerKind::conv, {in, w[2 * b], 3, 2, 1, 0}});
    plan.push_back({"down" + std::to_string(b) + "b", LayerKind::conv, {w[2 * b], w[2 * b + 1], 3, 1, 1, 0}});
  }
  std::size_t h = w.back();
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::size_t level = blocks - 1 - i;
    const std::size_t out = level == 0 ? w[0] : w[2 * level - 1];
    const std::size_t skip = level == 0 ? cfg.in_channels : w[2 * level - 1];
    plan.push_back({"up" + std::to_string(i) + "t", LayerKind::deconv, {h, out, 5, 2, 2, 1}});
    plan.push_back({"up" + std::to_string(i) + "c", LayerKind::conv, {out + skip, out, 3, 1, 1, 0}});
    h = out;
  }
  plan.push_back({"final", LayerKind::conv, {h, cfg.out_maps, 3, 1, 1, 0}});
  return plan;
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.value.size();
  return n;
}

void NetParams::zero_grad() {
  for (auto& t : tensors) std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

namespace {

ParamTensor make_tensor(std::string name, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return ParamTensor{std::move(name), std::move(shape), std::vector<double>(n), std::vector<double>(n),
                     std::vector<double>(n)};
}

std::vector<std::size_t> weight_shape(const LayerSpec& l) {
  const auto& s = l.shape;
  if (l.kind == LayerKind::conv) return {s.out_channels, s.in_channels, s.kernel, s.kernel};
  return {s.in_channels, s.out_channels, s.kernel, s.kernel};
}

}  // namespace

NetParams zero_params(const NetConfig& cfg) {
  NetParams p;
  for (const auto& l : layer_plan(cfg)) {
    p.tensors.push_back(make_tensor(l.name + ".weight", weight_shape(l)));
    p.tensors.push_back(make_tensor(l.name + ".bias", {l.shape.out_channels}));
  }
  return p;
}

NetParams init_params(const NetConfig& cfg) {
  NetParams p = zero_params(cfg);
  std::mt19937_64 rng(cfg.seed);
  const auto plan = layer_plan(cfg);
  for (std::size_t l = 0; l < plan.size(); ++l) {
    const auto& shape = p.weight(l).shape;
    const double fan_in = static_cast<double>(shape[1] * shape[2] * shape[3]);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    for (double& v : p.weight(l).value) v = normal(rng);
  }
  return p;
}

void check_params(const NetParams& params, const NetConfig& cfg) {
  const NetParams expected = zero_params(cfg);
  if (params.tensors.size() != expected.tensors.size()) {
    throw std::invalid_argument("expected " + std::to_string(expected.tensors.size()) + " parameter tensors, got " +
                                std::to_string(params.tensors.size()));
  }
  for (std::size_t i = 0; i < expected.tensors.size(); ++i) {
    const auto& a = params.tensors[i];
    const auto& e = expected.tensors[i];
    if (a.name != e.name || a.shape != e.shape || a.value.size() != e.value.size() ||
        a.grad.size() != e.value.size() || a.momentum.size() != e.value.size()) {
      throw std::invalid_argument("parameter tensor '" + a.name + "' does not match expected '" + e.name + "'");
    }
  }
}

namespace {

void relu_inplace(Tensor3& t) {
  for (double& v : t.data) v = std::max(v, 0.0);
}

Tensor3 concat(const Tensor3& a, const Tensor3& b) {
  Tensor3 out(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return out;
}

Tensor3 apply_layer(const LayerSpec& l, const NetParams& params, std::size_t index, const Tensor3& in) {
  const auto& w = params.weight(index).value;
  const auto& b = params.bias(index).value;
  return l.kind == LayerKind::conv ? conv2d_forward(in, w, b, l.shape) : deconv2d_forward(in, w, b, l.shape);
}

void layer_backward(const LayerSpec& l, NetParams& params, std::size_t index, const Tensor3& in,
                    const Tensor3& grad_out, Tensor3* grad_in) {
  auto& w = params.weight(index);
  auto& b = params.bias(index);
  if (l.kind == LayerKind::conv) {
    conv2d_backward(in, grad_out, w.value, l.shape, grad_in, w.grad, b.grad);
  } else {
    deconv2d_backward(in, grad_out, w.value, l.shape, grad_in, w.grad, b.grad);
  }
}

void relu_mask(Tensor3& grad, const Tensor3& output) {
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (!(output.data[i] > 0.0)) grad.data[i] = 0.0;
  }
}

}  // namespace

ForwardResult forward(const NetParams& params, const NetConfig& cfg, const MultiChannelImage& image, bool training,
                      std::uint64_t seed) {
  const auto plan = layer_plan(cfg);
  check_params(params, cfg);
  image.validate();
  if (image.channels.size() != cfg.in_channels) {
    throw std::invalid_argument("network expects " + std::to_string(cfg.in_channels) + " channels, image has " +
                                std::to_string(image.channels.size()));
  }
  const GridDomain d = image.domain();
  const std::size_t m = cfg.size_multiple();
  if (d.height % m != 0 || d.width % m != 0) {
    throw std::invalid_argument("image " + to_string(d) + " must have dimensions divisible by " + std::to_string(m));
  }

  const std::size_t blocks = cfg.blocks();
  ForwardResult res;
  Tape& tape = res.tape;
  tape.layers = plan.size();
  tape.inputs.resize(plan.size());
  tape.outputs.resize(plan.size());
  tape.training = training;

  std::vector<Tensor3> skips{image.to_tensor()};
  Tensor3 h = skips.front();
  for (std::size_t l = 0; l < 2 * blocks; ++l) {
    tape.inputs[l] = h;
    h = apply_layer(plan[l], params, l, h);
    relu_inplace(h);
    tape.outputs[l] = h;
    if (l % 2 == 1) skips.push_back(h);
  }
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::size_t t = 2 * blocks + 2 * i;
    tape.inputs[t] = h;
    h = apply_layer(plan[t], params, t, h);
    relu_inplace(h);
    tape.outputs[t] = h;
    h = concat(h, skips[blocks - 1 - i]);
    tape.inputs[t + 1] = h;
    h = apply_layer(plan[t + 1], params, t + 1, h);
    relu_inplace(h);
    tape.outputs[t + 1] = h;
  }

  if (training && cfg.dropout_rate > 0.0) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(1.0 - cfg.dropout_rate);
    tape.dropout_scale = 1.0 / (1.0 - cfg.dropout_rate);
    tape.dropout_keep.resize(h.data.size());
    for (std::size_t i = 0; i < h.data.size(); ++i) {
      tape.dropout_keep[i] = keep(rng) ? 1 : 0;
      h.data[i] = tape.dropout_keep[i] ? h.data[i] * tape.dropout_scale : 0.0;
    }
  }

  const std::size_t f = plan.size() - 1;
  tape.inputs[f] = h;
  Tensor3 out = apply_layer(plan[f], params, f, h);
  tape.outputs[f] = out;
  for (std::size_t c = 0; c < out.channels; ++c) {
    res.raw_maps.emplace_back(d, std::vector<double>(out.channel(c), out.channel(c) + out.plane()));
  }
  return res;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

HeadOutput capacity_head(const std::vector<ScalarField>& raw_maps) {
  if (raw_maps.size() != 9) {
    throw std::invalid_argument("capacity head needs 9 raw maps, got " + std::to_string(raw_maps.size()));
  }
  const GridDomain d = raw_maps.front().domain();
  std::vector<ScalarField> values;
  HeadOutput out;
  for (const auto& raw : raw_maps) {
    require_same_domain(raw.domain(), d, "raw maps");
    ScalarField v(d);
    ScalarField dv(d);
    for (std::size_t i = 0; i < d.size(); ++i) {
      v[i] = softplus(raw[i]);
      dv[i] = sigmoid(raw[i]);
    }
    values.push_back(std::move(v));
    out.derivative.push_back(std::move(dv));
  }
  for (std::size_t g = 0; g < 3; ++g) {
    out.groups[g] = CapacityMaps{values[3 * g], values[3 * g + 1], values[3 * g + 2]};
  }
  return out;
}

std::vector<ScalarField> chain_through_head(const HeadOutput& head,
                                            const std::array<const ScalarField*, 9>& capacity_grads) {
  std::vector<ScalarField> out;
  for (std::size_t m = 0; m < 9; ++m) {
    const ScalarField& dv = head.derivative[m];
    ScalarField g(dv.domain());
    if (capacity_grads[m]) {
      require_same_domain(capacity_grads[m]->domain(), dv.domain(), "capacity gradient");
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = (*capacity_grads[m])[i] * dv[i];
    }
    out.push_back(std::move(g));
  }
  return out;
}

void backward(NetParams& params, const NetConfig& cfg, const Tape& tape, const std::vector<ScalarField>& grad_raw_maps) {
  const auto plan = layer_plan(cfg);
  if (tape.layers != plan.size()) throw std::invalid_argument("tape does not match network");
  const std::size_t blocks = cfg.blocks();
  const std::size_t f = plan.size() - 1;
  const Tensor3& out = tape.outputs[f];
  if (grad_raw_maps.size() != out.channels) throw std::invalid_argument("gradient map count mismatch");

  Tensor3 g_out(out.channels, out.height, out.width);
  for (std::size_t c = 0; c < out.channels; ++c) {
    if (grad_raw_maps[c].size() != out.plane()) throw std::invalid_argument("gradient map size mismatch");
    std::copy_n(grad_raw_maps[c].data(), out.plane(), g_out.channel(c));
  }

  const Tensor3& fin = tape.inputs[f];
  Tensor3 g(fin.channels, fin.height, fin.width);
  layer_backward(plan[f], params, f, fin, g_out, &g);
  if (!tape.dropout_keep.empty()) {
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = tape.dropout_keep[i] ? g.data[i] * tape.dropout_scale : 0.0;
  }

  std::vector<Tensor3> skip_grads(blocks + 1);
  for (std::size_t i = blocks; i-- > 0;) {
    const std::size_t t = 2 * blocks + 2 * i;
    relu_mask(g, tape.outputs[t + 1]);
    const Tensor3& cat_in = tape.inputs[t + 1];
    Tensor3 g_cat(cat_in.channels, cat_in.height, cat_in.width);
    layer_backward(plan[t + 1], params, t + 1, cat_in, g, &g_cat);

    const Tensor3& up = tape.outputs[t];
    Tensor3 g_up(up.channels, up.height, up.width);
    std::copy_n(g_cat.data.begin(), g_up.data.size(), g_up.data.begin());
    const std::size_t level = blocks - 1 - i;
    if (level > 0) {
      Tensor3& sg = skip_grads[level];
      if (sg.data.empty()) sg = Tensor3(cat_in.channels - up.channels, up.height, up.width);
      for (std::size_t k = 0; k < sg.data.size(); ++k) sg.data[k] += g_cat.data[g_up.data.size() + k];
    }

    relu_mask(g_up, up);
    const Tensor3& t_in = tape.inputs[t];
    g = Tensor3(t_in.channels, t_in.height, t_in.width);
    layer_backward(plan[t], params, t, t_in, g_up, &g);
  }

  for (std::size_t b = blocks; b-- > 0;) {
    const Tensor3& sg = skip_grads[b + 1];
    for (std::size_t k = 0; k < sg.data.size(); ++k) g.data[k] += sg.data[k];
    for (std::size_t l : {2 * b + 1, 2 * b}) {
      relu_mask(g, tape.outputs[l]);
      const Tensor3& in = tape.inputs[l];
      if (l == 0) {
        layer_backward(plan[l], params, l, in, g, nullptr);
      } else {
        Tensor3 g_in(in.channels, in.height, in.width);
        layer_backward(plan[l], params, l, in, g, &g_in);
        g = std::move(g_in);
      }
    }
  }
}

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw std::invalid_argument("weight_decay must be non-negative");
}

void sgd_momentum_step(NetParams& params, const OptimConfig& optim) {
  for (auto& t : params.tensors) {
    for (std::size_t i = 0; i < t.value.size(); ++i) {
      const double g = t.grad[i] + optim.weight_decay * t.value[i];
      t.momentum[i] = optim.momentum * t.momentum[i] + g;
      t.value[i] -= optim.learning_rate * t.momentum[i];
      t.grad[i] = 0.0;
    }
  }
}

}  // namespace flowseg
