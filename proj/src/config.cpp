#include "flowseg/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace flowseg {

using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& root, const char* name) : name_(name) {
    if (root.contains(name)) {
      node_ = &root.at(name);
      if (!node_->is_object()) throw ConfigError(std::string("section '") + name + "' must be an object");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    known_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      out = node_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  template <typename T, typename Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string text;
    get(key, text);
    if (text.empty()) return;
    try {
      out = parse(text);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [key, value] : node_->items()) {
      if (!known_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> known_;
};

const std::set<std::string> kSections{"solver", "inference", "net",  "optim", "loss",     "train",
                                      "synth",  "handcrafted", "eval", "gradcheck"};

}  // namespace

void RunConfig::validate() const {
  try {
    train.validate();
    net.validate();
    synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train.train_fraction must be in (0, 1)");
  if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be at least 1");
  if (!(handcrafted.edge_scale > 0.0)) throw ConfigError("handcrafted.edge_scale must be positive");
  if (!(handcrafted.edge_sharpness >= 0.0)) throw ConfigError("handcrafted.edge_sharpness must be non-negative");
  if (gradcheck.instances < 1 || gradcheck.size < 2) throw ConfigError("gradcheck needs instances >= 1 and size >= 2");
  if (!(gradcheck.step > 0.0)) throw ConfigError("gradcheck.step must be positive");
}

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : root.items()) {
    if (!kSections.count(key)) throw ConfigError("unknown section '" + key + "'");
  }

  RunConfig cfg;
  TrainConfig& t = cfg.train;

  Section solver(root, "solver");
  solver.get("step_size", t.solver.step_size);
  solver.get("penalty", t.solver.penalty);
  solver.get("iterations", t.solver.iterations);
  solver.get_enum("tv_mode", t.solver.tv_mode, parse_tv_mode);
  solver.get("residual_tolerance", t.solver.residual_tolerance);
  solver.finish();

  Section inference(root, "inference");
  inference.get("level", t.level);
  inference.get("nest_by_masking", t.nest_by_masking);
  inference.finish();

  Section net(root, "net");
  net.get("in_channels", cfg.net.in_channels);
  net.get("down_widths", cfg.net.down_widths);
  net.get("out_maps", cfg.net.out_maps);
  net.get("dropout_rate", cfg.net.dropout_rate);
  net.get("seed", cfg.net.seed);
  net.finish();

  Section optim(root, "optim");
  optim.get("learning_rate", t.optim.learning_rate);
  optim.get("momentum", t.optim.momentum);
  optim.get("weight_decay", t.optim.weight_decay);
  optim.finish();

  Section loss(root, "loss");
  loss.get("huber_delta", t.huber.delta);
  loss.get_enum("flow_form", t.loss_form, parse_flow_loss_form);
  loss.get_enum("energy_reference", t.energy_reference, parse_energy_reference);
  loss.get("normalize_energy", t.normalize_energy);
  loss.get("use_flow", t.use_flow_loss);
  loss.get("use_energy", t.use_energy_loss);
  loss.finish();

  Section train(root, "train");
  train.get("epochs", t.epochs);
  train.get("shuffle_seed", t.shuffle_seed);
  train.get("train_fraction", cfg.train_fraction);
  train.get("split_seed", cfg.split_seed);
  train.get("checkpoint_every", cfg.checkpoint_every);
  train.finish();

  Section synth(root, "synth");
  SynthConfig& s = cfg.synth;
  synth.get("count", s.count);
  synth.get("height", s.height);
  synth.get("width", s.width);
  synth.get("noise_sigma", s.noise_sigma);
  synth.get("intensities", s.intensities);
  synth.get("center_min", s.center_min);
  synth.get("center_max", s.center_max);
  synth.get("axis_min", s.axis_min);
  synth.get("axis_max", s.axis_max);
  synth.get("core_scale", s.core_scale);
  synth.get("enhancing_scale", s.enhancing_scale);
  synth.get("standardize", s.standardize);
  synth.get("seed", s.seed);
  synth.finish();

  Section hand(root, "handcrafted");
  hand.get("fg_mean", cfg.handcrafted.fg_mean);
  hand.get("bg_mean", cfg.handcrafted.bg_mean);
  hand.get("edge_scale", cfg.handcrafted.edge_scale);
  hand.get("edge_sharpness", cfg.handcrafted.edge_sharpness);
  hand.get("channel_index", cfg.handcrafted.channel_index);
  hand.finish();

  Section eval(root, "eval");
  eval.get_enum("hausdorff", cfg.hausdorff, parse_hausdorff_variant);
  eval.finish();

  Section gc(root, "gradcheck");
  gc.get("instances", cfg.gradcheck.instances);
  gc.get("size", cfg.gradcheck.size);
  gc.get("seed", cfg.gradcheck.seed);
  gc.get("step", cfg.gradcheck.step);
  gc.get("loss_tolerance", cfg.gradcheck.loss_tolerance);
  gc.get("network_tolerance", cfg.gradcheck.network_tolerance);
  gc.get("adjoint_tolerance", cfg.gradcheck.adjoint_tolerance);
  gc.finish();

  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  const SynthConfig& s = cfg.synth;
  json root;
  root["solver"] = {{"step_size", t.solver.step_size},
                    {"penalty", t.solver.penalty},
                    {"iterations", t.solver.iterations},
                    {"tv_mode", to_string(t.solver.tv_mode)},
                    {"residual_tolerance", t.solver.residual_tolerance}};
  root["inference"] = {{"level", t.level}, {"nest_by_masking", t.nest_by_masking}};
  root["net"] = {{"in_channels", cfg.net.in_channels},
                 {"down_widths", cfg.net.down_widths},
                 {"out_maps", cfg.net.out_maps},
                 {"dropout_rate", cfg.net.dropout_rate},
                 {"seed", cfg.net.seed}};
  root["optim"] = {{"learning_rate", t.optim.learning_rate},
                   {"momentum", t.optim.momentum},
                   {"weight_decay", t.optim.weight_decay}};
  root["loss"] = {{"huber_delta", t.huber.delta},
                  {"flow_form", to_string(t.loss_form)},
                  {"energy_reference", to_string(t.energy_reference)},
                  {"normalize_energy", t.normalize_energy},
                  {"use_flow", t.use_flow_loss},
                  {"use_energy", t.use_energy_loss}};
  root["train"] = {{"epochs", t.epochs},
                   {"shuffle_seed", t.shuffle_seed},
                   {"train_fraction", cfg.train_fraction},
                   {"split_seed", cfg.split_seed},
                   {"checkpoint_every", cfg.checkpoint_every}};
  root["synth"] = {{"count", s.count},
                   {"height", s.height},
                   {"width", s.width},
                   {"noise_sigma", s.noise_sigma},
                   {"intensities", s.intensities},
                   {"center_min", s.center_min},
                   {"center_max", s.center_max},
                   {"axis_min", s.axis_min},
                   {"axis_max", s.axis_max},
                   {"core_scale", s.core_scale},
                   {"enhancing_scale", s.enhancing_scale},
                   {"standardize", s.standardize},
                   {"seed", s.seed}};
  root["handcrafted"] = {{"fg_mean", cfg.handcrafted.fg_mean},
                         {"bg_mean", cfg.handcrafted.bg_mean},
                         {"edge_scale", cfg.handcrafted.edge_scale},
                         {"edge_sharpness", cfg.handcrafted.edge_sharpness},
                         {"channel_index", cfg.handcrafted.channel_index}};
  root["eval"] = {{"hausdorff", to_string(cfg.hausdorff)}};
  root["gradcheck"] = {{"instances", cfg.gradcheck.instances},
                       {"size", cfg.gradcheck.size},
                       {"seed", cfg.gradcheck.seed},
                       {"step", cfg.gradcheck.step},
                       {"loss_tolerance", cfg.gradcheck.loss_tolerance},
                       {"network_tolerance", cfg.gradcheck.network_tolerance},
                       {"adjoint_tolerance", cfg.gradcheck.adjoint_tolerance}};
  return root.dump(2);
}

}  // namespace flowseg
