#include "flowseg/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowseg/config.hpp"
#include "flowseg/image_io.hpp"
#include "flowseg/levelset.hpp"
#include "flowseg/metrics.hpp"
#include "flowseg/synth.hpp"
#include "flowseg/tensor_io.hpp"

namespace flowseg {

namespace fs = std::filesystem;

namespace {

const std::array<const char*, 3> kMaskNames{"wt", "tc", "ec"};
const std::array<Rgb, 3> kRegionColors{Rgb{255, 64, 64}, Rgb{64, 255, 64}, Rgb{64, 128, 255}};

Tensor scalar_tensor(std::vector<float> values) {
  return Tensor{{static_cast<std::uint32_t>(values.size())}, std::move(values)};
}

std::vector<float> tensor_values(const NamedTensors& t, const std::string& name) {
  return find_tensor(t, name).values;
}

Tensor image_tensor(const MultiChannelImage& img) {
  const GridDomain d = img.domain();
  Tensor t{{static_cast<std::uint32_t>(img.channels.size()), static_cast<std::uint32_t>(d.height),
            static_cast<std::uint32_t>(d.width)},
           {}};
  for (const auto& ch : img.channels) {
    for (double v : ch.values()) t.values.push_back(static_cast<float>(v));
  }
  return t;
}

MultiChannelImage image_from_tensor(const Tensor& t) {
  if (t.dims.size() != 3) throw TensorFileError(TensorFileError::Kind::format, "image needs a [C, H, W] tensor");
  const GridDomain d(t.dims[1], t.dims[2]);
  MultiChannelImage img;
  for (std::size_t c = 0; c < t.dims[0]; ++c) {
    const auto begin = t.values.begin() + static_cast<std::ptrdiff_t>(c * d.size());
    img.channels.emplace_back(d, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(d.size())));
  }
  return img;
}

bool has_tensor(const NamedTensors& t, const std::string& name) {
  return std::any_of(t.begin(), t.end(), [&](const auto& e) { return e.first == name; });
}

std::string format_level(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

RunConfig config_from(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

std::vector<std::pair<Contour, Rgb>> hierarchy_contours(const HierarchyResult& h) {
  std::vector<std::pair<Contour, Rgb>> out;
  for (std::size_t r = 0; r < 3; ++r) out.emplace_back(extract_contour(h.masks[r]), kRegionColors[r]);
  return out;
}

void write_single(const fs::path& dir, const ScalarField& base, const CapacityMaps& caps, const SolverConfig& scfg,
                  double level, std::ostream& out) {
  const SolverResult res = solve(caps, scfg);
  const Mask mask = threshold(res.final_state.lambda, level);
  write_tensor(dir / "lambda.cmf", to_tensor(res.final_state.lambda));
  write_tensor(dir / "mask.cmf", to_tensor(mask));
  write_pgm(dir / "mask.pgm", mask.to_field());
  write_ppm_overlay(dir / "overlay.ppm", base, {{extract_contour(mask), kRegionColors[0]}});
  out << "iterations=" << res.residual_norms.size() << " level=" << level << " foreground=" << mask.count()
      << " residual=" << (res.residual_norms.empty() ? 0.0 : res.residual_norms.back()) << '\n';
}

void write_hierarchy(const fs::path& dir, const std::string& stem, const MultiChannelImage& image,
                     const HierarchyResult& h) {
  save_prediction(dir / (stem + ".cmf"), h);
  write_ppm_overlay(dir / (stem + "_overlay.ppm"), normalize_for_display(image.channels.front()),
                    hierarchy_contours(h));
}

}  // namespace

void save_checkpoint(const fs::path& path, const NetParams& params, const NetConfig& cfg) {
  check_params(params, cfg);
  NamedTensors t;
  t.emplace_back("config.in_channels", scalar_tensor({static_cast<float>(cfg.in_channels)}));
  std::vector<float> widths;
  for (std::size_t w : cfg.down_widths) widths.push_back(static_cast<float>(w));
  t.emplace_back("config.down_widths", scalar_tensor(widths));
  t.emplace_back("config.out_maps", scalar_tensor({static_cast<float>(cfg.out_maps)}));
  t.emplace_back("config.dropout_rate", scalar_tensor({static_cast<float>(cfg.dropout_rate)}));
  std::vector<float> seed;
  for (int k = 0; k < 4; ++k) seed.push_back(static_cast<float>((cfg.seed >> (16 * k)) & 0xFFFF));
  t.emplace_back("config.seed", scalar_tensor(seed));
  for (const auto& p : params.tensors) {
    Tensor x;
    for (std::size_t s : p.shape) x.dims.push_back(static_cast<std::uint32_t>(s));
    for (double v : p.value) x.values.push_back(static_cast<float>(v));
    t.emplace_back(p.name, std::move(x));
  }
  write_tensors(path, t);
}

std::pair<NetParams, NetConfig> load_checkpoint(const fs::path& path) {
  const NamedTensors t = read_tensors(path);
  NetConfig cfg;
  cfg.in_channels = static_cast<std::size_t>(tensor_values(t, "config.in_channels").at(0));
  cfg.down_widths.clear();
  for (float w : tensor_values(t, "config.down_widths")) cfg.down_widths.push_back(static_cast<std::size_t>(w));
  cfg.out_maps = static_cast<std::size_t>(tensor_values(t, "config.out_maps").at(0));
  cfg.dropout_rate = tensor_values(t, "config.dropout_rate").at(0);
  const auto seed = tensor_values(t, "config.seed");
  cfg.seed = 0;
  for (std::size_t k = 0; k < seed.size() && k < 4; ++k) cfg.seed |= static_cast<std::uint64_t>(seed[k]) << (16 * k);
  NetParams params = zero_params(cfg);
  for (auto& p : params.tensors) {
    const Tensor& x = find_tensor(t, p.name);
    if (x.values.size() != p.value.size()) {
      throw TensorFileError(TensorFileError::Kind::format, "checkpoint tensor '" + p.name + "' has the wrong size");
    }
    std::copy(x.values.begin(), x.values.end(), p.value.begin());
  }
  return {std::move(params), cfg};
}

void save_sample(const fs::path& path, const Sample& sample) {
  NamedTensors t;
  t.emplace_back("image", image_tensor(sample.image));
  for (std::size_t r = 0; r < 3; ++r) t.emplace_back(kMaskNames[r], to_tensor(sample.labels[r]));
  write_tensors(path, t);
}

Sample load_sample(const fs::path& path) {
  const NamedTensors t = read_tensors(path);
  Sample s;
  s.image = image_from_tensor(find_tensor(t, "image"));
  for (std::size_t r = 0; r < 3; ++r) s.labels[r] = mask_from_tensor(find_tensor(t, kMaskNames[r]));
  s.validate();
  return s;
}

void save_prediction(const fs::path& path, const HierarchyResult& result) {
  NamedTensors t;
  for (std::size_t r = 0; r < 3; ++r) t.emplace_back(kMaskNames[r], to_tensor(result.masks[r]));
  for (std::size_t r = 0; r < 3; ++r) {
    t.emplace_back(std::string("lambda_") + kMaskNames[r], to_tensor(result.lambda[r]));
  }
  write_tensors(path, t);
}

HierarchyResult load_prediction(const fs::path& path) {
  const NamedTensors t = read_tensors(path);
  HierarchyResult h;
  for (std::size_t r = 0; r < 3; ++r) {
    h.masks[r] = mask_from_tensor(find_tensor(t, kMaskNames[r]));
    const std::string lname = std::string("lambda_") + kMaskNames[r];
    h.lambda[r] = has_tensor(t, lname) ? field_from_tensor(find_tensor(t, lname)) : h.masks[r].to_field();
  }
  return h;
}

std::vector<fs::path> list_tensor_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".cmf") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous max-flow segmentation with learned capacities"};
  app.require_subcommand(1);
  std::string config_path;

  auto* infer = app.add_subcommand("infer", "Solve from capacities, an image, or a trained network");
  std::string caps_path, image_path, checkpoint_path, data_dir, out_dir;
  infer->add_option("--caps", caps_path, "Capacity tensor [3, H, W]")->check(CLI::ExistingFile);
  infer->add_option("--image", image_path, "P5 PGM or sample/image tensor file")->check(CLI::ExistingFile);
  infer->add_option("--checkpoint", checkpoint_path, "Network checkpoint")->check(CLI::ExistingFile);
  infer->add_option("--data", data_dir, "Directory of sample files (with --checkpoint)")->check(CLI::ExistingDirectory);
  infer->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  infer->add_option("--out", out_dir, "Output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the capacity network");
  std::string train_ckpt;
  train_cmd->add_option("--data", data_dir, "Directory of sample files")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  train_cmd->add_option("--checkpoint", train_ckpt, "Checkpoint output path")->required();

  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  std::string pred_dir, truth_dir, report_path;
  eval->add_option("--pred", pred_dir, "Prediction directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--truth", truth_dir, "Ground-truth sample directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  eval->add_option("--out", report_path, "Report file (default <pred>/metrics.json)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Overlay contours over iterations and levels");
  std::vector<int> iters{1, 5, 10, 15};
  std::vector<double> levels{0.3, 0.5};
  std::string base_path;
  sweep_cmd->add_option("--caps", caps_path, "Capacity tensor [3, H, W]")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--iters", iters, "Iteration checkpoints")->delimiter(',');
  sweep_cmd->add_option("--levels", levels, "Threshold levels")->delimiter(',');
  sweep_cmd->add_option("--image", base_path, "P5 PGM drawn under the contours")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic dataset");
  gen->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* grad = app.add_subcommand("gradcheck", "Run the finite-difference gradient suites");
  grad->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    const RunConfig cfg = config_from(config_path);
    const SolverConfig& scfg = cfg.train.solver;
    const double level = cfg.train.level;

    if (infer->parsed()) {
      const int sources = !caps_path.empty() + !image_path.empty() + !data_dir.empty();
      if (sources != 1) {
        err << "error: infer needs exactly one of --caps, --image, --data\n\n" << infer->help();
        return 1;
      }
      if (!data_dir.empty() && checkpoint_path.empty()) {
        err << "error: --data needs --checkpoint\n\n" << infer->help();
        return 1;
      }
      fs::create_directories(out_dir);
      if (!caps_path.empty()) {
        const CapacityMaps caps = caps_from_tensor(read_tensor(caps_path));
        write_single(out_dir, normalize_for_display(caps.source), caps, scfg, level, out);
        return 0;
      }
      if (!data_dir.empty()) {
        const auto [params, net] = load_checkpoint(checkpoint_path);
        const auto files = list_tensor_files(data_dir);
        for (const auto& f : files) {
          const Sample s = load_sample(f);
          const MultiChannelImage img = standardize(s.image);
          write_hierarchy(out_dir, f.stem().string(), img,
                          infer_full(params, net, img, scfg, level, cfg.train.nest_by_masking));
        }
        out << "iterations=" << scfg.iterations << " level=" << level << " predictions=" << files.size() << '\n';
        return 0;
      }
      MultiChannelImage img;
      if (fs::path(image_path).extension() == ".pgm") {
        img.channels.push_back(read_pgm(image_path));
      } else {
        const NamedTensors t = read_tensors(image_path);
        img = image_from_tensor(has_tensor(t, "image") ? find_tensor(t, "image") : t.front().second);
      }
      if (!checkpoint_path.empty()) {
        const auto [params, net] = load_checkpoint(checkpoint_path);
        img = standardize(img);
        write_hierarchy(out_dir, "prediction", img, infer_full(params, net, img, scfg, level, cfg.train.nest_by_masking));
        out << "iterations=" << scfg.iterations << " level=" << level << " predictions=1\n";
        return 0;
      }
      write_single(out_dir, normalize_for_display(img.channels.at(cfg.handcrafted.channel_index)),
                   handcrafted_caps(img, cfg.handcrafted), scfg, level, out);
      return 0;
    }

    if (train_cmd->parsed()) {
      std::vector<Sample> data;
      for (const auto& f : list_tensor_files(data_dir)) data.push_back(load_sample(f));
      if (data.empty()) throw std::runtime_error("no sample files in " + data_dir);
      const auto [train_set, val_set] = split(data, cfg.train_fraction, cfg.split_seed);
      NetParams params = init_params(cfg.net);
      const fs::path ckpt(train_ckpt);
      if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
      std::ofstream log(ckpt.string() + ".log");
      out << "train=" << train_set.size() << " validation=" << val_set.size()
          << " parameters=" << params.parameter_count() << '\n';
      const auto on_epoch = [&](int epoch, const TrainStats& st) {
        std::ostringstream line;
        const auto& d = st.validation_dice.back();
        line << "epoch=" << epoch + 1 << " total=" << st.total_loss.back() << " flow=" << st.flow_loss.back()
             << " energy=" << st.energy_loss.back() << " dice_wt=" << d[0] << " dice_tc=" << d[1]
             << " dice_ec=" << d[2] << " seconds=" << st.epoch_seconds.back() << '\n';
        out << line.str() << std::flush;
        log << line.str() << std::flush;
        if ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.train.epochs) {
          save_checkpoint(ckpt, params, cfg.net);
        }
      };
      train(params, cfg.net, train_set, val_set, cfg.train, on_epoch);
      return 0;
    }

    if (eval->parsed()) {
      std::vector<HierarchyResult> preds;
      std::vector<Sample> truths;
      for (const auto& f : list_tensor_files(truth_dir)) {
        const fs::path p = fs::path(pred_dir) / f.filename();
        if (!fs::exists(p)) throw std::runtime_error("missing prediction " + p.string());
        truths.push_back(load_sample(f));
        preds.push_back(load_prediction(p));
      }
      const MetricReport report = evaluate_dataset(preds, truths, cfg.hausdorff);
      out << format_report(report);
      nlohmann::json doc;
      doc["samples"] = truths.size();
      doc["hausdorff_variant"] = to_string(report.variant);
      for (std::size_t r = 0; r < 3; ++r) {
        const RegionReport& rr = report.regions[r];
        auto agg = [](const Aggregate& a) {
          return nlohmann::json{{"mean", a.mean}, {"std", a.stddev}, {"median", a.median},
                                {"q25", a.q25},   {"q75", a.q75},    {"count", a.count}};
        };
        doc[kMaskNames[r]] = {{"dice", agg(rr.dice)},
                              {"sensitivity", agg(rr.sensitivity)},
                              {"specificity", agg(rr.specificity)},
                              {"hausdorff", agg(rr.hausdorff)},
                              {"hausdorff_excluded", rr.hausdorff_excluded}};
      }
      const fs::path rp = report_path.empty() ? fs::path(pred_dir) / "metrics.json" : fs::path(report_path);
      std::ofstream(rp) << doc.dump(2) << '\n';
      return 0;
    }

    if (sweep_cmd->parsed()) {
      const CapacityMaps caps = caps_from_tensor(read_tensor(caps_path));
      const ScalarField base = base_path.empty() ? normalize_for_display(caps.source) : read_pgm(base_path);
      require_same_domain(base.domain(), caps.domain(), "sweep base image");
      SolverConfig sc = scfg;
      sc.iterations = std::max(sc.iterations, iters.empty() ? 1 : *std::max_element(iters.begin(), iters.end()));
      std::sort(iters.begin(), iters.end());
      fs::create_directories(out_dir);
      const auto entries = sweep(caps, sc, iters, levels);
      for (const auto& e : entries) {
        const fs::path p = fs::path(out_dir) / ("sweep_iter" + std::to_string(e.iteration) + "_level" +
                                                format_level(e.level) + ".ppm");
        write_ppm_overlay(p, base, {{extract_contour(e.mask), kRegionColors[0]}});
      }
      out << "overlays=" << entries.size() << '\n';
      return 0;
    }

    if (gen->parsed()) {
      fs::create_directories(out_dir);
      const auto data = generate(cfg.synth);
      for (std::size_t i = 0; i < data.size(); ++i) {
        std::ostringstream name;
        name << "sample_" << std::setw(4) << std::setfill('0') << i << ".cmf";
        save_sample(fs::path(out_dir) / name.str(), data[i]);
      }
      out << "samples=" << data.size() << '\n';
      return 0;
    }

    if (grad->parsed()) {
      bool ok = true;
      for (const auto& r : run_gradchecks(cfg.gradcheck)) {
        out << r.name << ": max_error=" << r.max_error << " tolerance=" << r.tolerance << " instances=" << r.instances
            << " coordinates=" << r.coordinates << (r.passed() ? " PASS" : " FAIL") << '\n';
        ok = ok && r.passed();
      }
      return ok ? 0 : 2;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace flowseg
