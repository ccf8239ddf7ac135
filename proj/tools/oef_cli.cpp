// Command-line front end: synth, train, calibrate, detect, eval, visualize.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oef/bench.hpp"
#include "oef/config.hpp"
#include "oef/dataset.hpp"
#include "oef/errors.hpp"
#include "oef/image_io.hpp"
#include "oef/parallel.hpp"
#include "oef/pipeline.hpp"
#include "oef/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitConfig = 4;

// Strength maps are stored as 16-bit PNGs whose full scale is 4 p^2. A pixel
// is covered by p^2 patches, and sharpened masks can touch it more than once.
double full_scale(const oef::PipelineConfig& cfg) {
  return 4.0 * cfg.labels.patch_size * cfg.labels.patch_size;
}

oef::PipelineConfig load_or_default(const std::string& path) {
  return path.empty() ? oef::PipelineConfig{} : oef::load_config(path);
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::stringstream is(item);
    T v{};
    if (!(is >> v)) throw oef::ConfigError("cannot parse list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

struct Common {
  std::string config;
  int threads = oef::default_threads();
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "Pipeline config (JSON); defaults when omitted");
  app->add_option("-j,--threads", c.threads, "Worker threads (env OEF_THREADS)")
      ->check(CLI::PositiveNumber);
}

int cmd_synth(const Common& c, const std::string& out, int n_train, int n_val, int n_test,
              long long seed) {
  const oef::PipelineConfig cfg = load_or_default(c.config);
  oef::SynthDatasetSpec spec{n_train, n_val, n_test, static_cast<std::uint64_t>(seed)};
  const int n = oef::write_synthetic_dataset(out, spec, cfg.synth);
  std::cout << "wrote " << n << " examples to " << out << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& data, const std::string& model) {
  const oef::PipelineConfig cfg = load_or_default(c.config);
  const fs::path split = fs::exists(fs::path(data) / "train") ? fs::path(data) / "train" : fs::path(data);
  const auto examples = oef::load_split(split);
  oef::TrainReport report;
  const auto t0 = std::chrono::steady_clock::now();
  const oef::Forest forest = oef::train_model(examples, cfg, c.threads, &report);
  oef::save_forest(forest, model, {cfg.training.store_posteriors});
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("examples %zu\npatches %lld (draws %lld)\n", examples.size(),
              static_cast<long long>(report.patches), static_cast<long long>(report.draws));
  std::printf("groundtruth %.2fs channels %.2fs sampling %.2fs\n", report.groundtruth_seconds,
              report.channel_seconds, report.sampling_seconds);
  for (size_t t = 0; t < report.trees.size(); ++t) {
    const auto& r = report.trees[t];
    std::printf("tree %zu: %.2fs nodes %zu leaves %zu depth %d samples %zu\n", t, r.seconds, r.nodes,
                r.leaves, r.depth, r.samples);
  }
  std::printf("total %.2fs peak_rss %ld kB\nmodel %s (%zu bytes)\n", total, oef::peak_rss_kb(),
              model.c_str(), static_cast<size_t>(fs::file_size(model)));
  return 0;
}

int cmd_calibrate(const Common& c, const std::string& model, const std::string& val,
                  const std::string& out) {
  oef::PipelineConfig cfg = load_or_default(c.config);
  const oef::Forest forest = oef::load_forest(model);
  forest.check_compatible(cfg.labels);
  const fs::path split = fs::exists(fs::path(val) / "val") ? fs::path(val) / "val" : fs::path(val);
  const auto examples = oef::load_split(split);
  cfg.detection.pyramid.beta = oef::fit_pyramid_betas(forest, examples, cfg, c.threads);
  for (size_t s = 0; s < cfg.detection.pyramid.scales.size(); ++s)
    std::printf("scale %g beta %.4f\n", cfg.detection.pyramid.scales[s], cfg.detection.pyramid.beta[s]);
  oef::save_config(cfg, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

struct DetectFlags {
  std::string mode, scales, sharpen;
  bool no_calib = false, naive = false, collapsed = false, no_align = false;
};

int cmd_detect(const Common& c, const std::string& model, const std::string& input,
               const std::string& out, const DetectFlags& flags) {
  oef::PipelineConfig cfg = load_or_default(c.config);
  if (!flags.mode.empty()) cfg.detection.mode = oef::parse_fusion_mode(flags.mode);
  if (flags.no_calib) cfg.detection.calibration = oef::CalibrationMode::kNone;
  if (flags.naive) cfg.detection.collapsed = false;
  if (flags.collapsed) cfg.detection.collapsed = true;
  if (flags.no_align) cfg.detection.align_scales = false;
  auto& pyr = cfg.detection.pyramid;
  if (!flags.scales.empty()) {
    std::vector<double> scales = parse_list<double>(flags.scales);
    std::vector<int> sharpen;
    std::vector<double> beta;
    for (double s : scales) {
      // Carry over per-scale settings of matching configured scales.
      size_t j = 0;
      while (j < pyr.scales.size() && pyr.scales[j] != s) ++j;
      sharpen.push_back(j < pyr.scales.size() ? pyr.sharpen[j] : 2);
      beta.push_back(j < pyr.scales.size() ? pyr.beta[j] : 8.0);
    }
    pyr.scales = scales;
    pyr.sharpen = sharpen;
    pyr.beta = beta;
  }
  if (!flags.sharpen.empty()) pyr.sharpen = parse_list<int>(flags.sharpen);
  cfg.validate();

  // Vote mode never needs full posteriors.
  const oef::Forest forest =
      oef::load_forest(model, {cfg.detection.mode == oef::FusionMode::kVote});
  forest.check_compatible(cfg.labels);

  std::vector<fs::path> images;
  const fs::path in(input);
  if (fs::is_regular_file(in)) {
    images.push_back(in);
  } else if (fs::exists(in / "image.png")) {
    images.push_back(in / "image.png");
  } else {
    for (const auto& dir : oef::list_examples(in)) images.push_back(dir / "image.png");
  }
  if (images.empty()) throw oef::DataError("no input images under " + input);
  for (const auto& path : images) {
    const std::string id =
        path.filename() == "image.png" ? path.parent_path().filename().string() : path.stem().string();
    const oef::ImageF image = oef::to_float(oef::read_png_rgb(path));
    const auto t0 = std::chrono::steady_clock::now();
    const oef::Detection d = oef::run_detection(image, forest, cfg, c.threads);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const fs::path dir = fs::path(out) / id;
    fs::create_directories(dir);
    for (int j = 0; j < d.edges.orientations(); ++j) {
      oef::ImageF channel(image.width(), image.height());
      for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) channel(x, y) = d.edges.strength(x, y, j);
      oef::write_png(dir / ("E_" + std::to_string(j) + ".png"), oef::encode_strength(channel, full_scale(cfg)));
    }
    oef::write_png(dir / "max.png", oef::encode_strength(d.strength, full_scale(cfg)));
    oef::write_png(dir / "nms.png", oef::encode_strength(d.thinned, full_scale(cfg)));
    std::printf("%s %dx%d %.2fs\n", id.c_str(), image.width(), image.height(), secs);
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& detections, const std::string& gt,
             const std::string& report, const std::string& map_name) {
  const oef::PipelineConfig cfg = load_or_default(c.config);
  const fs::path gt_split = fs::exists(fs::path(gt) / "test") ? fs::path(gt) / "test" : fs::path(gt);
  std::vector<oef::ImageF> maps;
  std::vector<std::vector<oef::BinaryMap>> truths;
  for (const auto& dir : oef::list_examples(gt_split)) {
    const fs::path det = fs::path(detections) / dir.filename() / (map_name + ".png");
    if (!fs::exists(det)) throw oef::DataError("missing detection " + det.string());
    maps.push_back(oef::decode_strength(oef::read_png_gray16(det), full_scale(cfg)));
    truths.push_back(oef::boundary_maps(oef::load_example(dir)));
  }
  if (maps.empty()) throw oef::DataError("no ground truth under " + gt_split.string());
  oef::MatchConfig mc = cfg.bench;
  mc.threads = c.threads;
  const oef::PRCurve curve = oef::evaluate(maps, truths, mc);
  fs::create_directories(report);
  std::ofstream summary(fs::path(report) / "summary.txt");
  oef::write_summary(curve, summary);
  std::ofstream table(fs::path(report) / "pr.txt");
  oef::write_pr_table(curve, table);
  oef::write_png(fs::path(report) / "pr.png", oef::render_pr_plot(curve));
  oef::write_summary(curve, std::cout);
  return 0;
}

int cmd_visualize(const Common& c, const std::string& maps_dir, const std::string& reference_dir,
                  const std::string& out, const std::string& map_name) {
  const oef::PipelineConfig cfg = load_or_default(c.config);
  auto load_maps = [&](const fs::path& root, std::vector<std::string>* ids) {
    std::vector<oef::ImageF> maps;
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory() && fs::exists(e.path() / (map_name + ".png"))) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      maps.push_back(oef::decode_strength(oef::read_png_gray16(d / (map_name + ".png")), full_scale(cfg)));
      if (ids) ids->push_back(d.filename().string());
    }
    if (maps.empty()) throw oef::DataError("no " + map_name + ".png maps under " + root.string());
    return maps;
  };
  std::vector<std::string> ids;
  const auto maps = load_maps(maps_dir, &ids);
  const auto reference = load_maps(reference_dir, nullptr);
  const oef::HistogramNormalization norm = oef::histogram_normalize(maps, reference);
  for (size_t i = 0; i < ids.size(); ++i) {
    fs::create_directories(fs::path(out) / ids[i]);
    oef::write_png(fs::path(out) / ids[i] / (map_name + ".png"),
                   oef::encode_strength(norm.maps[i], full_scale(cfg)));
  }
  std::ofstream table(fs::path(out) / "transform.txt");
  table << "# input output\n";
  table.precision(9);
  for (size_t j = 0; j < norm.transform.in.size(); ++j)
    table << norm.transform.in[j] << ' ' << norm.transform.out[j] << '\n';
  std::cout << "normalized " << ids.size() << " maps into " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oriented edge forest boundary detector"};
  app.require_subcommand(1);
  Common common;

  std::string out, data, model, input, val, detections, gt, report, maps_dir, ref_dir;
  std::string map_name = "nms";
  int n_train = 60, n_val = 20, n_test = 50;
  long long seed = 1;
  DetectFlags flags;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth, common);
  synth->add_option("-o,--out", out, "Output root")->required();
  synth->add_option("--train", n_train, "Training images")->check(CLI::NonNegativeNumber);
  synth->add_option("--val", n_val, "Validation images")->check(CLI::NonNegativeNumber);
  synth->add_option("--test", n_test, "Test images")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", seed, "Random seed");

  auto* train = app.add_subcommand("train", "Sample patches and train a forest");
  add_common(train, common);
  train->add_option("-d,--data", data, "Dataset root or split directory")->required();
  train->add_option("-m,--model", model, "Output model file")->required();

  auto* calibrate = app.add_subcommand("calibrate", "Fit per-scale calibration on validation data");
  add_common(calibrate, common);
  calibrate->add_option("-m,--model", model, "Model file")->required();
  calibrate->add_option("--val", val, "Validation root or split directory")->required();
  calibrate->add_option("-o,--out", out, "Updated config output")->required();

  auto* detect = app.add_subcommand("detect", "Run the detector on images");
  add_common(detect, common);
  detect->add_option("-m,--model", model, "Model file")->required();
  detect->add_option("-i,--input", input, "Image, example directory or split directory")->required();
  detect->add_option("-o,--out", out, "Output directory")->required();
  detect->add_option("--mode", flags.mode, "avg or vote")->check(CLI::IsMember({"avg", "average", "vote"}));
  detect->add_flag("--no-calib", flags.no_calib, "Skip calibration");
  detect->add_option("--scales", flags.scales, "Comma-separated scales");
  detect->add_option("--sharpen", flags.sharpen, "Comma-separated sharpen levels");
  auto* collapsed = detect->add_flag("--collapsed", flags.collapsed, "Orientation-collapsed compositing");
  auto* naive = detect->add_flag("--naive", flags.naive, "Per-label compositing");
  collapsed->excludes(naive);
  detect->add_flag("--no-align", flags.no_align, "Plain bilinear resizing of each scale's map");

  auto* eval = app.add_subcommand("eval", "Benchmark detections against ground truth");
  add_common(eval, common);
  eval->add_option("-d,--detections", detections, "Detection directory")->required();
  eval->add_option("-g,--gt", gt, "Ground-truth root or split directory")->required();
  eval->add_option("-r,--report", report, "Report directory")->required();
  eval->add_option("--map", map_name, "Map to evaluate (nms or max)");

  auto* visualize = app.add_subcommand("visualize", "Histogram-normalize detector outputs");
  add_common(visualize, common);
  visualize->add_option("--maps", maps_dir, "Detection directory to normalize")->required();
  visualize->add_option("--reference", ref_dir, "Reference detection directory")->required();
  visualize->add_option("-o,--out", out, "Output directory")->required();
  visualize->add_option("--map", map_name, "Map to normalize (nms or max)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(common, out, n_train, n_val, n_test, seed);
    if (*train) return cmd_train(common, data, model);
    if (*calibrate) return cmd_calibrate(common, model, val, out);
    if (*detect) return cmd_detect(common, model, input, out, flags);
    if (*eval) return cmd_eval(common, detections, gt, report, map_name);
    if (*visualize) return cmd_visualize(common, maps_dir, ref_dir, out, map_name);
  } catch (const oef::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const oef::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
