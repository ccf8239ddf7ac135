#include "oef/config.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "oef/errors.hpp"

namespace oef {
namespace {

using nlohmann::json;

// Reads optional fields from one JSON object and rejects unknown keys so a
// misspelled setting cannot be silently ignored.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw ConfigError("config: unknown key '" + name_ + "." + key + "'");
  }

  template <typename T>
  void get(const char* key, T& field) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + name_ + "." + key + "': " + e.what());
    }
  }
  const json* child(const char* key) {
    seen_.push_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string name_;
  std::vector<std::string> seen_;
};

}  // namespace

std::string to_string(FusionMode mode) { return mode == FusionMode::kVote ? "vote" : "average"; }

std::string to_string(CalibrationMode mode) {
  switch (mode) {
    case CalibrationMode::kNone: return "none";
    case CalibrationMode::kFastApprox: return "fast_approx";
    case CalibrationMode::kExponential: break;
  }
  return "exponential";
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "average" || s == "avg") return FusionMode::kAverage;
  if (s == "vote") return FusionMode::kVote;
  throw ConfigError("unknown fusion mode '" + s + "'");
}

CalibrationMode parse_calibration_mode(const std::string& s) {
  if (s == "exponential") return CalibrationMode::kExponential;
  if (s == "fast_approx") return CalibrationMode::kFastApprox;
  if (s == "none") return CalibrationMode::kNone;
  throw ConfigError("unknown calibration mode '" + s + "'");
}

void PipelineConfig::validate() const {
  if (version != kConfigVersion)
    throw ConfigError("config version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kConfigVersion) + ")");
  try {
    labels.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (features.n_single < 0 || features.n_pairdiff < 0 || features.n_single + features.n_pairdiff == 0)
    throw ConfigError("config: feature pool is empty");
  if (forest.max_depth < 1 || forest.min_leaf_count < 1 || forest.n_features_per_node < 0 ||
      forest.n_thresholds < 1)
    throw ConfigError("config: forest hyperparameters out of range");
  if (sampling.n_per_class < 1 || sampling.max_draws_per_example < 1)
    throw ConfigError("config: sampling counts must be positive");
  if (training.n_trees < 1 || training.bootstrap_size < 1)
    throw ConfigError("config: training needs at least one tree and one sample");
  if (training.spur_length < 0 || training.theta_window < 1)
    throw ConfigError("config: groundtruth settings out of range");
  if (!(calibration.epsilon > 0) || calibration.pairs_per_image < 1)
    throw ConfigError("config: calibration settings out of range");
  detection.pyramid.validate();
  try {
    bench.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  synth.validate();
}

ForestConfig PipelineConfig::forest_config() const {
  ForestConfig f;
  f.labels = labels;
  f.pool = features;
  f.n_channels = kNumChannels;
  f.hyper = forest;
  return f;
}

PipelineConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  {
    Section s(root, "");
    if (!root.contains("version")) throw ConfigError("config: missing 'version'");
    s.get("version", cfg.version);
    if (cfg.version != kConfigVersion)
      throw ConfigError("config version " + std::to_string(cfg.version) +
                        " is not supported (expected " + std::to_string(kConfigVersion) + ")");
    s.get("seed", cfg.seed);
    if (auto* j = s.child("labels")) {
      Section t(*j, "labels");
      t.get("patch_size", cfg.labels.patch_size);
      t.get("n_dist_bins", cfg.labels.n_dist_bins);
      t.get("n_orient_bins", cfg.labels.n_orient_bins);
    }
    if (auto* j = s.child("features")) {
      Section t(*j, "features");
      t.get("n_single", cfg.features.n_single);
      t.get("n_pairdiff", cfg.features.n_pairdiff);
      t.get("seed", cfg.features.seed);
    }
    if (auto* j = s.child("forest")) {
      Section t(*j, "forest");
      t.get("max_depth", cfg.forest.max_depth);
      t.get("min_leaf_count", cfg.forest.min_leaf_count);
      t.get("n_features_per_node", cfg.forest.n_features_per_node);
      t.get("n_thresholds", cfg.forest.n_thresholds);
    }
    if (auto* j = s.child("sampling")) {
      Section t(*j, "sampling");
      t.get("n_per_class", cfg.sampling.n_per_class);
      t.get("seed", cfg.sampling.seed);
      t.get("max_draws_per_example", cfg.sampling.max_draws_per_example);
    }
    if (auto* j = s.child("training")) {
      Section t(*j, "training");
      t.get("n_trees", cfg.training.n_trees);
      t.get("bootstrap_size", cfg.training.bootstrap_size);
      t.get("spur_length", cfg.training.spur_length);
      t.get("theta_window", cfg.training.theta_window);
      t.get("store_posteriors", cfg.training.store_posteriors);
    }
    if (auto* j = s.child("calibration")) {
      Section t(*j, "calibration");
      t.get("epsilon", cfg.calibration.epsilon);
      t.get("pairs_per_image", cfg.calibration.pairs_per_image);
    }
    if (auto* j = s.child("detection")) {
      Section t(*j, "detection");
      std::string mode = to_string(cfg.detection.mode);
      std::string calib = to_string(cfg.detection.calibration);
      t.get("mode", mode);
      t.get("calibration", calib);
      cfg.detection.mode = parse_fusion_mode(mode);
      cfg.detection.calibration = parse_calibration_mode(calib);
      t.get("collapsed", cfg.detection.collapsed);
      t.get("align_scales", cfg.detection.align_scales);
      t.get("score_threshold", cfg.detection.score_threshold);
      t.get("scales", cfg.detection.pyramid.scales);
      t.get("sharpen", cfg.detection.pyramid.sharpen);
      t.get("beta", cfg.detection.pyramid.beta);
    }
    if (auto* j = s.child("bench")) {
      Section t(*j, "bench");
      t.get("max_dist_fraction", cfg.bench.max_dist_fraction);
      t.get("n_thresholds", cfg.bench.n_thresholds);
      t.get("refine_thresholds", cfg.bench.refine_thresholds);
      t.get("thin_detections", cfg.bench.thin_detections);
      t.get("left_extend", cfg.bench.left_extend);
    }
    if (auto* j = s.child("synth")) {
      Section t(*j, "synth");
      t.get("width", cfg.synth.width);
      t.get("height", cfg.synth.height);
      t.get("min_shapes", cfg.synth.min_shapes);
      t.get("max_shapes", cfg.synth.max_shapes);
      t.get("ellipse_fraction", cfg.synth.ellipse_fraction);
      t.get("noise_sigma", cfg.synth.noise_sigma);
      t.get("texture_amplitude", cfg.synth.texture_amplitude);
      t.get("min_color_distance", cfg.synth.min_color_distance);
      t.get("supersample", cfg.synth.supersample);
      t.get("n_annotators", cfg.synth.n_annotators);
      t.get("merge_area_fraction", cfg.synth.merge_area_fraction);
    }
    if (auto* j = s.child("paths")) {
      Section t(*j, "paths");
      t.get("data_dir", cfg.paths.data_dir);
      t.get("model", cfg.paths.model);
      t.get("output_dir", cfg.paths.output_dir);
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["labels"] = {{"patch_size", c.labels.patch_size},
                 {"n_dist_bins", c.labels.n_dist_bins},
                 {"n_orient_bins", c.labels.n_orient_bins}};
  j["features"] = {{"n_single", c.features.n_single},
                   {"n_pairdiff", c.features.n_pairdiff},
                   {"seed", c.features.seed}};
  j["forest"] = {{"max_depth", c.forest.max_depth},
                 {"min_leaf_count", c.forest.min_leaf_count},
                 {"n_features_per_node", c.forest.n_features_per_node},
                 {"n_thresholds", c.forest.n_thresholds}};
  j["sampling"] = {{"n_per_class", c.sampling.n_per_class},
                   {"seed", c.sampling.seed},
                   {"max_draws_per_example", c.sampling.max_draws_per_example}};
  j["training"] = {{"n_trees", c.training.n_trees},
                   {"bootstrap_size", c.training.bootstrap_size},
                   {"spur_length", c.training.spur_length},
                   {"theta_window", c.training.theta_window},
                   {"store_posteriors", c.training.store_posteriors}};
  j["calibration"] = {{"epsilon", c.calibration.epsilon},
                      {"pairs_per_image", c.calibration.pairs_per_image}};
  j["detection"] = {{"mode", to_string(c.detection.mode)},
                    {"calibration", to_string(c.detection.calibration)},
                    {"collapsed", c.detection.collapsed},
                    {"align_scales", c.detection.align_scales},
                    {"score_threshold", c.detection.score_threshold},
                    {"scales", c.detection.pyramid.scales},
                    {"sharpen", c.detection.pyramid.sharpen},
                    {"beta", c.detection.pyramid.beta}};
  j["bench"] = {{"max_dist_fraction", c.bench.max_dist_fraction},
                {"n_thresholds", c.bench.n_thresholds},
                {"refine_thresholds", c.bench.refine_thresholds},
                {"thin_detections", c.bench.thin_detections},
                {"left_extend", c.bench.left_extend}};
  j["synth"] = {{"width", c.synth.width},
                {"height", c.synth.height},
                {"min_shapes", c.synth.min_shapes},
                {"max_shapes", c.synth.max_shapes},
                {"ellipse_fraction", c.synth.ellipse_fraction},
                {"noise_sigma", c.synth.noise_sigma},
                {"texture_amplitude", c.synth.texture_amplitude},
                {"min_color_distance", c.synth.min_color_distance},
                {"supersample", c.synth.supersample},
                {"n_annotators", c.synth.n_annotators},
                {"merge_area_fraction", c.synth.merge_area_fraction}};
  j["paths"] = {{"data_dir", c.paths.data_dir},
                {"model", c.paths.model},
                {"output_dir", c.paths.output_dir}};
  return j.dump(2) + "\n";
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << config_to_json(cfg);
}

}  // namespace oef
