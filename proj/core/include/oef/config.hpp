#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "oef/bench.hpp"
#include "oef/calibration.hpp"
#include "oef/features.hpp"
#include "oef/forest.hpp"
#include "oef/fusion.hpp"
#include "oef/groundtruth.hpp"
#include "oef/label_space.hpp"
#include "oef/synth.hpp"

namespace oef {

inline constexpr int kConfigVersion = 1;

struct TrainingSettings {
  int n_trees = 8;
  int bootstrap_size = 4000000;
  int spur_length = 7;
  int theta_window = 6;
  bool store_posteriors = true;
};

struct CalibrationSettings {
  double epsilon = 0.025;     // reliability-curve bin half-width
  int pairs_per_image = 400;  // sampled validation patch centers per image and scale
};

struct DetectionSettings {
  FusionMode mode = FusionMode::kAverage;
  CalibrationMode calibration = CalibrationMode::kExponential;
  bool collapsed = true;
  bool align_scales = true;
  float score_threshold = 0.0f;
  PyramidConfig pyramid;
};

struct PathSettings {
  std::string data_dir = "data";
  std::string model = "model.oef";
  std::string output_dir = "out";
};

// Everything a pipeline run depends on. Serialized as JSON.
struct PipelineConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 1;
  LabelSpaceConfig labels;
  FeaturePoolConfig features;
  TreeHyper forest;
  SamplingOptions sampling;
  TrainingSettings training;
  CalibrationSettings calibration;
  DetectionSettings detection;
  MatchConfig bench;
  SynthConfig synth;
  PathSettings paths;

  // Throws ConfigError when fields are out of range or inconsistent.
  void validate() const;
  ForestConfig forest_config() const;
};

PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& cfg);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);

std::string to_string(FusionMode mode);
std::string to_string(CalibrationMode mode);
FusionMode parse_fusion_mode(const std::string& s);
CalibrationMode parse_calibration_mode(const std::string& s);

}  // namespace oef
