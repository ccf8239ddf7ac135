#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace oef {

// A forest score for one label paired with how often that label was correct
// (1/0, or the annotator average when annotations disagree).
struct CalibrationPair {
  float score = 0.0f;
  float target = 0.0f;
};

struct ReliabilityBin {
  double center = 0.0;
  double probability = 0.0;  // mean target in the bin
  double std_error = 0.0;
  double mean_score = 0.0;
  std::int64_t count = 0;
};

struct ReliabilityCurve {
  double half_width = 0.025;
  std::vector<ReliabilityBin> bins;  // ascending centers, empty bins omitted
};

// Bins have width 2*epsilon and centers at multiples of 2*epsilon; a score at
// an exact bin edge goes to the lower bin.
ReliabilityCurve reliability(std::span<const CalibrationPair> pairs, double epsilon = 0.025);

struct BetaFitOptions {
  double lower = 1e-6;
  double upper = 100.0;
  double tolerance = 1e-6;
};

// Least-squares fit of target ~ 1 - exp(-beta * score) by golden-section search.
// Throws std::invalid_argument when no score is positive.
double fit_beta(std::span<const CalibrationPair> pairs, const BetaFitOptions& options = {});

// Sum of squared residuals of the exponential model; exposed for diagnostics.
double calibration_loss(std::span<const CalibrationPair> pairs, double beta);

enum class CalibrationMode { kNone, kExponential, kFastApprox };

struct CalibrationModel {
  CalibrationMode mode = CalibrationMode::kExponential;
  double beta = 8.0;

  float operator()(float w) const;
};

// Maps every non-background entry (index >= 1); entry 0 is left untouched.
void apply_calibration(const CalibrationModel& model, std::span<float> scores);

}  // namespace oef
