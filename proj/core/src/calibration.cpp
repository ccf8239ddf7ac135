#include "oef/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace oef {

ReliabilityCurve reliability(std::span<const CalibrationPair> pairs, double epsilon) {
  if (!(epsilon > 0)) throw std::invalid_argument("reliability: epsilon must be positive");
  struct Acc {
    double sum = 0, sum_sq = 0, score = 0;
    std::int64_t n = 0;
  };
  std::map<long long, Acc> acc;
  for (const auto& p : pairs) {
    const long long j = static_cast<long long>(std::ceil(p.score / (2 * epsilon) - 0.5));
    Acc& a = acc[j];
    a.sum += p.target;
    a.sum_sq += static_cast<double>(p.target) * p.target;
    a.score += p.score;
    ++a.n;
  }
  ReliabilityCurve curve;
  curve.half_width = epsilon;
  for (const auto& [j, a] : acc) {
    ReliabilityBin b;
    b.center = 2 * epsilon * j;
    b.count = a.n;
    b.probability = a.sum / a.n;
    b.mean_score = a.score / a.n;
    const double var = std::max(0.0, a.sum_sq / a.n - b.probability * b.probability);
    b.std_error = a.n > 1 ? std::sqrt(var * a.n / (a.n - 1) / a.n) : 0.0;
    curve.bins.push_back(b);
  }
  return curve;
}

double calibration_loss(std::span<const CalibrationPair> pairs, double beta) {
  double loss = 0;
  for (const auto& p : pairs) {
    const double r = p.target - (1.0 - std::exp(-beta * p.score));
    loss += r * r;
  }
  return loss;
}

double fit_beta(std::span<const CalibrationPair> pairs, const BetaFitOptions& options) {
  if (std::none_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.score > 0; })) {
    throw std::invalid_argument("fit_beta: all scores are zero; beta is undefined");
  }
  // Pairs with zero score contribute a beta-independent constant.
  std::vector<CalibrationPair> active;
  for (const auto& p : pairs)
    if (p.score > 0) active.push_back(p);

  const double inv_phi = (std::sqrt(5.0) - 1) / 2;
  double a = options.lower, b = options.upper;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = calibration_loss(active, c), fd = calibration_loss(active, d);
  while (b - a > options.tolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = calibration_loss(active, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = calibration_loss(active, d);
    }
  }
  return 0.5 * (a + b);
}

float CalibrationModel::operator()(float w) const {
  switch (mode) {
    case CalibrationMode::kNone:
      return w;
    case CalibrationMode::kFastApprox:
      return std::min(1.0f, w);
    case CalibrationMode::kExponential:
      break;
  }
  return static_cast<float>(1.0 - std::exp(-beta * static_cast<double>(w)));
}

void apply_calibration(const CalibrationModel& model, std::span<float> scores) {
  if (model.mode == CalibrationMode::kExponential && !(model.beta > 0)) {
    throw std::invalid_argument("apply_calibration: beta must be positive");
  }
  for (size_t k = 1; k < scores.size(); ++k) scores[k] = model(scores[k]);
}

}  // namespace oef
