#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <unistd.h>

#include "oef/env.hpp"
#include "oef/image.hpp"
#include "oef/label_space.hpp"
#include "oef/log.hpp"

namespace oef::testing {

// Segmentation from a per-pixel id function.
inline SegmentationMap make_seg(int w, int h, const std::function<int(int, int)>& id) {
  SegmentationMap seg(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) seg(x, y) = id(x, y);
  return seg;
}

// Two regions split by the straight line through (cx, cy) with tangent angle
// theta (y up). Pixels left of the line get id 1.
inline SegmentationMap half_plane(int w, int h, double theta, double cx, double cy) {
  const double s = std::sin(theta), c = std::cos(theta);
  return make_seg(w, h, [&](int x, int y) { return -s * (x - cx) - c * (y - cy) > 0 ? 1 : 2; });
}

inline BinaryMap mask_from(const std::vector<std::string>& rows) {
  BinaryMap m(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) m(x, y) = rows[y][x] == '#';
  return m;
}

inline int count_on(const BinaryMap& m) {
  int n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

// Smallest angle between two undirected orientations, in degrees.
inline double orientation_error_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return degrees(std::min(d, std::numbers::pi - d));
}

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    previous_ = set_warning_handler([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { set_warning_handler(previous_); }
  std::vector<std::string> messages;

 private:
  WarningHandler previous_;
};

// Fresh directory below the scratch root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = scratch_dir() / ("oef_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace oef::testing
