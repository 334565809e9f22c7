#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <opencv2/core.hpp>

#include "weargen/geometry.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("weargen-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline bool same_image(const cv::Mat& a, const cv::Mat& b) {
  if (a.size() != b.size() || a.type() != b.type()) return false;
  return cv::norm(a, b, cv::NORM_INF) == 0.0;
}

inline std::uint64_t fnv1a(const cv::Mat& m) {
  std::uint64_t h = 1469598103934665603ull;
  const cv::Mat c = m.isContinuous() ? m : m.clone();
  const auto* p = c.ptr<unsigned char>();
  for (std::size_t i = 0; i < c.total() * c.elemSize(); ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline bool same_pose(const weargen::geom::PoseAnnotation& a, const weargen::geom::PoseAnnotation& b) {
  if (a.image_size != b.image_size) return false;
  for (std::size_t i = 0; i < a.keypoints.size(); ++i) {
    const auto& p = a.keypoints[i];
    const auto& q = b.keypoints[i];
    if (p.present != q.present || p.x != q.x || p.y != q.y) return false;
  }
  return true;
}

}  // namespace testing
