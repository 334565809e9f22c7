#pragma once

#include <vector>

#include "weargen/geometry.hpp"

namespace weargen::geom {

/// One Gaussian channel per foot keypoint (foot subset order), row-major.
struct HeatmapStack {
  int channels = 0;
  int resolution = 0;
  double sigma = 0.0;
  std::vector<float> data;

  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * resolution + y) * resolution + x];
  }
  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * resolution + y) * resolution + x];
  }
};

inline constexpr float kHeatmapPresence = 0.1f;

/// MSRA-style targets: the keypoint is scaled to the heatmap grid and rounded to
/// the nearest cell, which receives exactly 1.0. Absent joints give zero channels.
HeatmapStack encode_heatmaps(const PoseAnnotation& pose, int resolution, double sigma);

/// Argmax decode (row-major first maximum wins). Channels whose peak is below
/// kHeatmapPresence decode as absent. Coordinates are scaled to `image_size`.
PoseAnnotation decode_heatmaps(const HeatmapStack& stack, int image_size);

}  // namespace weargen::geom
