#include "weargen/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "weargen/errors.hpp"

namespace weargen::geom {

HeatmapStack encode_heatmaps(const PoseAnnotation& pose, int resolution, double sigma) {
  if (resolution <= 0) throw InvalidArgument("encode_heatmaps: resolution must be positive");
  if (!(sigma > 0.0)) throw InvalidArgument("encode_heatmaps: sigma must be positive");
  if (pose.image_size <= 0) throw InvalidArgument("encode_heatmaps: pose image_size must be positive");

  const auto joints = subset_joints(Subset::kFoot);
  HeatmapStack stack;
  stack.channels = static_cast<int>(joints.size());
  stack.resolution = resolution;
  stack.sigma = sigma;
  stack.data.assign(static_cast<std::size_t>(stack.channels) * resolution * resolution, 0.0f);

  const double scale = static_cast<double>(resolution) / pose.image_size;
  const double denom = 2.0 * sigma * sigma;
  for (int c = 0; c < stack.channels; ++c) {
    const auto& kp = pose[joints[c]];
    if (!kp.present) continue;
    const int cx = std::clamp(static_cast<int>(std::floor(kp.x * scale + 0.5)), 0, resolution - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(kp.y * scale + 0.5)), 0, resolution - 1);
    for (int y = 0; y < resolution; ++y) {
      for (int x = 0; x < resolution; ++x) {
        const double d2 = static_cast<double>((x - cx) * (x - cx) + (y - cy) * (y - cy));
        stack.at(c, y, x) = static_cast<float>(std::exp(-d2 / denom));
      }
    }
  }
  return stack;
}

PoseAnnotation decode_heatmaps(const HeatmapStack& stack, int image_size) {
  if (image_size <= 0) throw InvalidArgument("decode_heatmaps: image size must be positive");
  const auto joints = subset_joints(Subset::kFoot);
  if (stack.channels != static_cast<int>(joints.size())) {
    throw InvalidArgument("decode_heatmaps: expected one channel per foot keypoint");
  }
  PoseAnnotation pose;
  pose.image_size = image_size;
  const double inv_scale = static_cast<double>(image_size) / stack.resolution;
  const std::size_t plane = static_cast<std::size_t>(stack.resolution) * stack.resolution;
  for (int c = 0; c < stack.channels; ++c) {
    const auto begin = stack.data.begin() + static_cast<std::ptrdiff_t>(c * plane);
    const auto it = std::max_element(begin, begin + static_cast<std::ptrdiff_t>(plane));
    auto& kp = pose[joints[c]];
    if (*it < kHeatmapPresence) continue;
    const auto idx = static_cast<int>(it - begin);
    kp.x = (idx % stack.resolution) * inv_scale;
    kp.y = (idx / stack.resolution) * inv_scale;
    kp.present = true;
  }
  return pose;
}

}  // namespace weargen::geom
