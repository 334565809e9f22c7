#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include <opencv2/core.hpp>

#include "weargen/geometry.hpp"

namespace weargen::geom {

struct Bone {
  Joint from;
  Joint to;
  cv::Vec3b color;  // BGR
};

/// Rendering constants for pose images. Widths are specified on a 512 canvas
/// and scaled linearly (minimum 1 px).
struct SkeletonStyle {
  static constexpr int kReferenceCanvas = 512;
  static constexpr int kLineWidth = 4;
  static constexpr int kJointRadius = 4;
  static constexpr std::array<std::uint8_t, 3> kJointColor = {255, 255, 255};
};

/// Ten bones: hip-knee, knee-ankle, ankle-heel, ankle-big toe, big toe-small toe per side.
const std::array<Bone, 10>& skeleton_bones();

int skeleton_line_width(int canvas);
int skeleton_joint_radius(int canvas);

/// Renders X_p: bones drawn only when both endpoints are present, then joint
/// discs. No anti-aliasing, so output is a pure function of (pose, canvas).
cv::Mat render_skeleton(const PoseAnnotation& pose, int canvas);

}  // namespace weargen::geom
