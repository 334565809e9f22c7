#include "weargen/skeleton.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "weargen/errors.hpp"

namespace weargen::geom {

const std::array<Bone, 10>& skeleton_bones() {
  static const std::array<Bone, 10> bones = {{
      {Joint::kLeftHip, Joint::kLeftKnee, {255, 64, 0}},
      {Joint::kLeftKnee, Joint::kLeftAnkle, {255, 170, 0}},
      {Joint::kLeftAnkle, Joint::kLeftHeel, {170, 255, 0}},
      {Joint::kLeftAnkle, Joint::kLeftBigToe, {0, 255, 85}},
      {Joint::kLeftBigToe, Joint::kLeftSmallToe, {0, 255, 255}},
      {Joint::kRightHip, Joint::kRightKnee, {0, 64, 255}},
      {Joint::kRightKnee, Joint::kRightAnkle, {0, 170, 255}},
      {Joint::kRightAnkle, Joint::kRightHeel, {85, 0, 255}},
      {Joint::kRightAnkle, Joint::kRightBigToe, {255, 0, 170}},
      {Joint::kRightBigToe, Joint::kRightSmallToe, {128, 0, 128}},
  }};
  return bones;
}

int skeleton_line_width(int canvas) {
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(SkeletonStyle::kLineWidth) * canvas /
                                                  SkeletonStyle::kReferenceCanvas)));
}

int skeleton_joint_radius(int canvas) {
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(SkeletonStyle::kJointRadius) * canvas /
                                                  SkeletonStyle::kReferenceCanvas)));
}

cv::Mat render_skeleton(const PoseAnnotation& pose, int canvas) {
  if (canvas <= 0) throw InvalidArgument("render_skeleton: canvas must be positive");
  if (pose.image_size <= 0) throw InvalidArgument("render_skeleton: pose image_size must be positive");
  cv::Mat img(canvas, canvas, CV_8UC3, cv::Scalar::all(0));
  const double k = static_cast<double>(canvas) / pose.image_size;
  auto to_px = [k](const Keypoint2D& kp) {
    return cv::Point(static_cast<int>(std::floor(kp.x * k)), static_cast<int>(std::floor(kp.y * k)));
  };
  const int width = skeleton_line_width(canvas);
  for (const auto& bone : skeleton_bones()) {
    const auto& a = pose[bone.from];
    const auto& b = pose[bone.to];
    if (!a.present || !b.present) continue;
    cv::line(img, to_px(a), to_px(b), cv::Scalar(bone.color[0], bone.color[1], bone.color[2]), width,
             cv::LINE_8);
  }
  const int radius = skeleton_joint_radius(canvas);
  const auto& jc = SkeletonStyle::kJointColor;
  for (const auto& kp : pose.keypoints) {
    if (!kp.present) continue;
    cv::circle(img, to_px(kp), radius, cv::Scalar(jc[0], jc[1], jc[2]), cv::FILLED, cv::LINE_8);
  }
  return img;
}

}  // namespace weargen::geom
