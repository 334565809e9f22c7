#include "weargen/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "weargen/errors.hpp"

namespace weargen::geom {

namespace {

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "left_hip",     "right_hip",     "left_knee",      "right_knee",
    "left_ankle",   "right_ankle",   "left_heel",      "right_heel",
    "left_big_toe", "right_big_toe", "left_small_toe", "right_small_toe",
};

constexpr std::array<Joint, 6> kLegJoints = {
    Joint::kLeftHip,  Joint::kRightHip,   Joint::kLeftKnee,
    Joint::kRightKnee, Joint::kLeftAnkle, Joint::kRightAnkle,
};

constexpr std::array<Joint, 8> kFootJoints = {
    Joint::kLeftAnkle,   Joint::kRightAnkle,   Joint::kLeftHeel,
    Joint::kRightHeel,   Joint::kLeftBigToe,   Joint::kRightBigToe,
    Joint::kLeftSmallToe, Joint::kRightSmallToe,
};

constexpr std::array<Joint, 12> kAllJoints = {
    Joint::kLeftHip,     Joint::kRightHip,     Joint::kLeftKnee,
    Joint::kRightKnee,   Joint::kLeftAnkle,    Joint::kRightAnkle,
    Joint::kLeftHeel,    Joint::kRightHeel,    Joint::kLeftBigToe,
    Joint::kRightBigToe, Joint::kLeftSmallToe, Joint::kRightSmallToe,
};

}  // namespace

std::string_view joint_name(Joint j) { return kJointNames[static_cast<std::size_t>(j)]; }

std::optional<Joint> joint_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    if (kJointNames[i] == name) return static_cast<Joint>(i);
  }
  return std::nullopt;
}

Side joint_side(Joint j) {
  return static_cast<int>(j) % 2 == 0 ? Side::kLeft : Side::kRight;
}

std::span<const Joint> subset_joints(Subset subset) {
  switch (subset) {
    case Subset::kLeg:
      return kLegJoints;
    case Subset::kFoot:
      return kFootJoints;
    case Subset::kAll:
      break;
  }
  return kAllJoints;
}

void validate(const PoseAnnotation& pose) {
  if (pose.image_size <= 0) throw InvalidArgument("pose image_size must be positive");
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    const auto& kp = pose.keypoints[i];
    if (!kp.present) continue;
    if (!(kp.x >= 0.0 && kp.x < pose.image_size && kp.y >= 0.0 && kp.y < pose.image_size)) {
      throw InvalidArgument("keypoint " + std::string(kJointNames[i]) + " lies outside the image");
    }
  }
}

NormalizedPose normalize_pose(const PoseAnnotation& pose, Subset subset) {
  if (pose.image_size <= 0) throw InvalidArgument("normalize_pose: image size must be positive");
  const double s = pose.image_size;
  NormalizedPose out;
  out.subset = subset;
  const auto joints = subset_joints(subset);
  out.values.reserve(joints.size() * 2);
  for (Joint j : joints) {
    const auto& kp = pose[j];
    if (kp.present) {
      out.values.push_back(kp.x / s * kNormScale + kNormOffset);
      out.values.push_back(kp.y / s * kNormScale + kNormOffset);
    } else {
      out.values.push_back(0.0);
      out.values.push_back(0.0);
    }
  }
  return out;
}

PoseAnnotation denormalize_pose(const NormalizedPose& norm, int image_size) {
  if (image_size <= 0) throw InvalidArgument("denormalize_pose: image size must be positive");
  const auto joints = subset_joints(norm.subset);
  if (norm.values.size() != joints.size() * 2) {
    throw InvalidArgument("denormalize_pose: vector length does not match subset");
  }
  PoseAnnotation pose;
  pose.image_size = image_size;
  const double s = image_size;
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const double vx = norm.values[2 * i];
    const double vy = norm.values[2 * i + 1];
    auto& kp = pose[joints[i]];
    if (vx < kAbsenceThreshold || vy < kAbsenceThreshold) {
      kp = Keypoint2D{};
      continue;
    }
    kp.x = (vx - kNormOffset) / kNormScale * s;
    kp.y = (vy - kNormOffset) / kNormScale * s;
    kp.present = true;
  }
  return pose;
}

nlohmann::json pose_to_json(const PoseAnnotation& pose) {
  nlohmann::json kps = nlohmann::json::array();
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    const auto& kp = pose.keypoints[i];
    kps.push_back({{"name", kJointNames[i]},
                   {"x", kp.present ? kp.x : 0.0},
                   {"y", kp.present ? kp.y : 0.0},
                   {"present", kp.present}});
  }
  return {{"image_size", pose.image_size}, {"keypoints", std::move(kps)}};
}

PoseAnnotation pose_from_json(const nlohmann::json& j) {
  if (!j.contains("image_size")) throw InvalidArgument("pose annotation: missing image_size");
  if (!j.contains("keypoints") || !j["keypoints"].is_array()) {
    throw InvalidArgument("pose annotation: missing keypoints array");
  }
  PoseAnnotation pose;
  pose.image_size = j["image_size"].get<int>();
  std::array<bool, kNumJoints> seen{};
  for (const auto& entry : j["keypoints"]) {
    const auto name = entry.at("name").get<std::string>();
    const auto joint = joint_from_name(name);
    if (!joint) throw InvalidArgument("pose annotation: unknown keypoint '" + name + "'");
    auto idx = static_cast<std::size_t>(*joint);
    if (seen[idx]) throw InvalidArgument("pose annotation: duplicate keypoint '" + name + "'");
    seen[idx] = true;
    auto& kp = pose.keypoints[idx];
    kp.present = entry.at("present").get<bool>();
    kp.x = kp.present ? entry.at("x").get<double>() : 0.0;
    kp.y = kp.present ? entry.at("y").get<double>() : 0.0;
  }
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    if (!seen[i]) {
      throw InvalidArgument("pose annotation: missing keypoint '" + std::string(kJointNames[i]) + "'");
    }
  }
  validate(pose);
  return pose;
}

PoseAnnotation rotate_pose(const PoseAnnotation& pose, Point2 center, double radians) {
  PoseAnnotation out = pose;
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  for (auto& kp : out.keypoints) {
    if (!kp.present) continue;
    const double dx = kp.x - center.x;
    const double dy = kp.y - center.y;
    kp.x = center.x + c * dx - s * dy;
    kp.y = center.y + s * dx + c * dy;
  }
  return out;
}

PoseAnnotation rescale_pose(const PoseAnnotation& pose, int new_size) {
  if (pose.image_size <= 0 || new_size <= 0) throw InvalidArgument("rescale_pose: sizes must be positive");
  PoseAnnotation out = pose;
  out.image_size = new_size;
  const double k = static_cast<double>(new_size) / pose.image_size;
  for (auto& kp : out.keypoints) {
    if (!kp.present) continue;
    kp.x *= k;
    kp.y *= k;
  }
  return out;
}


bool point_in_polygon(const std::vector<Point2>& polygon, Point2 p) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  // Boundary counts as inside.
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = polygon[j];
    const Point2 b = polygon[i];
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (std::abs(cross) <= 1e-9 * (1.0 + std::abs(b.x - a.x) + std::abs(b.y - a.y)) &&
        p.x >= std::min(a.x, b.x) - 1e-9 && p.x <= std::max(a.x, b.x) + 1e-9 &&
        p.y >= std::min(a.y, b.y) - 1e-9 && p.y <= std::max(a.y, b.y) + 1e-9) {
      return true;
    }
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = polygon[i];
    const Point2 b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

namespace {

nlohmann::json polygon_to_json(const std::vector<Point2>& poly) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : poly) arr.push_back({p.x, p.y});
  return arr;
}

std::vector<Point2> polygon_from_json(const nlohmann::json& arr) {
  std::vector<Point2> poly;
  for (const auto& p : arr) poly.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return poly;
}

}  // namespace

nlohmann::json shoe_geometry_to_json(const ShoeGeometry& g) {
  nlohmann::json sil = nlohmann::json::array();
  for (const auto& poly : g.silhouette) sil.push_back(polygon_to_json(poly));
  return {{"side", g.side == Side::kLeft ? "left" : "right"},
          {"collar", polygon_to_json(g.collar)},
          {"silhouette", std::move(sil)},
          {"forward", {g.forward.x, g.forward.y}}};
}

ShoeGeometry shoe_geometry_from_json(const nlohmann::json& j) {
  ShoeGeometry g;
  const auto side = j.at("side").get<std::string>();
  if (side != "left" && side != "right") throw InvalidArgument("shoe geometry: bad side '" + side + "'");
  g.side = side == "left" ? Side::kLeft : Side::kRight;
  g.collar = polygon_from_json(j.at("collar"));
  for (const auto& poly : j.at("silhouette")) g.silhouette.push_back(polygon_from_json(poly));
  g.forward = {j.at("forward").at(0).get<double>(), j.at("forward").at(1).get<double>()};
  return g;
}

}  // namespace weargen::geom
