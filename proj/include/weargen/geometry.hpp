#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace weargen::geom {

/// The 12 annotated joints, in file order.
enum class Joint : int {
  kLeftHip = 0,
  kRightHip,
  kLeftKnee,
  kRightKnee,
  kLeftAnkle,
  kRightAnkle,
  kLeftHeel,
  kRightHeel,
  kLeftBigToe,
  kRightBigToe,
  kLeftSmallToe,
  kRightSmallToe,
};

inline constexpr std::size_t kNumJoints = 12;

enum class Side : int { kLeft = 0, kRight = 1 };

std::string_view joint_name(Joint j);
std::optional<Joint> joint_from_name(std::string_view name);
Side joint_side(Joint j);

/// Named keypoint subsets. Leg and foot share the two ankle slots.
enum class Subset { kLeg, kFoot, kAll };

/// Joints of a subset in vector order.
std::span<const Joint> subset_joints(Subset subset);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

struct Keypoint2D {
  double x = 0.0;
  double y = 0.0;
  bool present = false;
  bool operator==(const Keypoint2D&) const = default;
};

/// All 12 slots always exist; absence is present=false.
struct PoseAnnotation {
  std::array<Keypoint2D, kNumJoints> keypoints{};
  int image_size = 0;

  Keypoint2D& operator[](Joint j) { return keypoints[static_cast<std::size_t>(j)]; }
  const Keypoint2D& operator[](Joint j) const { return keypoints[static_cast<std::size_t>(j)]; }

  bool operator==(const PoseAnnotation&) const = default;
};

/// Throws InvalidArgument when a present keypoint lies outside the image.
void validate(const PoseAnnotation& pose);

/// Flat (x1, y1, ..., xk, yk) vector for a k-joint subset. Present coordinates
/// lie in [0.1, 1.0], absent joints are exactly (0, 0).
struct NormalizedPose {
  Subset subset = Subset::kAll;
  std::vector<double> values;
};

inline constexpr double kNormOffset = 0.1;
inline constexpr double kNormScale = 0.9;
/// Coordinates below this decode as absent. Halfway between the 0 sentinel
/// and the smallest valid encoding.
inline constexpr double kAbsenceThreshold = 0.05;

NormalizedPose normalize_pose(const PoseAnnotation& pose, Subset subset);

/// Inverse of normalize_pose. Slots outside the subset are left absent.
PoseAnnotation denormalize_pose(const NormalizedPose& norm, int image_size);

nlohmann::json pose_to_json(const PoseAnnotation& pose);
PoseAnnotation pose_from_json(const nlohmann::json& j);

/// Rotates every present keypoint by `radians` around `center` (image coords).
PoseAnnotation rotate_pose(const PoseAnnotation& pose, Point2 center, double radians);

/// Rescales keypoints from pose.image_size to `new_size`.
PoseAnnotation rescale_pose(const PoseAnnotation& pose, int new_size);


/// Shoe geometry needed by downstream checks, in image coordinates.
struct ShoeGeometry {
  Side side = Side::kLeft;
  std::vector<Point2> collar;                  // collar-opening polygon
  std::vector<std::vector<Point2>> silhouette; // union of these polygons
  Point2 forward{1.0, 0.0};                    // unit heel->toe direction
};

/// True when p lies inside or on the boundary of the polygon.
bool point_in_polygon(const std::vector<Point2>& polygon, Point2 p);

nlohmann::json shoe_geometry_to_json(const ShoeGeometry& g);
ShoeGeometry shoe_geometry_from_json(const nlohmann::json& j);

}  // namespace weargen::geom
