#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "weargen/geometry.hpp"

namespace weargen::eval {

// ---- pose plausibility ----
// An operational stand-in for "the leg meets the shoe in a reasonable way";
// the thresholds are calibrated so generated ground-truth scenes pass.

struct PlausibilityConfig {
  double ratio_min = 0.7;          // thigh / calf length
  double ratio_max = 1.4;
  double knee_max_deg = 60.0;      // forward deviation of the knee from the hip-ankle line
  double knee_back_tol_deg = 5.0;  // backward deviation tolerated (near-straight legs)
  double collar_tol_px = 0.0;      // ankle may sit this far outside the collar polygon
};

struct PlausibilityReport {
  bool ankle_in_collar = false;
  bool joint_order_ok = false;
  bool bone_ratio_ok = false;
  bool knee_direction_ok = false;
  bool pass() const { return ankle_in_collar && joint_order_ok && bone_ratio_ok && knee_direction_ok; }
};

/// Checks every shoe's side of the pose; a check holds only if it holds for
/// all shoes. Missing keypoints make the affected checks false.
PlausibilityReport pose_plausibility(const geom::PoseAnnotation& pose, std::span<const geom::ShoeGeometry> shoes,
                                     const PlausibilityConfig& config = {});

double pass_rate(std::span<const PlausibilityReport> reports);

/// Signed knee deviation in degrees at the ankle between the ankle->hip and
/// ankle->knee rays, positive towards `forward`.
double knee_deviation_deg(geom::Point2 hip, geom::Point2 knee, geom::Point2 ankle, geom::Point2 forward);

struct LegImageConfig {
  int min_diff = 30;            // max channel difference separating leg from backdrop
  double corridor_frac = 0.08;  // allowed distance from a bone, fraction of image side
  double min_coverage = 0.7;
  double min_precision = 0.8;
};

struct LegImageReport {
  double coverage = 0.0;   // thigh/calf bone pixels that differ from the backdrop
  double precision = 0.0;  // differing pixels that lie near the skeleton or in `allowed`
  bool pass = false;
};

/// Image-level check that the generated legs follow the pose. Pixels set in
/// `exclude` (the pasted shoe) are ignored; pixels set in `allowed` (e.g. the
/// wearable area) may differ from the backdrop freely. Bones are drawn 1 px
/// wide at the image's size.
LegImageReport leg_image_check(const cv::Mat& image, const geom::PoseAnnotation& pose, const cv::Mat& background,
                               const cv::Mat& exclude = cv::Mat(), const cv::Mat& allowed = cv::Mat(),
                               const LegImageConfig& config = {});

// ---- identity ----

/// Max absolute channel difference over pixels where visible_mask != 0.
int id_consistency(const cv::Mat& final_image, const cv::Mat& x_w, const cv::Mat& visible_mask);

// ---- distribution metric ----

struct DistributionScore {
  double mmd2 = 0.0;
  double null_mean = 0.0;
  double null_std = 0.0;
  std::uint64_t feature_seed = 0;
  std::uint64_t permutation_seed = 0;
  int permutations = 0;
};

inline constexpr std::size_t kMinSetSize = 32;

/// Seeded random 3-layer convolution features, one row per image.
std::vector<std::vector<double>> random_features(std::span<const cv::Mat> images, std::uint64_t feature_seed);

/// Unbiased MMD^2 with the cubic polynomial kernel (x.y/d + 1)^3.
double mmd2_unbiased(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);

/// MMD^2 between the feature sets plus a permutation null (pooled sets
/// reshuffled `permutations` times). Throws InvalidArgument for sets smaller
/// than kMinSetSize.
DistributionScore distribution_score(std::span<const cv::Mat> set_a, std::span<const cv::Mat> set_b,
                                     std::uint64_t feature_seed, int permutations = 200,
                                     std::uint64_t permutation_seed = 1);

// ---- diversity ----

/// Per-coordinate sample standard deviation (n - 1) across poses; the result
/// has the same layout as the input vectors.
std::vector<double> diversity(std::span<const geom::NormalizedPose> poses);

nlohmann::json to_json(const PlausibilityReport& r);
nlohmann::json to_json(const LegImageReport& r);
nlohmann::json to_json(const DistributionScore& s);

}  // namespace weargen::eval
