#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "weargen/geometry.hpp"

namespace weargen::synth {

/// Per-pixel classes of a TriMask.
enum Label : std::uint8_t { kBackground = 0, kVisible = 1, kWearable = 2 };

/// Categorical scene tags; these are the tokens of the scene condition.
struct SceneTags {
  int floor = 0;    // wood, tile, carpet
  int tone = 0;     // light, warm, cool
  int shoes = 0;    // one, two
  int garment = 0;  // jeans, trousers, bare

  bool operator==(const SceneTags&) const = default;
};

/// Tag vocabulary: slot names and the values each slot takes.
struct TagSlot {
  std::string_view name;
  std::span<const std::string_view> values;
};
std::span<const TagSlot> tag_vocabulary();
std::array<int, 4> tag_indices(const SceneTags& tags);
std::string tags_to_string(const SceneTags& tags);  // "floor=wood,tone=light,shoes=one,garment=jeans"
SceneTags tags_from_string(const std::string& s);

struct ShoeSpec {
  geom::Side side = geom::Side::kRight;
  double length = 0.0;
  double heel_height = 0.0;
  double band_radius = 0.0;  // wearable band radius around the collar opening
  std::vector<geom::Point2> sole;
  std::vector<geom::Point2> upper;
  std::vector<geom::Point2> collar;
  geom::Point2 collar_back, collar_front;
  std::vector<geom::Point2> logo;
  cv::Vec3b upper_color, sole_color, logo_color;
  geom::Point2 forward;
  geom::Point2 ankle, heel, big_toe, small_toe;

  geom::ShoeGeometry geometry() const;
};

struct LegSpec {
  geom::Point2 hip, knee, ankle;
  double thigh_length = 0.0;
  double calf_length = 0.0;
  double hip_angle = 0.0;   // thigh direction from vertical, forward-positive
  double knee_angle = 0.0;  // bend between thigh and calf, [0, 2.6]
  double thigh_width = 0.0;
  double calf_width = 0.0;
  cv::Vec3b garment_color, skin_color;
};

struct SceneConfig {
  int canvas = 64;
  double two_shoe_prob = 0.5;
  double max_knee_bend = 0.7;        // radians
  double calf_tilt_min_deg = -6.0;   // calf lean from vertical, forward-positive
  double calf_tilt_max_deg = 18.0;
  double shoe_tilt_deg = 6.0;
  double band_radius_frac = 0.14;    // of shoe length
  double horizon_frac = 0.6;
};

struct SceneSample {
  std::uint64_t seed = 0;
  SceneTags tags;
  cv::Mat worn;       // CV_8UC3, leg over shoe
  cv::Mat unworn;     // CV_8UC3, shoe on background (raw X)
  cv::Mat shoe_only;  // CV_8UC3, shoe on black (X_m)
  cv::Mat tri_mask;   // CV_8UC1 in {0,1,2}
  geom::PoseAnnotation pose;
  std::vector<ShoeSpec> shoes;
  std::vector<LegSpec> legs;
  std::vector<geom::ShoeGeometry> geometry;
  cv::Mat layout = cv::Mat::eye(2, 3, CV_64F);
};

/// Per-record seed, independent of iteration order.
std::uint64_t record_seed(std::uint64_t global_seed, std::uint64_t index);

/// Pure function of (seed, config).
SceneSample sample_scene(std::uint64_t seed, const SceneConfig& config);

/// Tag-determined backdrop (wall above the horizon, floor below).
cv::Mat render_background(const SceneTags& tags, int canvas, double horizon_frac = 0.6);

/// Generates records [first, first + n) of the stream keyed by global_seed.
std::vector<SceneSample> generate_samples(const SceneConfig& config, std::uint64_t global_seed, std::size_t n,
                                          std::size_t first = 0);

struct ManifestRow {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  SceneTags tags;
  bool operator==(const ManifestRow&) const = default;
};

/// Writes `<out>/{worn,unworn,shoe_only,trimask,pose}/<index>.{png,json}` and
/// `<out>/manifest`. Throws IoError if the location is not writable.
std::vector<ManifestRow> generate_dataset(const SceneConfig& config, std::uint64_t global_seed, std::size_t n,
                                          const std::filesystem::path& out_dir);

std::vector<ManifestRow> read_manifest(const std::filesystem::path& dataset_dir);
SceneSample load_record(const std::filesystem::path& dataset_dir, const ManifestRow& row);
std::vector<SceneSample> load_dataset(const std::filesystem::path& dataset_dir, std::size_t limit = 0);

std::string record_name(std::size_t index);

/// Image + label map pair used for segmentation training.
struct SegSample {
  cv::Mat image;
  cv::Mat mask;
};

/// Same affine for image (bilinear) and mask (nearest). Throws InvalidArgument
/// for a singular transform and OutOfBounds if shoe pixels would leave the canvas.
SegSample apply_layout(const cv::Mat& shoe_only, const cv::Mat& tri_mask, const cv::Mat& affine);

/// With probability p, 2x2 composite of the four inputs around a random split
/// point (each quadrant copied from the same location of its source);
/// otherwise returns samples[0].
SegSample mosaic_augment(std::span<const SegSample> samples, double p, std::mt19937_64& rng);

/// Composite with an explicit split point; the quadrants are TL=0, TR=1, BL=2, BR=3.
SegSample mosaic_compose(std::span<const SegSample> samples, int split_x, int split_y);

}  // namespace weargen::synth
