#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "weargen/config.hpp"
#include "weargen/geometry.hpp"
#include "weargen/lps.hpp"
#include "weargen/sw.hpp"
#include "weargen/synthworld.hpp"
#include "weargen/wd.hpp"

namespace weargen::pipe {

/// Rotation and scale about the canvas centre, then translation in pixels.
struct Layout {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  bool is_identity() const;
  cv::Mat affine(int size) const;
};

Layout layout_from_config(const cfg::PipelineConfig& config);
nlohmann::json to_json(const Layout& layout);
Layout layout_from_json(const nlohmann::json& j);

/// Everything a run produces, in memory.
struct RunOutput {
  cv::Mat x_m;        // after layout
  cv::Mat tri_mask;   // WD prediction, 3-class label space
  cv::Mat x_w;
  geom::PoseAnnotation c_p;   // foot subset at input resolution
  geom::NormalizedPose l0_prime;
  geom::PoseAnnotation pose;  // composed
  cv::Mat x_p;        // at SW resolution
  cv::Mat raw;        // generated, at SW resolution
  cv::Mat final_image;  // X', at input resolution
  int id_consistency = -1;
};

/// Per-run seeds derived from the run seed.
std::uint64_t leg_seed(std::uint64_t run_seed);
std::uint64_t generation_seed(std::uint64_t run_seed);

/// Loaded stage models. Construction throws ConfigError naming the stage
/// whose checkpoint is missing.
class Pipeline {
 public:
  /// `no_pose` selects the shoe-only SW ablation checkpoint; `two_class`
  /// the 2-class WD checkpoint.
  explicit Pipeline(cfg::PipelineConfig config, bool no_pose = false, bool two_class = false);

  const cfg::PipelineConfig& config() const { return config_; }
  bool no_pose() const { return no_pose_; }
  bool two_class() const { return two_class_; }

  /// Runs every stage on an already laid-out X_m. Throws StageError("wd")
  /// when no visible shoe pixel is predicted.
  RunOutput run(const cv::Mat& x_m, const synth::SceneTags& tags, std::uint64_t seed);

  /// Applies `layout` to X_m (nonzero pixels as its mask) first; identity
  /// skips the warp.
  RunOutput run_with_layout(const cv::Mat& x_m, const synth::SceneTags& tags, std::uint64_t seed,
                            const Layout& layout);

  /// Same stages over several inputs with batched network calls. Results can
  /// differ from run() in low-order float bits; records are replayed with run().
  std::vector<RunOutput> run_batch(const std::vector<cv::Mat>& x_m, const std::vector<synth::SceneTags>& tags,
                                   const std::vector<std::uint64_t>& seeds);

  wd::SegModel& wd_model() { return wd_; }
  lps::FootModel& foot_model() { return foot_; }
  lps::LegDiffusionModel& leg_model() { return leg_; }
  sw::SWModel& sw_model() { return sw_; }

 private:
  cfg::PipelineConfig config_;
  bool no_pose_ = false;
  bool two_class_ = false;
  wd::SegModel wd_;
  lps::FootModel foot_;
  lps::LegDiffusionModel leg_;
  sw::SWModel sw_;
};

/// 255 where any channel is nonzero (the shoe of an X_m image).
cv::Mat nonzero_mask(const cv::Mat& image);

/// Visible-area mask (255/0) of a WD prediction, restricted to shoe pixels
/// (X_m has its background removed). For the 2-class model the visible area
/// is every shoe pixel not labelled wearable.
cv::Mat visible_mask(const cv::Mat& seg, const cv::Mat& x_m, int classes);

/// Label map in the 3-class space from a prediction of either model; black
/// X_m pixels are background.
cv::Mat to_tri_mask(const cv::Mat& seg, const cv::Mat& x_m, int classes);

/// Metrics computed from a run's outputs. `geometry` enables the pose oracle
/// (synthetic inputs only).
nlohmann::json run_metrics(const RunOutput& out, const synth::SceneTags& tags,
                           const std::vector<geom::ShoeGeometry>* geometry, const cfg::PipelineConfig& config);

/// Optional extra information persisted with a run.
struct RunInputs {
  cv::Mat x_m;
  synth::SceneTags tags;
  std::uint64_t seed = 0;
  Layout layout;
  std::optional<std::vector<geom::ShoeGeometry>> geometry;
  std::string source;  // free-form reference to the input shoe
};

/// Runs and persists runs/<id>/{inputs,intermediates,outputs,metrics} plus
/// record.json. Returns the record.
nlohmann::json run_and_persist(Pipeline& pipeline, const RunInputs& inputs, const std::filesystem::path& run_dir);

/// Writes a finished run. `variant` records which checkpoints produced it
/// ({"no_pose": bool, "two_class": bool}).
nlohmann::json persist_run(const RunOutput& out, const RunInputs& inputs, const cfg::PipelineConfig& config,
                           const nlohmann::json& variant, const std::filesystem::path& run_dir);

/// Recomputes metrics of a finished run directory from its persisted files
/// and rewrites metrics/metrics.json. Returns the metrics.
nlohmann::json evaluate_run(const std::filesystem::path& run_dir);

/// Reads the inputs and config snapshot of a finished run, as needed to
/// reproduce it.
RunInputs load_run_inputs(const std::filesystem::path& run_dir);
cfg::PipelineConfig load_run_config(const std::filesystem::path& run_dir);

}  // namespace weargen::pipe
