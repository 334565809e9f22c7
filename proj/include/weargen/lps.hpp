#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "weargen/diffusion.hpp"
#include "weargen/geometry.hpp"
#include "weargen/heatmap.hpp"
#include "weargen/nets.hpp"

namespace weargen::lps {

// ---- phase 1: foot keypoints from X_w ----

struct FootConfig {
  int resolution = 64;  // network input side
  int base_channels = 16;
  double sigma = 2.0;   // heatmap Gaussian std, heatmap pixels
  int iterations = 3000;
  int batch_size = 16;
  double learning_rate = 2e-3;
  double rotation_prob = 0.5;
  double rotation_deg = 15.0;
  double scale_prob = 0.5;
  double scale_min = 0.75;
  double scale_max = 1.25;
};

struct FootModel {
  FootConfig config;
  nets::UNet net{nullptr};  // image -> 8 heatmaps at input resolution
};

/// Training pair: visible-only shoe image and the pose carrying its foot points.
struct FootSample {
  cv::Mat x_w;
  geom::PoseAnnotation pose;
};

FootModel make_foot_model(const FootConfig& config);

/// Rotation / rescale-and-crop / pad augmentation, applied identically to the
/// image and the keypoints. Transforms that would push a present foot point
/// off the canvas are skipped.
FootSample augment_foot(const FootSample& s, const FootConfig& config, std::mt19937_64& rng);

FootModel train_foot_estimator(std::span<const FootSample> data, const FootConfig& config, std::uint64_t seed,
                               nets::TrainLog* log = nullptr, const nets::ProgressFn& progress = {});

/// Foot-subset pose (other slots absent) in the coordinates of `x_w`.
geom::PoseAnnotation estimate_foot(FootModel& model, const cv::Mat& x_w);
std::vector<geom::PoseAnnotation> estimate_foot_batch(FootModel& model, std::span<const cv::Mat> images);

struct FootMetrics {
  double pck = 0.0;
  double presence_accuracy = 0.0;
  std::size_t evaluated_points = 0;  // truth-present points
};

/// PCK@alpha: fraction of truth-present foot points predicted present within
/// alpha * image side. Presence accuracy: fraction of the 8 slots per sample
/// whose presence matches.
FootMetrics foot_metrics(std::span<const geom::PoseAnnotation> predicted, std::span<const geom::PoseAnnotation> truth,
                         double alpha = 0.1);

void save_foot_model(const FootModel& model, const std::filesystem::path& path, std::uint64_t seed);
FootModel load_foot_model(const std::filesystem::path& path);

// ---- phase 2: leg keypoints by coordinate diffusion ----

struct LegConfig {
  int hidden = 256;
  int layers = 4;
  int time_dim = 64;
  int train_steps = 1000;  // diffusion T
  double beta_min = 1e-4;
  double beta_max = 0.02;
  int sample_steps = 25;   // DDIM steps
  int iterations = 3000;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double rotation_prob = 0.5;
  double rotation_deg = 15.0;
};

inline constexpr int kLegDim = 12;
inline constexpr int kFootDim = 16;

struct LegDenoiserImpl : torch::nn::Module {
  LegDenoiserImpl(int hidden, int layers, int time_dim);
  /// x_t [N,12], t int64 [N], c_p [N,16] -> predicted noise [N,12].
  torch::Tensor forward(const torch::Tensor& x_t, const torch::Tensor& t, const torch::Tensor& c_p);

  int time_dim;
  torch::nn::Sequential mlp{nullptr};
};
TORCH_MODULE(LegDenoiser);

struct LegDiffusionModel {
  LegConfig config;
  diff::DiffusionSchedule schedule;
  LegDenoiser net{nullptr};
};

LegDiffusionModel make_leg_model(const LegConfig& config);

/// Joint rotation of all keypoints about the canvas centre, skipped when a
/// present point would leave the canvas; then normalisation to (L_0, C_p).
std::pair<std::vector<double>, std::vector<double>> leg_training_pair(const geom::PoseAnnotation& pose,
                                                                       const LegConfig& config, std::mt19937_64& rng);

LegDiffusionModel train_leg_diffusion(std::span<const geom::PoseAnnotation> poses, const LegConfig& config,
                                      std::uint64_t seed, nets::TrainLog* log = nullptr,
                                      const nets::ProgressFn& progress = {});

/// Mean squared noise-prediction error on a fixed (x0, t, eps, c_p) batch.
torch::Tensor leg_loss(LegDiffusionModel& model, const torch::Tensor& x0, const torch::Tensor& t,
                       const torch::Tensor& eps, const torch::Tensor& c_p);

/// DDIM chain from seeded Gaussian noise; result clamped to [0,1]^12.
geom::NormalizedPose sample_leg_pose(LegDiffusionModel& model, const geom::NormalizedPose& c_p, int steps,
                                     std::uint64_t seed);

/// Batched form: one seed per row (noise drawn per row from its own seed).
std::vector<geom::NormalizedPose> sample_leg_poses(LegDiffusionModel& model,
                                                   std::span<const geom::NormalizedPose> c_p, int steps,
                                                   std::span<const std::uint64_t> seeds);

/// Foot slots from c_p, hips and knees from l0_prime, ankles from c_p. A side
/// is present iff its ankle is present in c_p; coordinates are clamped into
/// the canvas.
geom::PoseAnnotation compose_pose(const geom::NormalizedPose& c_p, const geom::NormalizedPose& l0_prime, int s);

void save_leg_model(const LegDiffusionModel& model, const std::filesystem::path& path, std::uint64_t seed);
LegDiffusionModel load_leg_model(const std::filesystem::path& path);

}  // namespace weargen::lps
