#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "weargen/diffusion.hpp"
#include "weargen/nets.hpp"
#include "weargen/synthworld.hpp"

namespace weargen::sw {

struct SWConfig {
  int resolution = 32;     // generation canvas
  int base_channels = 32;
  int time_dim = 64;
  int emb_dim = 128;
  int train_steps = 1000;  // diffusion T
  double beta_min = 1e-4;
  double beta_max = 0.02;
  int sample_steps = 25;
  double cfg_scale = 7.0;
  bool clip_x0 = true;     // clamp the x0 estimate to the image range at each step
  double cond_dropout = 0.1;
  int base_iterations = 2000;
  int control_iterations = 2000;
  int batch_size = 16;
  double base_learning_rate = 1e-3;
  double control_learning_rate = 5e-4;
  bool use_pose = true;    // false: control branch sees X_w only
};

/// Number of tag slots (floor, tone, shoes, garment).
inline constexpr int kTagSlots = 4;

struct ResBlockImpl : torch::nn::Module {
  ResBlockImpl(int in, int out, int emb_dim);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& emb);
  torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
  torch::nn::Linear emb_proj{nullptr};
};
TORCH_MODULE(ResBlock);

/// Time/tag embedding, stem and encoder blocks. Shared layout between the
/// base network and the control branch.
struct EncoderImpl : torch::nn::Module {
  EncoderImpl(const SWConfig& config);

  struct Output {
    torch::Tensor emb;
    std::vector<torch::Tensor> skips;  // 6 entries, shallow to deep
    torch::Tensor mid;
  };
  /// `tags` int64 [N,4]; `keep` bool [N] (false = unconditional, null token).
  /// `stem_add`, when defined, is added after the stem convolution.
  Output forward(const torch::Tensor& x, const torch::Tensor& t, const torch::Tensor& tags, const torch::Tensor& keep,
                 const torch::Tensor& stem_add = {});

  int time_dim;
  torch::nn::Sequential time_mlp{nullptr};
  torch::nn::Embedding tag_table{nullptr};
  torch::Tensor null_token;
  torch::nn::Conv2d conv_in{nullptr};
  ResBlock rb0{nullptr}, rb1{nullptr}, rb2{nullptr}, mid{nullptr};
  torch::nn::Conv2d down0{nullptr}, down1{nullptr};
};
TORCH_MODULE(Encoder);

/// Tag-conditioned denoiser over RGB images in [-1,1].
struct BaseNetImpl : torch::nn::Module {
  BaseNetImpl(const SWConfig& config);
  /// `residuals` (7 tensors: 6 skips then mid) are added before decoding.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& t, const torch::Tensor& tags,
                        const torch::Tensor& keep, const std::vector<torch::Tensor>& residuals = {});

  Encoder encoder{nullptr};
  std::vector<ResBlock> dec;
  torch::nn::GroupNorm out_norm{nullptr};
  torch::nn::Conv2d out_conv{nullptr};
};
TORCH_MODULE(BaseNet);

/// Trainable copy of the base encoder reading a hint image, with
/// zero-initialised 1x1 projections into the base skips and mid block.
struct ControlNetImpl : torch::nn::Module {
  ControlNetImpl(const SWConfig& config, int hint_channels);
  std::vector<torch::Tensor> forward(const torch::Tensor& x, const torch::Tensor& hint, const torch::Tensor& t,
                                     const torch::Tensor& tags, const torch::Tensor& keep);

  int hint_channels;
  Encoder encoder{nullptr};
  torch::nn::Sequential hint_net{nullptr};
  std::vector<torch::nn::Conv2d> zero_convs;  // 6 skips + mid
};
TORCH_MODULE(ControlNet);

struct SWModel {
  SWConfig config;
  diff::DiffusionSchedule schedule;
  BaseNet base{nullptr};
  ControlNet control{nullptr};  // null for a base-only model

  /// Noise prediction of the full model (base alone when control is null).
  torch::Tensor eps(const torch::Tensor& x, const torch::Tensor& t, const torch::Tensor& tags,
                    const torch::Tensor& keep, const torch::Tensor& hint);
};

/// Conditioning images and tags at the generation resolution.
struct ConditionBundle {
  cv::Mat x_w;  // visible-only shoe
  cv::Mat x_p;  // skeleton raster
  synth::SceneTags tags;
};

/// One SW training row.
struct SWSample {
  cv::Mat worn;
  ConditionBundle cond;
};

/// Builds the training rows from generated scenes: worn image, X_w from the
/// ground-truth mask and X_p from the ground-truth pose, all at `resolution`.
std::vector<SWSample> sw_samples(std::span<const synth::SceneSample> scenes, int resolution);

/// Stacks hint channels: [X_w, X_p] or [X_w] in [0,1].
torch::Tensor hint_tensor(std::span<const ConditionBundle> bundles, bool use_pose);
torch::Tensor tag_tensor(std::span<const synth::SceneTags> tags);

SWModel make_base(const SWConfig& config);
/// Adds a control branch whose encoder is a copy of the base encoder.
void attach_control(SWModel& model);

SWModel pretrain_base(std::span<const SWSample> data, const SWConfig& config, std::uint64_t seed,
                      nets::TrainLog* log = nullptr, const nets::ProgressFn& progress = {});

/// Trains only the control branch on top of a frozen copy of `base`.
SWModel train_sw(const SWModel& base, std::span<const SWSample> data, const SWConfig& config, std::uint64_t seed,
                 nets::TrainLog* log = nullptr, const nets::ProgressFn& progress = {});

/// DDIM + classifier-free guidance. Returns 8-bit images at the model
/// resolution, one per bundle, each chain seeded by its own seed.
std::vector<cv::Mat> generate(SWModel& model, std::span<const ConditionBundle> bundles, double cfg_scale, int steps,
                              std::span<const std::uint64_t> seeds);
cv::Mat generate_one(SWModel& model, const ConditionBundle& bundle, double cfg_scale, int steps, std::uint64_t seed);

/// x_w where visible_mask != 0, generated elsewhere. No blending.
cv::Mat paste_back(const cv::Mat& generated, const cv::Mat& x_w, const cv::Mat& visible_mask);

void save_model(const SWModel& model, const std::filesystem::path& path, std::uint64_t seed);
/// Loads a base-only or full model depending on the checkpoint kind.
SWModel load_model(const std::filesystem::path& path);

/// Copies parameters between modules with identical layouts.
void copy_parameters(torch::nn::Module& dst, const torch::nn::Module& src);

}  // namespace weargen::sw
