#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>

#include <opencv2/core.hpp>

#include "weargen/nets.hpp"
#include "weargen/synthworld.hpp"

namespace weargen::wd {

struct WDConfig {
  int classes = 3;  // 3 = {background, visible, wearable}; 2 = {other, wearable}
  int resolution = 64;
  int base_channels = 16;
  int iterations = 400;
  int batch_size = 16;
  double learning_rate = 2e-3;
  double mosaic_prob = 0.8;
  double rotation_prob = 0.5;
  double rotation_deg = 15.0;
  double color_prob = 0.5;
  double scale_prob = 0.5;
};

struct SegModel {
  WDConfig config;
  nets::UNet net{nullptr};
};

SegModel make_model(const WDConfig& config);

/// Maps a 3-class TriMask to the training target of a `classes`-way model.
cv::Mat target_labels(const cv::Mat& tri_mask, int classes);

/// Label id of the wearable class for a `classes`-way model.
int wearable_label(int classes);

/// One augmented training example: mosaic with three extra samples, then
/// rotation / scale (one shared affine for image and mask), then colour gain
/// and offset on non-black pixels.
synth::SegSample augment(std::span<const synth::SegSample> pool, std::size_t index, const WDConfig& config,
                         std::mt19937_64& rng);

/// Trains on (shoe_only, TriMask) pairs. Throws InvalidArgument on an empty set.
SegModel train_wd(std::span<const synth::SegSample> data, const WDConfig& config, std::uint64_t seed,
                  nets::TrainLog* log = nullptr, const nets::ProgressFn& progress = {});

/// Argmax label map at the input's resolution.
cv::Mat segment(SegModel& model, const cv::Mat& x_m);
std::vector<cv::Mat> segment_batch(SegModel& model, std::span<const cv::Mat> images);

/// Copies pixels labelled visible from x_m onto black.
cv::Mat extract_visible(const cv::Mat& x_m, const cv::Mat& tri_mask);

struct SegMetrics {
  int classes = 3;
  std::vector<double> iou;  // per class, x100
  std::vector<double> acc;
  double miou = 0.0, macc = 0.0, aacc = 0.0;
};

/// Metrics from predicted vs ground-truth label maps (same class space).
SegMetrics segmentation_metrics(std::span<const cv::Mat> predicted, std::span<const cv::Mat> truth, int classes);

/// Runs the model over `data` and scores against target_labels(tri_mask).
SegMetrics eval_segmentation(SegModel& model, std::span<const synth::SegSample> data);

/// Plain-text table: per-class IoU and Acc, then mIoU, mAcc, aAcc.
std::string format_metrics(const SegMetrics& m);

void save_model(const SegModel& model, const std::filesystem::path& path, std::uint64_t seed);
SegModel load_model(const std::filesystem::path& path);

/// Shoe-only images and tri-masks of scene samples, in order.
std::vector<synth::SegSample> seg_pairs(std::span<const synth::SceneSample> scenes);

}  // namespace weargen::wd
