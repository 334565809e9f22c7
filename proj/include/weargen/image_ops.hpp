#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace weargen::img {

/// Lossless PNG I/O. Throws IoError.
cv::Mat read_png(const std::filesystem::path& path, bool grayscale = false);
void write_png(const std::filesystem::path& path, const cv::Mat& image);

/// Stacks 8-bit images into [N, C, H, W] float in [0,1] (offset=0) or [-1,1]
/// (offset=-1 with scale 2). Channel order is kept as stored (BGR).
torch::Tensor to_tensor(std::span<const cv::Mat> images, double scale = 1.0, double offset = 0.0);
torch::Tensor to_tensor(const cv::Mat& image, double scale = 1.0, double offset = 0.0);

/// Inverse of to_tensor for a single [C, H, W] tensor; values are rounded and saturated.
cv::Mat to_image(const torch::Tensor& chw, double scale = 1.0, double offset = 0.0);

/// Label maps to [N, H, W] int64.
torch::Tensor masks_to_tensor(std::span<const cv::Mat> masks);
cv::Mat tensor_to_mask(const torch::Tensor& hw);

cv::Mat resize_image(const cv::Mat& image, int size);
cv::Mat resize_mask(const cv::Mat& mask, int size);

/// 2x3 rotation+scale around the pixel-grid centre of a square canvas.
cv::Mat rotation_about_center(int size, double degrees, double scale = 1.0);

/// Bilinear warp with black border for images, nearest-neighbour with label 0
/// border for masks. Both interpret `affine` as the forward (source->dest) map.
cv::Mat warp_image(const cv::Mat& image, const cv::Mat& affine);
cv::Mat warp_mask(const cv::Mat& mask, const cv::Mat& affine);

/// Copies `src` pixels where `mask == label` onto a black canvas.
cv::Mat select_label(const cv::Mat& src, const cv::Mat& mask, int label);

}  // namespace weargen::img
