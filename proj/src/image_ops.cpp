#include "weargen/image_ops.hpp"

#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "weargen/errors.hpp"

namespace weargen::img {

cv::Mat read_png(const std::filesystem::path& path, bool grayscale) {
  cv::Mat m = cv::imread(path.string(), grayscale ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
  if (m.empty()) throw IoError("cannot read image " + path.string());
  return m;
}

void write_png(const std::filesystem::path& path, const cv::Mat& image) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), image, {cv::IMWRITE_PNG_COMPRESSION, 6});
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write image " + path.string());
}

torch::Tensor to_tensor(std::span<const cv::Mat> images, double scale, double offset) {
  if (images.empty()) return torch::empty({0});
  const int h = images[0].rows;
  const int w = images[0].cols;
  const int c = images[0].channels();
  auto out = torch::empty({static_cast<int64_t>(images.size()), c, h, w}, torch::kFloat32);
  auto acc = out.accessor<float, 4>();
  const float k = static_cast<float>(scale / 255.0);
  const float o = static_cast<float>(offset);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const cv::Mat& m = images[n];
    if (m.rows != h || m.cols != w || m.channels() != c || m.depth() != CV_8U) {
      throw InvalidArgument("to_tensor: images must share size and be 8-bit");
    }
    for (int y = 0; y < h; ++y) {
      const auto* row = m.ptr<std::uint8_t>(y);
      for (int x = 0; x < w; ++x) {
        for (int ch = 0; ch < c; ++ch) acc[static_cast<int64_t>(n)][ch][y][x] = row[x * c + ch] * k + o;
      }
    }
  }
  return out;
}

torch::Tensor to_tensor(const cv::Mat& image, double scale, double offset) {
  return to_tensor(std::span<const cv::Mat>(&image, 1), scale, offset)[0];
}

cv::Mat to_image(const torch::Tensor& chw, double scale, double offset) {
  auto t = chw.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  if (t.dim() != 3) throw InvalidArgument("to_image: expected [C, H, W]");
  const int c = static_cast<int>(t.size(0));
  const int h = static_cast<int>(t.size(1));
  const int w = static_cast<int>(t.size(2));
  cv::Mat m(h, w, CV_8UC(c));
  auto acc = t.accessor<float, 3>();
  for (int y = 0; y < h; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        const double v = (acc[ch][y][x] - offset) / scale * 255.0;
        row[x * c + ch] = cv::saturate_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return m;
}

torch::Tensor masks_to_tensor(std::span<const cv::Mat> masks) {
  if (masks.empty()) return torch::empty({0}, torch::kLong);
  const int h = masks[0].rows;
  const int w = masks[0].cols;
  auto out = torch::empty({static_cast<int64_t>(masks.size()), h, w}, torch::kLong);
  auto acc = out.accessor<int64_t, 3>();
  for (std::size_t n = 0; n < masks.size(); ++n) {
    const cv::Mat& m = masks[n];
    if (m.rows != h || m.cols != w || m.type() != CV_8UC1) {
      throw InvalidArgument("masks_to_tensor: masks must be single-channel 8-bit of equal size");
    }
    for (int y = 0; y < h; ++y) {
      const auto* row = m.ptr<std::uint8_t>(y);
      for (int x = 0; x < w; ++x) acc[static_cast<int64_t>(n)][y][x] = row[x];
    }
  }
  return out;
}

cv::Mat tensor_to_mask(const torch::Tensor& hw) {
  auto t = hw.detach().to(torch::kCPU, torch::kLong).contiguous();
  if (t.dim() != 2) throw InvalidArgument("tensor_to_mask: expected [H, W]");
  const int h = static_cast<int>(t.size(0));
  const int w = static_cast<int>(t.size(1));
  cv::Mat m(h, w, CV_8UC1);
  auto acc = t.accessor<int64_t, 2>();
  for (int y = 0; y < h; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) row[x] = static_cast<std::uint8_t>(acc[y][x]);
  }
  return m;
}

cv::Mat resize_image(const cv::Mat& image, int size) {
  if (image.rows == size && image.cols == size) return image.clone();
  cv::Mat out;
  const int interp = size < image.rows ? cv::INTER_AREA : cv::INTER_LINEAR;
  cv::resize(image, out, cv::Size(size, size), 0, 0, interp);
  return out;
}

cv::Mat resize_mask(const cv::Mat& mask, int size) {
  if (mask.rows == size && mask.cols == size) return mask.clone();
  cv::Mat out;
  cv::resize(mask, out, cv::Size(size, size), 0, 0, cv::INTER_NEAREST);
  return out;
}

cv::Mat rotation_about_center(int size, double degrees, double scale) {
  const double c = (size - 1) / 2.0;
  return cv::getRotationMatrix2D(cv::Point2d(c, c), degrees, scale);
}

cv::Mat warp_image(const cv::Mat& image, const cv::Mat& affine) {
  cv::Mat out;
  cv::warpAffine(image, out, affine, image.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar::all(0));
  return out;
}

cv::Mat warp_mask(const cv::Mat& mask, const cv::Mat& affine) {
  cv::Mat inv;
  cv::invertAffineTransform(affine, inv);
  inv.convertTo(inv, CV_64F);
  const double* m = inv.ptr<double>(0);
  cv::Mat out(mask.size(), CV_8UC1, cv::Scalar(0));
  for (int y = 0; y < mask.rows; ++y) {
    auto* row = out.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.cols; ++x) {
      const long sx = std::lround(m[0] * x + m[1] * y + m[2]);
      const long sy = std::lround(m[3] * x + m[4] * y + m[5]);
      if (sx < 0 || sy < 0 || sx >= mask.cols || sy >= mask.rows) continue;
      row[x] = mask.at<std::uint8_t>(static_cast<int>(sy), static_cast<int>(sx));
    }
  }
  return out;
}

cv::Mat select_label(const cv::Mat& src, const cv::Mat& mask, int label) {
  if (src.size() != mask.size()) throw InvalidArgument("select_label: resolution mismatch");
  cv::Mat out(src.size(), src.type(), cv::Scalar::all(0));
  src.copyTo(out, mask == label);
  return out;
}

}  // namespace weargen::img
