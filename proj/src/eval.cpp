#include "weargen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <ATen/CPUGeneratorImpl.h>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "weargen/errors.hpp"
#include "weargen/image_ops.hpp"
#include "weargen/skeleton.hpp"

namespace weargen::eval {

using geom::Joint;
using geom::Point2;

namespace {

struct SideJoints {
  Joint hip, knee, ankle;
};

SideJoints side_joints(geom::Side side) {
  if (side == geom::Side::kLeft) return {Joint::kLeftHip, Joint::kLeftKnee, Joint::kLeftAnkle};
  return {Joint::kRightHip, Joint::kRightKnee, Joint::kRightAnkle};
}

double segment_distance(Point2 p, Point2 a, Point2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

bool near_polygon(const std::vector<Point2>& poly, Point2 p, double tol) {
  if (geom::point_in_polygon(poly, p)) return true;
  if (tol <= 0.0) return false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    if (segment_distance(p, poly[j], poly[i]) <= tol) return true;
  }
  return false;
}

}  // namespace

double knee_deviation_deg(Point2 hip, Point2 knee, Point2 ankle, Point2 forward) {
  const double vx = hip.x - ankle.x, vy = hip.y - ankle.y;
  const double wx = knee.x - ankle.x, wy = knee.y - ankle.y;
  const double angle = std::atan2(std::abs(vx * wy - vy * wx), vx * wx + vy * wy) * 180.0 / std::numbers::pi;
  // Side of the hip-ankle line the knee lies on, measured along `forward`.
  const double vlen2 = vx * vx + vy * vy;
  const double along = vlen2 > 0 ? (wx * vx + wy * vy) / vlen2 : 0.0;
  const double px = wx - along * vx, py = wy - along * vy;
  const double side = px * forward.x + py * forward.y;
  return side >= 0 ? angle : -angle;
}

PlausibilityReport pose_plausibility(const geom::PoseAnnotation& pose, std::span<const geom::ShoeGeometry> shoes,
                                     const PlausibilityConfig& config) {
  PlausibilityReport r;
  if (shoes.empty()) return r;
  r.ankle_in_collar = r.joint_order_ok = r.bone_ratio_ok = r.knee_direction_ok = true;
  for (const auto& shoe : shoes) {
    const auto j = side_joints(shoe.side);
    const auto& hip = pose[j.hip];
    const auto& knee = pose[j.knee];
    const auto& ankle = pose[j.ankle];
    if (!ankle.present || !near_polygon(shoe.collar, {ankle.x, ankle.y}, config.collar_tol_px)) {
      r.ankle_in_collar = false;
    }
    if (!(hip.present && knee.present && ankle.present)) {
      r.joint_order_ok = r.bone_ratio_ok = r.knee_direction_ok = false;
      continue;
    }
    if (!(hip.y < knee.y && knee.y < ankle.y)) r.joint_order_ok = false;
    const double thigh = std::hypot(hip.x - knee.x, hip.y - knee.y);
    const double calf = std::hypot(knee.x - ankle.x, knee.y - ankle.y);
    const double ratio = calf > 0 ? thigh / calf : 0.0;
    if (!(ratio >= config.ratio_min && ratio <= config.ratio_max)) r.bone_ratio_ok = false;
    const double dev = knee_deviation_deg({hip.x, hip.y}, {knee.x, knee.y}, {ankle.x, ankle.y}, shoe.forward);
    if (!(dev >= -config.knee_back_tol_deg && dev <= config.knee_max_deg) || calf == 0.0 || thigh == 0.0) {
      r.knee_direction_ok = false;
    }
  }
  return r;
}

double pass_rate(std::span<const PlausibilityReport> reports) {
  if (reports.empty()) return 0.0;
  const auto n = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.pass(); });
  return static_cast<double>(n) / static_cast<double>(reports.size());
}

LegImageReport leg_image_check(const cv::Mat& image, const geom::PoseAnnotation& pose, const cv::Mat& background,
                               const cv::Mat& exclude, const cv::Mat& allowed, const LegImageConfig& config) {
  if (image.size() != background.size() || image.type() != CV_8UC3 || background.type() != CV_8UC3) {
    throw InvalidArgument("leg_image_check: image and background must be same-size 8-bit colour images");
  }
  for (const cv::Mat* m : {&exclude, &allowed}) {
    if (!m->empty() && (m->size() != image.size() || m->type() != CV_8UC1)) {
      throw InvalidArgument("leg_image_check: masks must be single-channel and match the image");
    }
  }
  if (pose.image_size <= 0) throw InvalidArgument("leg_image_check: pose image size must be positive");
  const double k = static_cast<double>(image.cols) / pose.image_size;
  auto pt = [&](Joint j) {
    return cv::Point(static_cast<int>(std::floor(pose[j].x * k)), static_cast<int>(std::floor(pose[j].y * k)));
  };
  cv::Mat leg_bones = cv::Mat::zeros(image.size(), CV_8UC1);
  cv::Mat all_bones = cv::Mat::zeros(image.size(), CV_8UC1);
  for (const auto& bone : geom::skeleton_bones()) {
    if (!pose[bone.from].present || !pose[bone.to].present) continue;
    cv::line(all_bones, pt(bone.from), pt(bone.to), cv::Scalar(255), 1, cv::LINE_8);
    const bool leg = bone.to == Joint::kLeftKnee || bone.to == Joint::kRightKnee || bone.to == Joint::kLeftAnkle ||
                     bone.to == Joint::kRightAnkle;
    if (leg) cv::line(leg_bones, pt(bone.from), pt(bone.to), cv::Scalar(255), 1, cv::LINE_8);
  }

  cv::Mat diff;
  cv::absdiff(image, background, diff);
  std::vector<cv::Mat> planes;
  cv::split(diff, planes);
  cv::Mat maxdiff = cv::max(cv::max(planes[0], planes[1]), planes[2]);
  cv::Mat fg = maxdiff > config.min_diff;
  if (!exclude.empty()) {
    fg.setTo(cv::Scalar(0), exclude);
    leg_bones.setTo(cv::Scalar(0), exclude);
  }

  const int r = std::max(1, static_cast<int>(std::lround(config.corridor_frac * image.cols)));
  cv::Mat corridor;
  cv::dilate(all_bones, corridor, cv::getStructuringElement(cv::MORPH_ELLIPSE, cv::Size(2 * r + 1, 2 * r + 1)));
  if (!allowed.empty()) corridor |= allowed;

  LegImageReport rep;
  const int bone_px = cv::countNonZero(leg_bones);
  rep.coverage = bone_px ? static_cast<double>(cv::countNonZero(leg_bones & fg)) / bone_px : 0.0;
  const int fg_px = cv::countNonZero(fg);
  rep.precision = fg_px ? static_cast<double>(cv::countNonZero(fg & corridor)) / fg_px : 1.0;
  rep.pass = bone_px > 0 && rep.coverage >= config.min_coverage && rep.precision >= config.min_precision;
  return rep;
}

int id_consistency(const cv::Mat& final_image, const cv::Mat& x_w, const cv::Mat& visible_mask) {
  if (final_image.size() != x_w.size() || final_image.size() != visible_mask.size() ||
      final_image.type() != x_w.type()) {
    throw InvalidArgument("id_consistency: resolution mismatch");
  }
  cv::Mat diff;
  cv::absdiff(final_image, x_w, diff);
  diff = diff.reshape(1, diff.rows * diff.cols);  // one row per pixel
  const cv::Mat mask = visible_mask.reshape(1, visible_mask.rows * visible_mask.cols);
  int best = 0;
  for (int i = 0; i < diff.rows; ++i) {
    if (!mask.at<std::uint8_t>(i, 0)) continue;
    for (int c = 0; c < diff.cols; ++c) best = std::max(best, static_cast<int>(diff.at<std::uint8_t>(i, c)));
  }
  return best;
}

std::vector<std::vector<double>> random_features(std::span<const cv::Mat> images, std::uint64_t feature_seed) {
  torch::NoGradGuard ng;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(feature_seed);
  const std::array<int64_t, 4> widths = {3, 16, 32, 64};
  std::vector<torch::Tensor> weights, biases;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double fan_in = static_cast<double>(widths[l] * 9);
    weights.push_back(torch::randn({widths[l + 1], widths[l], 3, 3}, gen) * std::sqrt(2.0 / fan_in));
    biases.push_back(torch::randn({widths[l + 1]}, gen) * 0.1);
  }
  std::vector<cv::Mat> resized;
  resized.reserve(images.size());
  for (const auto& im : images) {
    if (im.type() != CV_8UC3) throw InvalidArgument("random_features: expected 8-bit colour images");
    resized.push_back(img::resize_image(im, 32));
  }
  std::vector<std::vector<double>> out;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < resized.size(); start += kChunk) {
    const std::size_t end = std::min(resized.size(), start + kChunk);
    auto h = img::to_tensor(std::span<const cv::Mat>(resized.data() + start, end - start));
    std::vector<torch::Tensor> pooled;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      h = torch::relu(torch::conv2d(h, weights[l], biases[l], 2, 1));
      pooled.push_back(h.mean({2, 3}));
    }
    const auto f = torch::cat(pooled, 1).to(torch::kFloat64).contiguous();
    for (int64_t i = 0; i < f.size(0); ++i) {
      const double* row = f[i].data_ptr<double>();
      out.emplace_back(row, row + f.size(1));
    }
  }
  return out;
}

namespace {

double kernel(const std::vector<double>& x, const std::vector<double>& y) {
  const double d = static_cast<double>(x.size());
  const double dot = std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
  const double v = dot / d + 1.0;
  return v * v * v;
}

double mmd2_from_gram(const std::vector<double>& gram, std::size_t n, std::span<const std::size_t> ia,
                      std::span<const std::size_t> ib) {
  auto k = [&](std::size_t i, std::size_t j) { return gram[i * n + j]; };
  const double m = static_cast<double>(ia.size());
  const double q = static_cast<double>(ib.size());
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  for (std::size_t i = 0; i < ia.size(); ++i) {
    for (std::size_t j = 0; j < ia.size(); ++j) {
      if (i != j) kxx += k(ia[i], ia[j]);
    }
  }
  for (std::size_t i = 0; i < ib.size(); ++i) {
    for (std::size_t j = 0; j < ib.size(); ++j) {
      if (i != j) kyy += k(ib[i], ib[j]);
    }
  }
  for (auto i : ia) {
    for (auto j : ib) kxy += k(i, j);
  }
  return kxx / (m * (m - 1.0)) + kyy / (q * (q - 1.0)) - 2.0 * kxy / (m * q);
}

}  // namespace

double mmd2_unbiased(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("mmd2_unbiased: need at least two samples per set");
  std::vector<std::vector<double>> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) gram[i * n + j] = gram[j * n + i] = kernel(pooled[i], pooled[j]);
  }
  std::vector<std::size_t> ia(a.size()), ib(b.size());
  std::iota(ia.begin(), ia.end(), 0);
  std::iota(ib.begin(), ib.end(), a.size());
  return mmd2_from_gram(gram, n, ia, ib);
}

DistributionScore distribution_score(std::span<const cv::Mat> set_a, std::span<const cv::Mat> set_b,
                                     std::uint64_t feature_seed, int permutations, std::uint64_t permutation_seed) {
  if (set_a.size() < kMinSetSize || set_b.size() < kMinSetSize) {
    throw InvalidArgument("distribution_score: each set needs at least 32 images");
  }
  if (permutations < 2) throw InvalidArgument("distribution_score: need at least two permutations");
  auto fa = random_features(set_a, feature_seed);
  auto fb = random_features(set_b, feature_seed);
  std::vector<std::vector<double>> pooled = fa;
  pooled.insert(pooled.end(), fb.begin(), fb.end());
  const std::size_t n = pooled.size();
  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) gram[i * n + j] = gram[j * n + i] = kernel(pooled[i], pooled[j]);
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  DistributionScore s;
  s.feature_seed = feature_seed;
  s.permutation_seed = permutation_seed;
  s.permutations = permutations;
  s.mmd2 = mmd2_from_gram(gram, n, std::span(idx).first(fa.size()), std::span(idx).subspan(fa.size()));

  std::mt19937_64 rng(permutation_seed);
  std::vector<double> null;
  null.reserve(static_cast<std::size_t>(permutations));
  for (int p = 0; p < permutations; ++p) {
    std::shuffle(idx.begin(), idx.end(), rng);
    null.push_back(mmd2_from_gram(gram, n, std::span(idx).first(fa.size()), std::span(idx).subspan(fa.size())));
  }
  const double mean = std::accumulate(null.begin(), null.end(), 0.0) / static_cast<double>(null.size());
  double var = 0.0;
  for (double v : null) var += (v - mean) * (v - mean);
  s.null_mean = mean;
  s.null_std = std::sqrt(var / static_cast<double>(null.size() - 1));
  return s;
}

std::vector<double> diversity(std::span<const geom::NormalizedPose> poses) {
  if (poses.size() < 2) throw InvalidArgument("diversity: need at least two poses");
  const std::size_t d = poses[0].values.size();
  for (const auto& p : poses) {
    if (p.values.size() != d) throw InvalidArgument("diversity: poses have different layouts");
  }
  std::vector<double> out(d);
  const double n = static_cast<double>(poses.size());
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (const auto& p : poses) mean += p.values[k];
    mean /= n;
    double var = 0.0;
    for (const auto& p : poses) var += (p.values[k] - mean) * (p.values[k] - mean);
    out[k] = std::sqrt(var / (n - 1.0));
  }
  return out;
}

nlohmann::json to_json(const PlausibilityReport& r) {
  return {{"ankle_in_collar", r.ankle_in_collar},
          {"joint_order_ok", r.joint_order_ok},
          {"bone_ratio_ok", r.bone_ratio_ok},
          {"knee_direction_ok", r.knee_direction_ok},
          {"pass", r.pass()}};
}

nlohmann::json to_json(const LegImageReport& r) {
  return {{"coverage", r.coverage}, {"precision", r.precision}, {"pass", r.pass}};
}

nlohmann::json to_json(const DistributionScore& s) {
  return {{"mmd2", s.mmd2},
          {"null_mean", s.null_mean},
          {"null_std", s.null_std},
          {"feature_seed", s.feature_seed},
          {"permutation_seed", s.permutation_seed},
          {"permutations", s.permutations}};
}

}  // namespace weargen::eval
