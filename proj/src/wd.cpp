#include "weargen/wd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

#include "weargen/checkpoint.hpp"
#include "weargen/errors.hpp"
#include "weargen/image_ops.hpp"

namespace weargen::wd {

namespace {

void check_config(const WDConfig& c) {
  if (c.classes != 2 && c.classes != 3) throw ConfigError("wd", "wd.classes must be 2 or 3");
  if (c.resolution < 16 || c.resolution % 16 != 0) throw ConfigError("wd", "wd.resolution must be a multiple of 16");
  if (c.base_channels < 1 || c.iterations < 1 || c.batch_size < 1) {
    throw ConfigError("wd", "wd sizes must be positive");
  }
  if (!(c.learning_rate > 0.0)) throw ConfigError("wd", "wd.learning_rate must be positive");
  for (double p : {c.mosaic_prob, c.rotation_prob, c.color_prob, c.scale_prob}) {
    if (p < 0.0 || p > 1.0) throw ConfigError("wd", "wd augmentation probabilities must be in [0,1]");
  }
}

synth::SegSample at_resolution(const synth::SegSample& s, int res) {
  if (s.image.rows == res && s.image.cols == res) return s;
  return {img::resize_image(s.image, res), img::resize_mask(s.mask, res)};
}

}  // namespace

SegModel make_model(const WDConfig& config) {
  check_config(config);
  SegModel m;
  m.config = config;
  m.net = nets::UNet(3, config.classes, config.base_channels, 4, 0);
  return m;
}

int wearable_label(int classes) { return classes == 3 ? synth::kWearable : 1; }

cv::Mat target_labels(const cv::Mat& tri_mask, int classes) {
  if (classes == 3) return tri_mask.clone();
  cv::Mat out = cv::Mat::zeros(tri_mask.size(), CV_8UC1);
  out.setTo(cv::Scalar(1), tri_mask == synth::kWearable);
  return out;
}

synth::SegSample augment(std::span<const synth::SegSample> pool, std::size_t index, const WDConfig& config,
                         std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const int res = config.resolution;

  std::array<synth::SegSample, 4> four;
  four[0] = at_resolution(pool[index], res);
  for (int i = 1; i < 4; ++i) four[static_cast<std::size_t>(i)] = at_resolution(pool[pick(rng)], res);
  synth::SegSample s = synth::mosaic_augment(four, config.mosaic_prob, rng);

  double deg = 0.0, scale = 1.0;
  if (u(rng) < config.rotation_prob) deg = (2.0 * u(rng) - 1.0) * config.rotation_deg;
  if (u(rng) < config.scale_prob) scale = 0.75 + 0.5 * u(rng);
  if (deg != 0.0 || scale != 1.0) {
    const cv::Mat a = img::rotation_about_center(res, deg, scale);
    s.image = img::warp_image(s.image, a);
    s.mask = img::warp_mask(s.mask, a);
  }

  if (u(rng) < config.color_prob) {
    const cv::Vec3d gain(0.8 + 0.4 * u(rng), 0.8 + 0.4 * u(rng), 0.8 + 0.4 * u(rng));
    const double offset = (2.0 * u(rng) - 1.0) * 0.1 * 255.0;
    cv::Mat out = s.image.clone();
    for (int y = 0; y < out.rows; ++y) {
      for (int x = 0; x < out.cols; ++x) {
        auto& px = out.at<cv::Vec3b>(y, x);
        if (px == cv::Vec3b(0, 0, 0)) continue;
        for (int c = 0; c < 3; ++c) px[c] = cv::saturate_cast<std::uint8_t>(px[c] * gain[c] + offset);
      }
    }
    s.image = out;
  }
  return s;
}

SegModel train_wd(std::span<const synth::SegSample> data, const WDConfig& config, std::uint64_t seed,
                  nets::TrainLog* log, const nets::ProgressFn& progress) {
  if (data.empty()) throw InvalidArgument("train_wd: empty dataset");
  check_config(config);
  nets::seed_everything(seed);
  SegModel model = make_model(config);
  model.net->train();

  std::vector<synth::SegSample> pool;
  pool.reserve(data.size());
  for (const auto& s : data) pool.push_back({s.image, target_labels(s.mask, config.classes)});

  std::mt19937_64 rng(seed ^ 0x5744A0F1ULL);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  torch::optim::Adam opt(model.net->parameters(), torch::optim::AdamOptions(config.learning_rate));
  const int decay_at = static_cast<int>(0.7 * config.iterations);
  double smooth = 0.0;

  for (int it = 0; it < config.iterations; ++it) {
    if (it == decay_at) {
      for (auto& g : opt.param_groups()) g.options().set_lr(config.learning_rate * 0.2);
    }
    std::vector<cv::Mat> images, masks;
    for (int b = 0; b < config.batch_size; ++b) {
      auto s = augment(pool, pick(rng), config, rng);
      images.push_back(std::move(s.image));
      masks.push_back(std::move(s.mask));
    }
    const auto x = img::to_tensor(images);
    const auto y = img::masks_to_tensor(masks);
    opt.zero_grad();
    auto loss = torch::nn::functional::cross_entropy(model.net->forward(x), y);
    loss.backward();
    opt.step();
    const double l = loss.item<double>();
    if (log) log->losses.push_back(l);
    smooth = it == 0 ? l : 0.98 * smooth + 0.02 * l;
    if (progress && (it + 1) % 100 == 0) progress(it + 1, smooth);
  }
  model.net->eval();
  return model;
}

std::vector<cv::Mat> segment_batch(SegModel& model, std::span<const cv::Mat> images) {
  torch::NoGradGuard ng;
  model.net->eval();
  std::vector<cv::Mat> out;
  out.reserve(images.size());
  const int res = model.config.resolution;
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t end = std::min(images.size(), start + kChunk);
    std::vector<cv::Mat> resized;
    for (std::size_t i = start; i < end; ++i) {
      if (images[i].type() != CV_8UC3) throw InvalidArgument("segment: expected an 8-bit 3-channel image");
      resized.push_back(img::resize_image(images[i], res));
    }
    const auto labels = model.net->forward(img::to_tensor(resized)).argmax(1);
    for (std::size_t i = start; i < end; ++i) {
      cv::Mat m = img::tensor_to_mask(labels[static_cast<int64_t>(i - start)]);
      if (m.rows != images[i].rows || m.cols != images[i].cols) {
        cv::resize(m, m, images[i].size(), 0, 0, cv::INTER_NEAREST);
      }
      out.push_back(m);
    }
  }
  return out;
}

cv::Mat segment(SegModel& model, const cv::Mat& x_m) {
  std::array<cv::Mat, 1> one = {x_m};
  return segment_batch(model, one)[0];
}

cv::Mat extract_visible(const cv::Mat& x_m, const cv::Mat& tri_mask) {
  if (x_m.size() != tri_mask.size()) throw InvalidArgument("extract_visible: resolution mismatch");
  return img::select_label(x_m, tri_mask, synth::kVisible);
}

SegMetrics segmentation_metrics(std::span<const cv::Mat> predicted, std::span<const cv::Mat> truth, int classes) {
  if (predicted.empty()) throw InvalidArgument("eval_segmentation: empty set");
  if (predicted.size() != truth.size()) throw InvalidArgument("eval_segmentation: count mismatch");
  std::vector<std::int64_t> tp(static_cast<std::size_t>(classes)), fp(tp), fn(tp);
  std::int64_t total = 0, correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const cv::Mat& p = predicted[i];
    const cv::Mat& t = truth[i];
    if (p.size() != t.size()) throw InvalidArgument("eval_segmentation: resolution mismatch");
    for (int y = 0; y < p.rows; ++y) {
      for (int x = 0; x < p.cols; ++x) {
        const int pv = p.at<std::uint8_t>(y, x);
        const int tv = t.at<std::uint8_t>(y, x);
        if (pv >= classes || tv >= classes) throw InvalidArgument("eval_segmentation: label out of range");
        ++total;
        if (pv == tv) {
          ++correct;
          ++tp[static_cast<std::size_t>(pv)];
        } else {
          ++fp[static_cast<std::size_t>(pv)];
          ++fn[static_cast<std::size_t>(tv)];
        }
      }
    }
  }
  SegMetrics m;
  m.classes = classes;
  for (int c = 0; c < classes; ++c) {
    const auto k = static_cast<std::size_t>(c);
    const double union_ = static_cast<double>(tp[k] + fp[k] + fn[k]);
    const double gt = static_cast<double>(tp[k] + fn[k]);
    m.iou.push_back(union_ > 0 ? 100.0 * static_cast<double>(tp[k]) / union_ : 100.0);
    m.acc.push_back(gt > 0 ? 100.0 * static_cast<double>(tp[k]) / gt : 100.0);
  }
  for (int c = 0; c < classes; ++c) {
    m.miou += m.iou[static_cast<std::size_t>(c)] / classes;
    m.macc += m.acc[static_cast<std::size_t>(c)] / classes;
  }
  m.aacc = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  return m;
}

SegMetrics eval_segmentation(SegModel& model, std::span<const synth::SegSample> data) {
  if (data.empty()) throw InvalidArgument("eval_segmentation: empty set");
  std::vector<cv::Mat> images, truth;
  for (const auto& s : data) {
    images.push_back(s.image);
    truth.push_back(target_labels(s.mask, model.config.classes));
  }
  const auto pred = segment_batch(model, images);
  return segmentation_metrics(pred, truth, model.config.classes);
}

std::string format_metrics(const SegMetrics& m) {
  static const char* kNames3[] = {"background", "visible", "wearable"};
  static const char* kNames2[] = {"other", "wearable"};
  std::string out;
  char buf[160];
  out += "class        IoU     Acc\n";
  for (int c = 0; c < m.classes; ++c) {
    std::snprintf(buf, sizeof(buf), "%-10s %6.2f  %6.2f\n", m.classes == 3 ? kNames3[c] : kNames2[c],
                  m.iou[static_cast<std::size_t>(c)], m.acc[static_cast<std::size_t>(c)]);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "mIoU %6.2f  mAcc %6.2f  aAcc %6.2f\n", m.miou, m.macc, m.aacc);
  out += buf;
  return out;
}

void save_model(const SegModel& model, const std::filesystem::path& path, std::uint64_t seed) {
  const auto& c = model.config;
  nlohmann::json meta = {{"kind", "wd"},           {"classes", c.classes},
                         {"resolution", c.resolution}, {"base_channels", c.base_channels},
                         {"iterations", c.iterations}, {"seed", seed}};
  ckpt::save(path, meta, *model.net);
}

SegModel load_model(const std::filesystem::path& path) {
  const auto ck = ckpt::load(path);
  if (ck.meta.value("kind", "") != "wd") throw InvalidArgument("not a wd checkpoint: " + path.string());
  WDConfig c;
  c.classes = ck.meta.at("classes").get<int>();
  c.resolution = ck.meta.at("resolution").get<int>();
  c.base_channels = ck.meta.at("base_channels").get<int>();
  c.iterations = ck.meta.value("iterations", c.iterations);
  SegModel m = make_model(c);
  ckpt::load_into(*m.net, ck);
  m.net->eval();
  return m;
}

std::vector<synth::SegSample> seg_pairs(std::span<const synth::SceneSample> scenes) {
  std::vector<synth::SegSample> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back({s.shoe_only, s.tri_mask});
  return out;
}

}  // namespace weargen::wd
