#include "weargen/lps.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <ATen/CPUGeneratorImpl.h>

#include "weargen/checkpoint.hpp"
#include "weargen/errors.hpp"
#include "weargen/image_ops.hpp"

namespace weargen::lps {

using geom::Joint;
using geom::PoseAnnotation;
using geom::Subset;

namespace {

void check_foot_config(const FootConfig& c) {
  if (c.resolution < 16 || c.resolution % 16 != 0) throw ConfigError("lps1", "lps1.resolution must be a multiple of 16");
  if (c.base_channels < 1 || c.iterations < 1 || c.batch_size < 1) throw ConfigError("lps1", "lps1 sizes must be positive");
  if (!(c.sigma > 0.0)) throw ConfigError("lps1", "lps1.sigma must be positive");
  if (!(c.learning_rate > 0.0)) throw ConfigError("lps1", "lps1.learning_rate must be positive");
  if (!(c.scale_min > 0.0 && c.scale_min <= c.scale_max)) throw ConfigError("lps1", "lps1 scale range is invalid");
}

void check_leg_config(const LegConfig& c) {
  if (c.hidden < 1 || c.layers < 1 || c.iterations < 1 || c.batch_size < 1) {
    throw ConfigError("lps2", "lps2 sizes must be positive");
  }
  if (c.time_dim < 2 || c.time_dim % 2 != 0) throw ConfigError("lps2", "lps2.time_dim must be even");
  if (c.train_steps < 1 || c.sample_steps < 1) throw ConfigError("lps2", "lps2 step counts must be positive");
  if (!(c.learning_rate > 0.0)) throw ConfigError("lps2", "lps2.learning_rate must be positive");
}

bool all_inside(const PoseAnnotation& p) {
  for (const auto& kp : p.keypoints) {
    if (kp.present && !(kp.x >= 0.0 && kp.x < p.image_size && kp.y >= 0.0 && kp.y < p.image_size)) return false;
  }
  return true;
}

PoseAnnotation apply_affine(const PoseAnnotation& pose, const cv::Mat& a) {
  PoseAnnotation out = pose;
  for (auto& kp : out.keypoints) {
    if (!kp.present) continue;
    const double x = kp.x, y = kp.y;
    kp.x = a.at<double>(0, 0) * x + a.at<double>(0, 1) * y + a.at<double>(0, 2);
    kp.y = a.at<double>(1, 0) * x + a.at<double>(1, 1) * y + a.at<double>(1, 2);
  }
  return out;
}

PoseAnnotation foot_only(const PoseAnnotation& pose) {
  PoseAnnotation out;
  out.image_size = pose.image_size;
  for (Joint j : geom::subset_joints(Subset::kFoot)) out[j] = pose[j];
  return out;
}

torch::Tensor to_tensor(const std::vector<double>& v) {
  return torch::tensor(std::vector<float>(v.begin(), v.end()), torch::kFloat32);
}

}  // namespace

// ---- phase 1 ----

FootModel make_foot_model(const FootConfig& config) {
  check_foot_config(config);
  FootModel m;
  m.config = config;
  m.net = nets::UNet(3, static_cast<int>(geom::subset_joints(Subset::kFoot).size()), config.base_channels, 4, 0);
  return m;
}

FootSample augment_foot(const FootSample& s, const FootConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int res = config.resolution;
  FootSample out{img::resize_image(s.x_w, res), geom::rescale_pose(s.pose, res)};
  double deg = 0.0, scale = 1.0;
  if (u(rng) < config.rotation_prob) deg = (2.0 * u(rng) - 1.0) * config.rotation_deg;
  if (u(rng) < config.scale_prob) scale = config.scale_min + (config.scale_max - config.scale_min) * u(rng);
  if (deg == 0.0 && scale == 1.0) return out;
  // Scale-up crops and scale-down pads around the canvas centre.
  const cv::Mat a = img::rotation_about_center(res, deg, scale);
  PoseAnnotation moved = apply_affine(out.pose, a);
  if (!all_inside(moved)) return out;
  out.x_w = img::warp_image(out.x_w, a);
  out.pose = moved;
  return out;
}

FootModel train_foot_estimator(std::span<const FootSample> data, const FootConfig& config, std::uint64_t seed,
                               nets::TrainLog* log, const nets::ProgressFn& progress) {
  if (data.empty()) throw InvalidArgument("train_foot_estimator: empty dataset");
  check_foot_config(config);
  nets::seed_everything(seed);
  FootModel model = make_foot_model(config);
  model.net->train();
  std::mt19937_64 rng(seed ^ 0xF0075EEDULL);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  torch::optim::Adam opt(model.net->parameters(), torch::optim::AdamOptions(config.learning_rate));
  const int decay_at = static_cast<int>(0.7 * config.iterations);
  const int res = config.resolution;
  const auto channels = static_cast<int64_t>(geom::subset_joints(Subset::kFoot).size());
  double smooth = 0.0;

  for (int it = 0; it < config.iterations; ++it) {
    if (it == decay_at) {
      for (auto& g : opt.param_groups()) g.options().set_lr(config.learning_rate * 0.2);
    }
    std::vector<cv::Mat> images;
    std::vector<float> targets;
    targets.reserve(static_cast<std::size_t>(config.batch_size * channels * res * res));
    for (int b = 0; b < config.batch_size; ++b) {
      auto s = augment_foot(data[pick(rng)], config, rng);
      const auto hm = geom::encode_heatmaps(foot_only(s.pose), res, config.sigma);
      targets.insert(targets.end(), hm.data.begin(), hm.data.end());
      images.push_back(std::move(s.x_w));
    }
    const auto x = img::to_tensor(images);
    const auto y = torch::from_blob(targets.data(), {config.batch_size, channels, res, res}, torch::kFloat32).clone();
    opt.zero_grad();
    auto loss = torch::mse_loss(model.net->forward(x), y);
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

std::vector<PoseAnnotation> estimate_foot_batch(FootModel& model, std::span<const cv::Mat> images) {
  torch::NoGradGuard ng;
  model.net->eval();
  const int res = model.config.resolution;
  std::vector<PoseAnnotation> out;
  out.reserve(images.size());
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t end = std::min(images.size(), start + kChunk);
    std::vector<cv::Mat> resized;
    for (std::size_t i = start; i < end; ++i) {
      if (images[i].type() != CV_8UC3 || images[i].rows != images[i].cols) {
        throw InvalidArgument("estimate_foot: expected a square 8-bit 3-channel image");
      }
      resized.push_back(img::resize_image(images[i], res));
    }
    const auto hm = model.net->forward(img::to_tensor(resized)).contiguous();
    for (std::size_t i = start; i < end; ++i) {
      const auto one = hm[static_cast<int64_t>(i - start)].contiguous();
      geom::HeatmapStack stack;
      stack.channels = static_cast<int>(one.size(0));
      stack.resolution = res;
      stack.sigma = model.config.sigma;
      stack.data.assign(one.data_ptr<float>(), one.data_ptr<float>() + one.numel());
      out.push_back(geom::decode_heatmaps(stack, images[i].cols));
    }
  }
  return out;
}

PoseAnnotation estimate_foot(FootModel& model, const cv::Mat& x_w) {
  std::array<cv::Mat, 1> one = {x_w};
  return estimate_foot_batch(model, one)[0];
}

FootMetrics foot_metrics(std::span<const PoseAnnotation> predicted, std::span<const PoseAnnotation> truth,
                         double alpha) {
  if (predicted.empty() || predicted.size() != truth.size()) {
    throw InvalidArgument("foot_metrics: need equal, non-empty prediction and truth sets");
  }
  std::size_t hits = 0, evaluated = 0, slots = 0, presence_ok = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double thr = alpha * truth[i].image_size;
    for (Joint j : geom::subset_joints(Subset::kFoot)) {
      const auto& p = predicted[i][j];
      const auto& t = truth[i][j];
      ++slots;
      if (p.present == t.present) ++presence_ok;
      if (!t.present) continue;
      ++evaluated;
      if (p.present && std::hypot(p.x - t.x, p.y - t.y) <= thr) ++hits;
    }
  }
  FootMetrics m;
  m.evaluated_points = evaluated;
  m.pck = evaluated ? static_cast<double>(hits) / static_cast<double>(evaluated) : 1.0;
  m.presence_accuracy = static_cast<double>(presence_ok) / static_cast<double>(slots);
  return m;
}

void save_foot_model(const FootModel& model, const std::filesystem::path& path, std::uint64_t seed) {
  const auto& c = model.config;
  nlohmann::json meta = {{"kind", "lps1"}, {"resolution", c.resolution}, {"base_channels", c.base_channels},
                         {"sigma", c.sigma}, {"iterations", c.iterations}, {"seed", seed}};
  ckpt::save(path, meta, *model.net);
}

FootModel load_foot_model(const std::filesystem::path& path) {
  const auto ck = ckpt::load(path);
  if (ck.meta.value("kind", "") != "lps1") throw InvalidArgument("not a foot-estimator checkpoint: " + path.string());
  FootConfig c;
  c.resolution = ck.meta.at("resolution").get<int>();
  c.base_channels = ck.meta.at("base_channels").get<int>();
  c.sigma = ck.meta.at("sigma").get<double>();
  c.iterations = ck.meta.value("iterations", c.iterations);
  FootModel m = make_foot_model(c);
  ckpt::load_into(*m.net, ck);
  m.net->eval();
  return m;
}

// ---- phase 2 ----

LegDenoiserImpl::LegDenoiserImpl(int hidden, int layers, int time_dim_) : time_dim(time_dim_) {
  namespace nn = torch::nn;
  mlp = nn::Sequential();
  int in = kLegDim + time_dim + kFootDim;
  for (int i = 0; i < layers; ++i) {
    mlp->push_back(nn::Linear(in, hidden));
    mlp->push_back(nn::SiLU());
    in = hidden;
  }
  mlp->push_back(nn::Linear(in, kLegDim));
  register_module("mlp", mlp);
}

torch::Tensor LegDenoiserImpl::forward(const torch::Tensor& x_t, const torch::Tensor& t, const torch::Tensor& c_p) {
  return mlp->forward(torch::cat({x_t, diff::timestep_embedding(t, time_dim), c_p}, 1));
}

LegDiffusionModel make_leg_model(const LegConfig& config) {
  check_leg_config(config);
  LegDiffusionModel m;
  m.config = config;
  m.schedule = diff::make_schedule(config.train_steps, config.beta_min, config.beta_max);
  m.net = LegDenoiser(config.hidden, config.layers, config.time_dim);
  return m;
}

std::pair<std::vector<double>, std::vector<double>> leg_training_pair(const PoseAnnotation& pose,
                                                                       const LegConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PoseAnnotation p = pose;
  if (u(rng) < config.rotation_prob) {
    const double rad = (2.0 * u(rng) - 1.0) * config.rotation_deg * std::numbers::pi / 180.0;
    const double c = pose.image_size / 2.0;
    PoseAnnotation r = geom::rotate_pose(pose, {c, c}, rad);
    if (all_inside(r)) p = r;
  }
  return {geom::normalize_pose(p, Subset::kLeg).values, geom::normalize_pose(p, Subset::kFoot).values};
}

torch::Tensor leg_loss(LegDiffusionModel& model, const torch::Tensor& x0, const torch::Tensor& t,
                       const torch::Tensor& eps, const torch::Tensor& c_p) {
  const auto x_t = diff::q_sample(x0, t, eps, model.schedule);
  return torch::mse_loss(model.net->forward(x_t, t, c_p), eps);
}

LegDiffusionModel train_leg_diffusion(std::span<const PoseAnnotation> poses, const LegConfig& config,
                                      std::uint64_t seed, nets::TrainLog* log, const nets::ProgressFn& progress) {
  if (poses.empty()) throw InvalidArgument("train_leg_diffusion: empty dataset");
  check_leg_config(config);
  nets::seed_everything(seed);
  LegDiffusionModel model = make_leg_model(config);
  model.net->train();
  std::mt19937_64 rng(seed ^ 0x1E65EEDULL);
  std::uniform_int_distribution<std::size_t> pick(0, poses.size() - 1);
  torch::optim::Adam opt(model.net->parameters(), torch::optim::AdamOptions(config.learning_rate));
  const int decay_at = static_cast<int>(0.7 * config.iterations);
  const int B = config.batch_size;
  double smooth = 0.0;

  std::vector<float> legs(static_cast<std::size_t>(B * kLegDim)), feet(static_cast<std::size_t>(B * kFootDim));
  for (int it = 0; it < config.iterations; ++it) {
    if (it == decay_at) {
      for (auto& g : opt.param_groups()) g.options().set_lr(config.learning_rate * 0.2);
    }
    for (int b = 0; b < B; ++b) {
      const auto [l0, cp] = leg_training_pair(poses[pick(rng)], config, rng);
      std::copy(l0.begin(), l0.end(), legs.begin() + b * kLegDim);
      std::copy(cp.begin(), cp.end(), feet.begin() + b * kFootDim);
    }
    const auto x0 = torch::from_blob(legs.data(), {B, kLegDim}, torch::kFloat32).clone();
    const auto c = torch::from_blob(feet.data(), {B, kFootDim}, torch::kFloat32).clone();
    const auto t = torch::randint(0, config.train_steps, {B}, torch::kLong);
    const auto eps = torch::randn({B, kLegDim});
    opt.zero_grad();
    auto loss = leg_loss(model, x0, t, eps, c);
    loss.backward();
    opt.step();
    const double l = loss.item<double>();
    if (log) log->losses.push_back(l);
    smooth = it == 0 ? l : 0.98 * smooth + 0.02 * l;
    if (progress && (it + 1) % 500 == 0) progress(it + 1, smooth);
  }
  model.net->eval();
  return model;
}

std::vector<geom::NormalizedPose> sample_leg_poses(LegDiffusionModel& model,
                                                   std::span<const geom::NormalizedPose> c_p, int steps,
                                                   std::span<const std::uint64_t> seeds) {
  if (steps < 1) throw InvalidArgument("sample_leg_pose: steps must be positive");
  if (c_p.size() != seeds.size()) throw InvalidArgument("sample_leg_pose: one seed per condition required");
  if (c_p.empty()) return {};
  torch::NoGradGuard ng;
  model.net->eval();
  const auto n = static_cast<int64_t>(c_p.size());
  std::vector<torch::Tensor> noise, conds;
  for (std::size_t i = 0; i < c_p.size(); ++i) {
    if (c_p[i].subset != Subset::kFoot || c_p[i].values.size() != kFootDim) {
      throw InvalidArgument("sample_leg_pose: condition must be a foot-subset vector");
    }
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seeds[i]);
    noise.push_back(torch::randn({kLegDim}, gen));
    conds.push_back(to_tensor(c_p[i].values));
  }
  auto x = torch::stack(noise);
  const auto c = torch::stack(conds);
  const auto ts = diff::ddim_timesteps(model.config.train_steps, steps);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_prev = i + 1 < ts.size() ? ts[i + 1] : diff::kFinalStep;
    const auto eps = model.net->forward(x, torch::full({n}, t, torch::kLong), c);
    x = diff::ddim_step(x, eps, t, t_prev, model.schedule);
  }
  x = x.clamp(0.0, 1.0).contiguous();
  std::vector<geom::NormalizedPose> out;
  for (int64_t i = 0; i < n; ++i) {
    geom::NormalizedPose p;
    p.subset = Subset::kLeg;
    const float* row = x[i].data_ptr<float>();
    p.values.assign(row, row + kLegDim);
    out.push_back(std::move(p));
  }
  return out;
}

geom::NormalizedPose sample_leg_pose(LegDiffusionModel& model, const geom::NormalizedPose& c_p, int steps,
                                     std::uint64_t seed) {
  std::array<geom::NormalizedPose, 1> c = {c_p};
  std::array<std::uint64_t, 1> s = {seed};
  return sample_leg_poses(model, c, steps, s)[0];
}

PoseAnnotation compose_pose(const geom::NormalizedPose& c_p, const geom::NormalizedPose& l0_prime, int s) {
  if (c_p.subset != Subset::kFoot || l0_prime.subset != Subset::kLeg) {
    throw InvalidArgument("compose_pose: expected a foot condition and a leg sample");
  }
  if (l0_prime.values.size() != kLegDim) throw InvalidArgument("compose_pose: leg vector must have 12 values");
  PoseAnnotation pose = geom::denormalize_pose(c_p, s);
  const double hi = std::nextafter(static_cast<double>(s), 0.0);
  auto decode = [&](double v) { return std::clamp((v - geom::kNormOffset) / geom::kNormScale * s, 0.0, hi); };
  const auto leg_joints = geom::subset_joints(Subset::kLeg);
  for (std::size_t i = 0; i < leg_joints.size(); ++i) {
    const Joint j = leg_joints[i];
    if (j == Joint::kLeftAnkle || j == Joint::kRightAnkle) continue;
    const Joint ankle = geom::joint_side(j) == geom::Side::kLeft ? Joint::kLeftAnkle : Joint::kRightAnkle;
    if (!pose[ankle].present) continue;
    pose[j] = {decode(l0_prime.values[2 * i]), decode(l0_prime.values[2 * i + 1]), true};
  }
  return pose;
}

void save_leg_model(const LegDiffusionModel& model, const std::filesystem::path& path, std::uint64_t seed) {
  const auto& c = model.config;
  nlohmann::json meta = {{"kind", "lps2"},         {"hidden", c.hidden},         {"layers", c.layers},
                         {"time_dim", c.time_dim}, {"train_steps", c.train_steps}, {"beta_min", c.beta_min},
                         {"beta_max", c.beta_max}, {"sample_steps", c.sample_steps}, {"iterations", c.iterations},
                         {"seed", seed}};
  ckpt::save(path, meta, *model.net);
}

LegDiffusionModel load_leg_model(const std::filesystem::path& path) {
  const auto ck = ckpt::load(path);
  if (ck.meta.value("kind", "") != "lps2") throw InvalidArgument("not a leg-diffusion checkpoint: " + path.string());
  LegConfig c;
  c.hidden = ck.meta.at("hidden").get<int>();
  c.layers = ck.meta.at("layers").get<int>();
  c.time_dim = ck.meta.at("time_dim").get<int>();
  c.train_steps = ck.meta.at("train_steps").get<int>();
  c.beta_min = ck.meta.at("beta_min").get<double>();
  c.beta_max = ck.meta.at("beta_max").get<double>();
  c.sample_steps = ck.meta.at("sample_steps").get<int>();
  c.iterations = ck.meta.value("iterations", c.iterations);
  LegDiffusionModel m = make_leg_model(c);
  ckpt::load_into(*m.net, ck);
  m.net->eval();
  return m;
}

}  // namespace weargen::lps
