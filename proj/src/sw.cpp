#include "weargen/sw.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "weargen/checkpoint.hpp"
#include "weargen/errors.hpp"
#include "weargen/image_ops.hpp"
#include "weargen/skeleton.hpp"
#include "weargen/wd.hpp"

namespace weargen::sw {

namespace nn = torch::nn;

namespace {

constexpr std::array<int64_t, kTagSlots> kSlotOffsets = {0, 3, 6, 8};
constexpr int64_t kTagTableSize = 11;

void check_config(const SWConfig& c, const char* stage) {
  if (c.resolution < 8 || c.resolution % 4 != 0) throw ConfigError(stage, "sw.resolution must be a multiple of 4");
  if (c.base_channels < 8 || c.base_channels % 8 != 0) {
    throw ConfigError(stage, "sw.base_channels must be a positive multiple of 8");
  }
  if (c.time_dim < 2 || c.time_dim % 2 != 0 || c.emb_dim < 1) throw ConfigError(stage, "sw embedding sizes are invalid");
  if (c.train_steps < 1 || c.sample_steps < 1) throw ConfigError(stage, "sw step counts must be positive");
  if (c.cfg_scale < 0.0) throw ConfigError(stage, "sw.cfg_scale must be non-negative");
  if (c.cond_dropout < 0.0 || c.cond_dropout > 1.0) throw ConfigError(stage, "sw.cond_dropout must be in [0,1]");
  if (c.base_iterations < 1 || c.control_iterations < 1 || c.batch_size < 1) {
    throw ConfigError(stage, "sw iteration counts must be positive");
  }
  if (!(c.base_learning_rate > 0.0 && c.control_learning_rate > 0.0)) {
    throw ConfigError(stage, "sw learning rates must be positive");
  }
}

nn::Conv2d conv3(int in, int out, int stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

nn::Conv2d zero_conv(int in, int out, int k) {
  auto c = nn::Conv2d(nn::Conv2dOptions(in, out, k).padding(k / 2));
  torch::NoGradGuard ng;
  c->weight.zero_();
  c->bias.zero_();
  return c;
}

/// Holds base and control for a single checkpoint file.
struct BundleModule : nn::Module {
  BundleModule(BaseNet b, ControlNet c) {
    register_module("base", b);
    if (c) register_module("control", c);
  }
};

torch::Tensor images_tensor(std::span<const cv::Mat> images) { return img::to_tensor(images, 2.0, -1.0); }

}  // namespace

ResBlockImpl::ResBlockImpl(int in, int out, int emb_dim) {
  norm1 = register_module("norm1", nn::GroupNorm(8, in));
  conv1 = register_module("conv1", conv3(in, out));
  emb_proj = register_module("emb_proj", nn::Linear(emb_dim, out));
  norm2 = register_module("norm2", nn::GroupNorm(8, out));
  conv2 = register_module("conv2", conv3(out, out));
  if (in != out) skip = register_module("skip", nn::Conv2d(nn::Conv2dOptions(in, out, 1)));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& emb) {
  auto h = conv1->forward(torch::silu(norm1->forward(x)));
  h = h + emb_proj->forward(torch::silu(emb)).unsqueeze(-1).unsqueeze(-1);
  h = conv2->forward(torch::silu(norm2->forward(h)));
  return (skip ? skip->forward(x) : x) + h;
}

EncoderImpl::EncoderImpl(const SWConfig& c) : time_dim(c.time_dim) {
  const int ch = c.base_channels;
  time_mlp = register_module("time_mlp", nn::Sequential(nn::Linear(c.time_dim, c.emb_dim), nn::SiLU(),
                                                        nn::Linear(c.emb_dim, c.emb_dim)));
  tag_table = register_module("tag_table", nn::Embedding(kTagTableSize, c.emb_dim));
  null_token = register_parameter("null_token", torch::zeros({c.emb_dim}));
  conv_in = register_module("conv_in", conv3(3, ch));
  rb0 = register_module("rb0", ResBlock(ch, ch, c.emb_dim));
  down0 = register_module("down0", conv3(ch, ch, 2));
  rb1 = register_module("rb1", ResBlock(ch, 2 * ch, c.emb_dim));
  down1 = register_module("down1", conv3(2 * ch, 2 * ch, 2));
  rb2 = register_module("rb2", ResBlock(2 * ch, 2 * ch, c.emb_dim));
  mid = register_module("mid", ResBlock(2 * ch, 2 * ch, c.emb_dim));
}

EncoderImpl::Output EncoderImpl::forward(const torch::Tensor& x, const torch::Tensor& t, const torch::Tensor& tags,
                                         const torch::Tensor& keep, const torch::Tensor& stem_add) {
  const auto offsets = torch::tensor(std::vector<int64_t>(kSlotOffsets.begin(), kSlotOffsets.end()), torch::kLong);
  auto tag_emb = tag_table->forward(tags + offsets.unsqueeze(0)).sum(1);
  tag_emb = torch::where(keep.unsqueeze(1), tag_emb, null_token.unsqueeze(0).expand_as(tag_emb));
  Output out;
  out.emb = time_mlp->forward(diff::timestep_embedding(t, time_dim)) + tag_emb;
  auto h = conv_in->forward(x);
  if (stem_add.defined()) h = h + stem_add;
  out.skips.push_back(h);
  h = rb0->forward(h, out.emb);
  out.skips.push_back(h);
  h = down0->forward(h);
  out.skips.push_back(h);
  h = rb1->forward(h, out.emb);
  out.skips.push_back(h);
  h = down1->forward(h);
  out.skips.push_back(h);
  h = rb2->forward(h, out.emb);
  out.skips.push_back(h);
  out.mid = mid->forward(h, out.emb);
  return out;
}

BaseNetImpl::BaseNetImpl(const SWConfig& c) {
  const int ch = c.base_channels;
  encoder = register_module("encoder", Encoder(c));
  // Decoder blocks consume skips deepest first.
  const std::array<std::pair<int, int>, 6> io = {{{4 * ch, 2 * ch}, {4 * ch, 2 * ch}, {4 * ch, 2 * ch},
                                                  {3 * ch, ch},     {2 * ch, ch},     {2 * ch, ch}}};
  for (std::size_t i = 0; i < io.size(); ++i) {
    dec.push_back(register_module("dec" + std::to_string(i), ResBlock(io[i].first, io[i].second, c.emb_dim)));
  }
  out_norm = register_module("out_norm", nn::GroupNorm(8, ch));
  out_conv = register_module("out_conv", conv3(ch, 3));
}

torch::Tensor BaseNetImpl::forward(const torch::Tensor& x, const torch::Tensor& t, const torch::Tensor& tags,
                                   const torch::Tensor& keep, const std::vector<torch::Tensor>& residuals) {
  auto e = encoder->forward(x, t, tags, keep);
  if (!residuals.empty()) {
    if (residuals.size() != e.skips.size() + 1) throw InvalidArgument("BaseNet: expected 7 control residuals");
    for (std::size_t i = 0; i < e.skips.size(); ++i) e.skips[i] = e.skips[i] + residuals[i];
    e.mid = e.mid + residuals.back();
  }
  auto h = e.mid;
  for (std::size_t i = 0; i < dec.size(); ++i) {
    const auto& skip = e.skips[e.skips.size() - 1 - i];
    h = dec[i]->forward(torch::cat({h, skip}, 1), e.emb);
    if (i == 1 || i == 3) h = torch::upsample_nearest2d(h, std::vector<int64_t>{h.size(2) * 2, h.size(3) * 2});
  }
  return out_conv->forward(torch::silu(out_norm->forward(h)));
}

ControlNetImpl::ControlNetImpl(const SWConfig& c, int hint_channels_) : hint_channels(hint_channels_) {
  const int ch = c.base_channels;
  encoder = register_module("encoder", Encoder(c));
  hint_net = register_module("hint_net", nn::Sequential(conv3(hint_channels, 16), nn::SiLU(), conv3(16, 32),
                                                        nn::SiLU(), zero_conv(32, ch, 3)));
  const std::array<int, 7> widths = {ch, ch, ch, 2 * ch, 2 * ch, 2 * ch, 2 * ch};
  for (std::size_t i = 0; i < widths.size(); ++i) {
    zero_convs.push_back(register_module("zero" + std::to_string(i), zero_conv(widths[i], widths[i], 1)));
  }
}

std::vector<torch::Tensor> ControlNetImpl::forward(const torch::Tensor& x, const torch::Tensor& hint,
                                                   const torch::Tensor& t, const torch::Tensor& tags,
                                                   const torch::Tensor& keep) {
  auto e = encoder->forward(x, t, tags, keep, hint_net->forward(hint));
  std::vector<torch::Tensor> out;
  for (std::size_t i = 0; i < e.skips.size(); ++i) out.push_back(zero_convs[i]->forward(e.skips[i]));
  out.push_back(zero_convs.back()->forward(e.mid));
  return out;
}

torch::Tensor SWModel::eps(const torch::Tensor& x, const torch::Tensor& t, const torch::Tensor& tags,
                           const torch::Tensor& keep, const torch::Tensor& hint) {
  if (!control) return base->forward(x, t, tags, keep);
  return base->forward(x, t, tags, keep, control->forward(x, hint, t, tags, keep));
}

std::vector<SWSample> sw_samples(std::span<const synth::SceneSample> scenes, int resolution) {
  std::vector<SWSample> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) {
    SWSample row;
    row.worn = img::resize_image(s.worn, resolution);
    row.cond.x_w = img::resize_image(wd::extract_visible(s.shoe_only, s.tri_mask), resolution);
    row.cond.x_p = geom::render_skeleton(s.pose, resolution);
    row.cond.tags = s.tags;
    out.push_back(std::move(row));
  }
  return out;
}

torch::Tensor hint_tensor(std::span<const ConditionBundle> bundles, bool use_pose) {
  std::vector<cv::Mat> xw, xp;
  for (const auto& b : bundles) {
    xw.push_back(b.x_w);
    if (use_pose) xp.push_back(b.x_p);
  }
  auto h = img::to_tensor(xw);
  if (use_pose) h = torch::cat({h, img::to_tensor(xp)}, 1);
  return h;
}

torch::Tensor tag_tensor(std::span<const synth::SceneTags> tags) {
  std::vector<int64_t> v;
  for (const auto& t : tags) {
    const auto idx = synth::tag_indices(t);
    v.insert(v.end(), idx.begin(), idx.end());
  }
  return torch::tensor(v, torch::kLong).view({static_cast<int64_t>(tags.size()), kTagSlots});
}

SWModel make_base(const SWConfig& config) {
  check_config(config, "base");
  SWModel m;
  m.config = config;
  m.schedule = diff::make_schedule(config.train_steps, config.beta_min, config.beta_max);
  m.base = BaseNet(config);
  return m;
}

void copy_parameters(torch::nn::Module& dst, const torch::nn::Module& src) {
  torch::NoGradGuard ng;
  auto from = src.named_parameters(true);
  for (auto& p : dst.named_parameters(true)) {
    auto* s = from.find(p.key());
    if (!s) throw InvalidArgument("copy_parameters: missing '" + p.key() + "'");
    p.value().copy_(*s);
  }
}

void attach_control(SWModel& model) {
  model.control = ControlNet(model.config, model.config.use_pose ? 6 : 3);
  copy_parameters(*model.control->encoder, *model.base->encoder);
}

namespace {

struct Batch {
  torch::Tensor x0, tags, hint;
};

Batch make_batch(std::span<const SWSample> data, std::mt19937_64& rng, int batch, bool with_hint, bool use_pose) {
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<cv::Mat> worn;
  std::vector<synth::SceneTags> tags;
  std::vector<ConditionBundle> cond;
  for (int b = 0; b < batch; ++b) {
    const auto& s = data[pick(rng)];
    worn.push_back(s.worn);
    tags.push_back(s.cond.tags);
    if (with_hint) cond.push_back(s.cond);
  }
  Batch out{images_tensor(worn), tag_tensor(tags), {}};
  if (with_hint) out.hint = hint_tensor(cond, use_pose);
  return out;
}

void check_data(std::span<const SWSample> data, const SWConfig& config, const char* what) {
  if (data.empty()) throw InvalidArgument(std::string(what) + ": empty dataset");
  for (const auto& s : data) {
    if (s.worn.rows != config.resolution || s.worn.cols != config.resolution) {
      throw InvalidArgument(std::string(what) + ": samples must be at the model resolution");
    }
  }
}

}  // namespace

SWModel pretrain_base(std::span<const SWSample> data, const SWConfig& config, std::uint64_t seed, nets::TrainLog* log,
                      const nets::ProgressFn& progress) {
  check_config(config, "base");
  check_data(data, config, "pretrain_base");
  nets::seed_everything(seed);
  SWModel model = make_base(config);
  model.base->train();
  std::mt19937_64 rng(seed ^ 0xBA5EULL);
  torch::optim::Adam opt(model.base->parameters(), torch::optim::AdamOptions(config.base_learning_rate));
  const int decay_at = static_cast<int>(0.7 * config.base_iterations);
  double smooth = 0.0;
  for (int it = 0; it < config.base_iterations; ++it) {
    if (it == decay_at) {
      for (auto& g : opt.param_groups()) g.options().set_lr(config.base_learning_rate * 0.2);
    }
    const auto b = make_batch(data, rng, config.batch_size, false, false);
    const auto t = torch::randint(0, config.train_steps, {config.batch_size}, torch::kLong);
    const auto eps = torch::randn_like(b.x0);
    const auto keep = torch::rand({config.batch_size}) >= config.cond_dropout;
    const auto x_t = diff::q_sample(b.x0, t, eps, model.schedule);
    opt.zero_grad();
    auto loss = torch::mse_loss(model.base->forward(x_t, t, b.tags, keep), eps);
    loss.backward();
    opt.step();
    const double l = loss.item<double>();
    if (log) log->losses.push_back(l);
    smooth = it == 0 ? l : 0.98 * smooth + 0.02 * l;
    if (progress && (it + 1) % 100 == 0) progress(it + 1, smooth);
  }
  model.base->eval();
  return model;
}

SWModel train_sw(const SWModel& base, std::span<const SWSample> data, const SWConfig& config, std::uint64_t seed,
                 nets::TrainLog* log, const nets::ProgressFn& progress) {
  check_config(config, "sw");
  check_data(data, config, "train_sw");
  if (!base.base) throw InvalidArgument("train_sw: base model missing");
  if (base.config.resolution != config.resolution || base.config.base_channels != config.base_channels ||
      base.config.time_dim != config.time_dim || base.config.emb_dim != config.emb_dim ||
      base.config.train_steps != config.train_steps) {
    throw ConfigError("sw", "sw architecture keys must match the base checkpoint");
  }
  nets::seed_everything(seed);
  SWModel model = make_base(config);
  copy_parameters(*model.base, *base.base);
  for (auto& p : model.base->parameters()) p.set_requires_grad(false);
  model.base->eval();
  attach_control(model);
  model.control->train();

  std::mt19937_64 rng(seed ^ 0xC0DEULL);
  torch::optim::Adam opt(model.control->parameters(), torch::optim::AdamOptions(config.control_learning_rate));
  const int decay_at = static_cast<int>(0.7 * config.control_iterations);
  double smooth = 0.0;
  for (int it = 0; it < config.control_iterations; ++it) {
    if (it == decay_at) {
      for (auto& g : opt.param_groups()) g.options().set_lr(config.control_learning_rate * 0.2);
    }
    const auto b = make_batch(data, rng, config.batch_size, true, config.use_pose);
    const auto t = torch::randint(0, config.train_steps, {config.batch_size}, torch::kLong);
    const auto eps = torch::randn_like(b.x0);
    // Joint condition dropout: tags go to the null token and the hint to zeros.
    const auto keep = torch::rand({config.batch_size}) >= config.cond_dropout;
    const auto hint = b.hint * keep.to(torch::kFloat32).view({-1, 1, 1, 1});
    const auto x_t = diff::q_sample(b.x0, t, eps, model.schedule);
    opt.zero_grad();
    auto loss = torch::mse_loss(model.eps(x_t, t, b.tags, keep, hint), eps);
    loss.backward();
    opt.step();
    const double l = loss.item<double>();
    if (log) log->losses.push_back(l);
    smooth = it == 0 ? l : 0.98 * smooth + 0.02 * l;
    if (progress && (it + 1) % 100 == 0) progress(it + 1, smooth);
  }
  model.control->eval();
  return model;
}

std::vector<cv::Mat> generate(SWModel& model, std::span<const ConditionBundle> bundles, double cfg_scale, int steps,
                              std::span<const std::uint64_t> seeds) {
  if (cfg_scale < 0.0) throw InvalidArgument("generate: cfg_scale must be non-negative");
  if (steps < 1) throw InvalidArgument("generate: steps must be positive");
  if (bundles.size() != seeds.size()) throw InvalidArgument("generate: one seed per bundle required");
  if (bundles.empty()) return {};
  const int res = model.config.resolution;
  for (const auto& b : bundles) {
    if (b.x_w.rows != res || b.x_w.cols != res || b.x_p.rows != res || b.x_p.cols != res) {
      throw InvalidArgument("generate: conditioning images must match the model resolution");
    }
  }
  torch::NoGradGuard ng;
  model.base->eval();
  if (model.control) model.control->eval();
  const auto n = static_cast<int64_t>(bundles.size());

  std::vector<torch::Tensor> noise;
  std::vector<synth::SceneTags> tags;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seeds[i]);
    noise.push_back(torch::randn({3, res, res}, gen));
    tags.push_back(bundles[i].tags);
  }
  auto x = torch::stack(noise);
  const auto tag_t = tag_tensor(tags);
  const auto hint = model.control ? hint_tensor(bundles, model.config.use_pose) : torch::Tensor();
  const auto null_hint = model.control ? torch::zeros_like(hint) : torch::Tensor();
  const auto keep = torch::ones({n}, torch::kBool);
  const auto drop = torch::zeros({n}, torch::kBool);

  const auto ts = diff::ddim_timesteps(model.config.train_steps, steps);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_prev = i + 1 < ts.size() ? ts[i + 1] : diff::kFinalStep;
    const auto tt = torch::full({n}, t, torch::kLong);
    const auto e_cond = model.eps(x, tt, tag_t, keep, hint);
    const auto e_uncond = model.eps(x, tt, tag_t, drop, null_hint);
    auto e = diff::guided_eps(e_cond, e_uncond, cfg_scale);
    if (model.config.clip_x0) {
      const double ab = model.schedule.alpha_bar(t);
      const auto x0 = diff::predict_x0(x, e, t, model.schedule).clamp(-1.0, 1.0);
      e = (x - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab);
    }
    x = diff::ddim_step(x, e, t, t_prev, model.schedule);
  }
  x = x.clamp(-1.0, 1.0);
  std::vector<cv::Mat> out;
  for (int64_t i = 0; i < n; ++i) out.push_back(img::to_image(x[i], 2.0, -1.0));
  return out;
}

cv::Mat generate_one(SWModel& model, const ConditionBundle& bundle, double cfg_scale, int steps, std::uint64_t seed) {
  std::array<ConditionBundle, 1> b = {bundle};
  std::array<std::uint64_t, 1> s = {seed};
  return generate(model, b, cfg_scale, steps, s)[0];
}

cv::Mat paste_back(const cv::Mat& generated, const cv::Mat& x_w, const cv::Mat& visible_mask) {
  if (generated.size() != x_w.size() || generated.size() != visible_mask.size() || generated.type() != x_w.type()) {
    throw InvalidArgument("paste_back: resolution mismatch");
  }
  cv::Mat out = generated.clone();
  x_w.copyTo(out, visible_mask);
  return out;
}

void save_model(const SWModel& model, const std::filesystem::path& path, std::uint64_t seed) {
  const auto& c = model.config;
  nlohmann::json meta = {{"kind", model.control ? "sw" : "base"},
                         {"resolution", c.resolution},
                         {"base_channels", c.base_channels},
                         {"time_dim", c.time_dim},
                         {"emb_dim", c.emb_dim},
                         {"train_steps", c.train_steps},
                         {"beta_min", c.beta_min},
                         {"beta_max", c.beta_max},
                         {"use_pose", c.use_pose},
                         {"base_iterations", c.base_iterations},
                         {"control_iterations", c.control_iterations},
                         {"seed", seed}};
  BundleModule bundle(model.base, model.control);
  ckpt::save(path, meta, bundle);
}

SWModel load_model(const std::filesystem::path& path) {
  const auto ck = ckpt::load(path);
  const auto kind = ck.meta.value("kind", "");
  if (kind != "sw" && kind != "base") throw InvalidArgument("not a base/sw checkpoint: " + path.string());
  SWConfig c;
  c.resolution = ck.meta.at("resolution").get<int>();
  c.base_channels = ck.meta.at("base_channels").get<int>();
  c.time_dim = ck.meta.at("time_dim").get<int>();
  c.emb_dim = ck.meta.at("emb_dim").get<int>();
  c.train_steps = ck.meta.at("train_steps").get<int>();
  c.beta_min = ck.meta.at("beta_min").get<double>();
  c.beta_max = ck.meta.at("beta_max").get<double>();
  c.use_pose = ck.meta.value("use_pose", true);
  SWModel m = make_base(c);
  if (kind == "sw") attach_control(m);
  BundleModule bundle(m.base, m.control);
  ckpt::load_into(bundle, ck);
  m.base->eval();
  if (m.control) m.control->eval();
  return m;
}

}  // namespace weargen::sw
