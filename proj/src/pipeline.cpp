#include "weargen/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "weargen/errors.hpp"
#include "weargen/eval.hpp"
#include "weargen/image_ops.hpp"
#include "weargen/skeleton.hpp"

namespace weargen::pipe {

namespace fs = std::filesystem;
using nlohmann::json;

bool Layout::is_identity() const { return rotation_deg == 0.0 && scale == 1.0 && tx == 0.0 && ty == 0.0; }

cv::Mat Layout::affine(int size) const {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("layout scale must be positive");
  cv::Mat a = img::rotation_about_center(size, rotation_deg, scale);
  a.at<double>(0, 2) += tx;
  a.at<double>(1, 2) += ty;
  return a;
}

Layout layout_from_config(const cfg::PipelineConfig& config) {
  const auto& p = config.pipeline;
  return {p.layout_rotation_deg, p.layout_scale, p.layout_tx, p.layout_ty};
}

json to_json(const Layout& layout) {
  return {{"rotation_deg", layout.rotation_deg}, {"scale", layout.scale}, {"tx", layout.tx}, {"ty", layout.ty}};
}

Layout layout_from_json(const json& j) {
  return {j.at("rotation_deg").get<double>(), j.at("scale").get<double>(), j.at("tx").get<double>(),
          j.at("ty").get<double>()};
}

std::uint64_t leg_seed(std::uint64_t run_seed) { return synth::record_seed(run_seed, 1); }
std::uint64_t generation_seed(std::uint64_t run_seed) { return synth::record_seed(run_seed, 2); }

namespace {

fs::path require_checkpoint(const cfg::PipelineConfig& config, const fs::path& p, const std::string& stage) {
  const fs::path full = config.resolve(p);
  if (p.empty() || !fs::exists(full)) {
    throw ConfigError(stage, "missing checkpoint for stage " + stage + ": " + full.string());
  }
  return full;
}

template <typename F>
auto load_stage(const std::string& stage, F&& load) {
  try {
    return load();
  } catch (const IoError& e) {
    throw ConfigError(stage, "unreadable checkpoint for stage " + stage + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(stage, "incompatible checkpoint for stage " + stage + ": " + e.what());
  }
}

cv::Mat validate_input(const cv::Mat& x_m) {
  if (x_m.empty() || x_m.type() != CV_8UC3 || x_m.rows != x_m.cols) {
    throw InvalidArgument("pipeline input must be a square 8-bit 3-channel image");
  }
  return x_m;
}

cv::Mat upsample(const cv::Mat& raw, int size) {
  if (raw.rows == size) return raw.clone();
  cv::Mat out;
  cv::resize(raw, out, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  return out;
}

}  // namespace

cv::Mat nonzero_mask(const cv::Mat& image) {
  cv::Mat planes[3], mx;
  cv::split(image, planes);
  cv::max(planes[0], planes[1], mx);
  cv::max(mx, planes[2], mx);
  return mx > 0;
}

cv::Mat visible_mask(const cv::Mat& seg, const cv::Mat& x_m, int classes) {
  if (seg.size() != x_m.size()) throw InvalidArgument("visible_mask: resolution mismatch");
  const cv::Mat shoe = nonzero_mask(x_m);
  if (classes == 3) return shoe & (seg == synth::kVisible);
  return shoe & (seg != wd::wearable_label(classes));
}

cv::Mat to_tri_mask(const cv::Mat& seg, const cv::Mat& x_m, int classes) {
  if (seg.size() != x_m.size()) throw InvalidArgument("to_tri_mask: resolution mismatch");
  cv::Mat tri(seg.size(), CV_8UC1, cv::Scalar(synth::kBackground));
  tri.setTo(synth::kVisible, visible_mask(seg, x_m, classes));
  tri.setTo(synth::kWearable, nonzero_mask(x_m) & (seg == wd::wearable_label(classes)));
  return tri;
}

Pipeline::Pipeline(cfg::PipelineConfig config, bool no_pose, bool two_class)
    : config_(std::move(config)), no_pose_(no_pose), two_class_(two_class) {
  const auto wd_path =
      require_checkpoint(config_, two_class_ ? config_.wd.checkpoint_2class : config_.wd.checkpoint, "wd");
  const auto foot_path = require_checkpoint(config_, config_.lps1.checkpoint, "lps1");
  const auto leg_path = require_checkpoint(config_, config_.lps2.checkpoint, "lps2");
  const auto sw_path =
      require_checkpoint(config_, no_pose_ ? config_.sw.checkpoint_no_pose : config_.sw.checkpoint, "sw");
  wd_ = load_stage("wd", [&] { return wd::load_model(wd_path); });
  foot_ = load_stage("lps1", [&] { return lps::load_foot_model(foot_path); });
  leg_ = load_stage("lps2", [&] { return lps::load_leg_model(leg_path); });
  sw_ = load_stage("sw", [&] { return sw::load_model(sw_path); });
  if (!sw_.control) throw ConfigError("sw", "checkpoint has no control branch: " + sw_path.string());
  if (sw_.config.use_pose == no_pose_) {
    throw ConfigError("sw", std::string("checkpoint ") + sw_path.string() +
                                (no_pose_ ? " expects a pose hint" : " was trained without a pose hint"));
  }
}

std::vector<RunOutput> Pipeline::run_batch(const std::vector<cv::Mat>& x_m, const std::vector<synth::SceneTags>& tags,
                                           const std::vector<std::uint64_t>& seeds) {
  if (x_m.size() != tags.size() || x_m.size() != seeds.size()) {
    throw InvalidArgument("run_batch: inputs, tags and seeds must have equal length");
  }
  const std::size_t n = x_m.size();
  if (n == 0) return {};
  for (const auto& m : x_m) validate_input(m);
  const int classes = wd_.config.classes;
  const int res = sw_.config.resolution;

  std::vector<RunOutput> out(n);
  const auto segs = wd::segment_batch(wd_, x_m);
  std::vector<cv::Mat> x_ws(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].x_m = x_m[i].clone();
    out[i].tri_mask = to_tri_mask(segs[i], x_m[i], classes);
    const cv::Mat vis = visible_mask(segs[i], x_m[i], classes);
    if (cv::countNonZero(vis) == 0) throw StageError("wd", "no visible shoe detected");
    out[i].x_w = cv::Mat(x_m[i].size(), x_m[i].type(), cv::Scalar::all(0));
    x_m[i].copyTo(out[i].x_w, vis);
    x_ws[i] = out[i].x_w;
  }

  const auto feet = lps::estimate_foot_batch(foot_, x_ws);
  std::vector<geom::NormalizedPose> c_p(n);
  std::vector<std::uint64_t> leg_seeds(n), gen_seeds(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].c_p = feet[i];
    const bool any_ankle = feet[i][geom::Joint::kLeftAnkle].present || feet[i][geom::Joint::kRightAnkle].present;
    if (!any_ankle) throw StageError("lps1", "no ankle keypoint detected");
    c_p[i] = geom::normalize_pose(feet[i], geom::Subset::kFoot);
    leg_seeds[i] = leg_seed(seeds[i]);
    gen_seeds[i] = generation_seed(seeds[i]);
  }
  const auto legs = lps::sample_leg_poses(leg_, c_p, config_.lps2.model.sample_steps, leg_seeds);

  std::vector<sw::ConditionBundle> bundles(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].l0_prime = legs[i];
    out[i].pose = lps::compose_pose(c_p[i], legs[i], x_m[i].cols);
    out[i].x_p = geom::render_skeleton(out[i].pose, res);
    bundles[i] = {img::resize_image(out[i].x_w, res), out[i].x_p, tags[i]};
  }
  const auto raw = sw::generate(sw_, bundles, config_.sw.model.cfg_scale, config_.sw.model.sample_steps, gen_seeds);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].raw = raw[i];
    const cv::Mat vis = out[i].tri_mask == synth::kVisible;
    out[i].final_image = sw::paste_back(upsample(raw[i], x_m[i].cols), out[i].x_w, vis);
    out[i].id_consistency = eval::id_consistency(out[i].final_image, out[i].x_w, vis);
  }
  return out;
}

RunOutput Pipeline::run(const cv::Mat& x_m, const synth::SceneTags& tags, std::uint64_t seed) {
  return std::move(run_batch({x_m}, {tags}, {seed})[0]);
}

RunOutput Pipeline::run_with_layout(const cv::Mat& x_m, const synth::SceneTags& tags, std::uint64_t seed,
                                    const Layout& layout) {
  validate_input(x_m);
  if (layout.is_identity()) return run(x_m, tags, seed);
  const cv::Mat mask = nonzero_mask(x_m) / 255;
  auto laid = synth::apply_layout(x_m, mask, layout.affine(x_m.cols));
  cv::Mat shoe(laid.image.size(), laid.image.type(), cv::Scalar::all(0));
  laid.image.copyTo(shoe, laid.mask);
  return run(shoe, tags, seed);
}

json run_metrics(const RunOutput& out, const synth::SceneTags& tags, const std::vector<geom::ShoeGeometry>* geometry,
                 const cfg::PipelineConfig& config) {
  json m;
  const cv::Mat vis = out.tri_mask == synth::kVisible;
  m["id_consistency"] = eval::id_consistency(out.final_image, out.x_w, vis);
  m["visible_pixels"] = cv::countNonZero(vis);
  m["wearable_pixels"] = cv::countNonZero(out.tri_mask == synth::kWearable);
  int foot_points = 0;
  for (const auto j : geom::subset_joints(geom::Subset::kFoot)) foot_points += out.c_p[j].present ? 1 : 0;
  m["foot_points"] = foot_points;

  const int size = out.final_image.cols;
  cv::Mat allowed = out.tri_mask == synth::kWearable;
  cv::dilate(allowed, allowed, cv::Mat(), cv::Point(-1, -1), 2);
  const auto leg = eval::leg_image_check(out.final_image, out.pose,
                                         synth::render_background(tags, size, config.data.scene.horizon_frac), vis,
                                         allowed, config.eval.leg_image);
  m["leg_image"] = eval::to_json(leg);
  if (geometry) {
    m["plausibility"] = eval::to_json(eval::pose_plausibility(out.pose, *geometry, config.eval.plausibility));
  } else {
    m["plausibility"] = nullptr;
  }
  return m;
}

namespace {

cfg::PipelineConfig absolute_paths(const cfg::PipelineConfig& c) {
  cfg::PipelineConfig a = c;
  auto fix = [&](fs::path& p) {
    if (!p.empty()) p = fs::absolute(c.resolve(p)).lexically_normal();
  };
  fix(a.data.wd_dir);
  fix(a.data.leg_dir);
  fix(a.wd.checkpoint);
  fix(a.wd.checkpoint_2class);
  fix(a.lps1.checkpoint);
  fix(a.lps2.checkpoint);
  fix(a.sw.base_checkpoint);
  fix(a.sw.checkpoint);
  fix(a.sw.checkpoint_no_pose);
  fix(a.pipeline.run_root);
  a.base_dir = ".";
  return a;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw IoError("malformed json in " + path.string() + ": " + e.what());
  }
}

json normalized_to_json(const geom::NormalizedPose& p) { return {{"values", p.values}}; }

}  // namespace

json run_and_persist(Pipeline& pipeline, const RunInputs& inputs, const fs::path& run_dir) {
  const RunOutput out = pipeline.run_with_layout(inputs.x_m, inputs.tags, inputs.seed, inputs.layout);
  return persist_run(out, inputs, pipeline.config(), {{"no_pose", pipeline.no_pose()}, {"two_class", pipeline.two_class()}},
                     run_dir);
}

json persist_run(const RunOutput& out, const RunInputs& inputs, const cfg::PipelineConfig& config, const json& variant,
                 const fs::path& run_dir) {
  for (const char* sub : {"inputs", "intermediates", "outputs", "metrics"}) fs::create_directories(run_dir / sub);

  img::write_png(run_dir / "inputs/x_m.png", inputs.x_m);
  const bool keep_geometry = inputs.geometry && inputs.layout.is_identity();
  if (keep_geometry) {
    json g = json::array();
    for (const auto& s : *inputs.geometry) g.push_back(geom::shoe_geometry_to_json(s));
    write_json(run_dir / "inputs/geometry.json", g);
  }
  img::write_png(run_dir / "intermediates/x_m.png", out.x_m);
  img::write_png(run_dir / "intermediates/tri_mask.png", out.tri_mask);
  img::write_png(run_dir / "intermediates/x_w.png", out.x_w);
  write_json(run_dir / "intermediates/c_p.json", geom::pose_to_json(out.c_p));
  write_json(run_dir / "intermediates/l0_prime.json", normalized_to_json(out.l0_prime));
  write_json(run_dir / "intermediates/pose.json", geom::pose_to_json(out.pose));
  img::write_png(run_dir / "intermediates/x_p.png", out.x_p);
  img::write_png(run_dir / "intermediates/raw.png", out.raw);
  img::write_png(run_dir / "outputs/final.png", out.final_image);

  const json metrics = run_metrics(out, inputs.tags, keep_geometry ? &*inputs.geometry : nullptr, config);
  write_json(run_dir / "metrics/metrics.json", metrics);

  json record;
  record["run_id"] = (run_dir.has_filename() ? run_dir : run_dir.parent_path()).filename().string();
  record["source"] = inputs.source;
  record["seed"] = inputs.seed;
  record["tags"] = synth::tags_to_string(inputs.tags);
  record["layout"] = to_json(inputs.layout);
  record["variant"] = variant;
  record["config"] = cfg::to_ini(absolute_paths(config));
  record["paths"] = {{"input", "inputs/x_m.png"},
                     {"geometry", keep_geometry ? json("inputs/geometry.json") : json(nullptr)},
                     {"x_m", "intermediates/x_m.png"},
                     {"tri_mask", "intermediates/tri_mask.png"},
                     {"x_w", "intermediates/x_w.png"},
                     {"c_p", "intermediates/c_p.json"},
                     {"l0_prime", "intermediates/l0_prime.json"},
                     {"pose", "intermediates/pose.json"},
                     {"x_p", "intermediates/x_p.png"},
                     {"raw", "intermediates/raw.png"},
                     {"final", "outputs/final.png"},
                     {"metrics", "metrics/metrics.json"}};
  record["metrics"] = metrics;
  write_json(run_dir / "record.json", record);
  return record;
}

cfg::PipelineConfig load_run_config(const fs::path& run_dir) {
  const json record = read_json(run_dir / "record.json");
  return cfg::parse_config(record.at("config").get<std::string>());
}

RunInputs load_run_inputs(const fs::path& run_dir) {
  const json record = read_json(run_dir / "record.json");
  RunInputs in;
  in.x_m = img::read_png(run_dir / record.at("paths").at("input").get<std::string>());
  in.tags = synth::tags_from_string(record.at("tags").get<std::string>());
  in.seed = record.at("seed").get<std::uint64_t>();
  in.layout = layout_from_json(record.at("layout"));
  in.source = record.value("source", "");
  const auto& g = record.at("paths").at("geometry");
  if (!g.is_null()) {
    std::vector<geom::ShoeGeometry> shoes;
    for (const auto& s : read_json(run_dir / g.get<std::string>())) shoes.push_back(geom::shoe_geometry_from_json(s));
    in.geometry = std::move(shoes);
  }
  return in;
}

json evaluate_run(const fs::path& run_dir) {
  const json record = read_json(run_dir / "record.json");
  const auto& paths = record.at("paths");
  const auto config = cfg::parse_config(record.at("config").get<std::string>());
  const auto inputs = load_run_inputs(run_dir);
  RunOutput out;
  out.x_m = img::read_png(run_dir / paths.at("x_m").get<std::string>());
  out.tri_mask = img::read_png(run_dir / paths.at("tri_mask").get<std::string>(), true);
  out.x_w = img::read_png(run_dir / paths.at("x_w").get<std::string>());
  out.c_p = geom::pose_from_json(read_json(run_dir / paths.at("c_p").get<std::string>()));
  out.pose = geom::pose_from_json(read_json(run_dir / paths.at("pose").get<std::string>()));
  out.final_image = img::read_png(run_dir / paths.at("final").get<std::string>());
  const json metrics = run_metrics(out, inputs.tags, inputs.geometry ? &*inputs.geometry : nullptr, config);
  write_json(run_dir / "metrics/metrics.json", metrics);
  return metrics;
}

}  // namespace weargen::pipe
