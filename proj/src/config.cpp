#include "weargen/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "weargen/errors.hpp"

namespace weargen::cfg {

namespace {

struct Entry {
  KeyInfo info;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

std::string format(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}
template <typename T>
  requires std::is_integral_v<T>
std::string format(T v) {
  return std::to_string(v);
}
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::filesystem::path& v) { return v.string(); }

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
  T v{};
  const char* end = s.data() + s.size();
  auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw std::invalid_argument(where + ": cannot parse '" + s + "'");
  return v;
}

void parse_into(double& dst, const std::string& s, const std::string& where) { dst = parse_number<double>(s, where); }
template <typename T>
  requires(std::is_integral_v<T> && !std::is_same_v<T, bool>)
void parse_into(T& dst, const std::string& s, const std::string& where) {
  // Every integer key is a count, size or seed.
  if (!s.empty() && s[0] == '-') throw std::invalid_argument(where + ": must not be negative, got '" + s + "'");
  dst = parse_number<T>(s, where);
}
void parse_into(bool& dst, const std::string& s, const std::string& where) {
  if (s == "true" || s == "1") {
    dst = true;
  } else if (s == "false" || s == "0") {
    dst = false;
  } else {
    throw std::invalid_argument(where + ": expected true or false, got '" + s + "'");
  }
}
void parse_into(std::filesystem::path& dst, const std::string& s, const std::string&) { dst = s; }

template <typename Access>
Entry entry(std::string section, std::string key, std::string description, Access access) {
  Entry e;
  e.info = {section, key, "", std::move(description)};
  const std::string where = section + "." + key;
  e.set = [access, where](PipelineConfig& c, const std::string& v) { parse_into(access(c), v, where); };
  e.get = [access](const PipelineConfig& c) { return format(access(c)); };
  e.info.default_value = e.get(PipelineConfig{});
  return e;
}

#define WG_KEY(section, key, desc, expr) entry(section, key, desc, [](auto& c) -> auto& { return c.expr; })

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      WG_KEY("data", "canvas", "scene side in pixels", data.scene.canvas),
      WG_KEY("data", "two_shoe_prob", "probability of a two-shoe scene", data.scene.two_shoe_prob),
      WG_KEY("data", "max_knee_bend", "largest knee bend, radians", data.scene.max_knee_bend),
      WG_KEY("data", "calf_tilt_min_deg", "calf lean from vertical, forward-positive", data.scene.calf_tilt_min_deg),
      WG_KEY("data", "calf_tilt_max_deg", "calf lean upper bound", data.scene.calf_tilt_max_deg),
      WG_KEY("data", "shoe_tilt_deg", "shoe ground tilt range (+/-)", data.scene.shoe_tilt_deg),
      WG_KEY("data", "band_radius_frac", "wearable band radius, fraction of shoe length", data.scene.band_radius_frac),
      WG_KEY("data", "horizon_frac", "wall/floor boundary, fraction of canvas", data.scene.horizon_frac),
      WG_KEY("data", "seed", "global dataset seed", data.seed),
      WG_KEY("data", "wd_count", "records in the segmentation set", data.wd_count),
      WG_KEY("data", "leg_count", "records in the shoe-leg set", data.leg_count),
      WG_KEY("data", "test_count", "held-out records (stream seed + 1)", data.test_count),
      WG_KEY("data", "wd_dir", "segmentation set directory", data.wd_dir),
      WG_KEY("data", "leg_dir", "shoe-leg set directory", data.leg_dir),

      WG_KEY("wd", "resolution", "network input side", wd.model.resolution),
      WG_KEY("wd", "base_channels", "width of the first encoder stage", wd.model.base_channels),
      WG_KEY("wd", "iterations", "optimizer steps", wd.model.iterations),
      WG_KEY("wd", "batch_size", "images per step", wd.model.batch_size),
      WG_KEY("wd", "learning_rate", "Adam learning rate (x0.2 after 70% of steps)", wd.model.learning_rate),
      WG_KEY("wd", "mosaic_prob", "mosaic augmentation probability", wd.model.mosaic_prob),
      WG_KEY("wd", "rotation_prob", "rotation augmentation probability", wd.model.rotation_prob),
      WG_KEY("wd", "rotation_deg", "rotation range (+/-)", wd.model.rotation_deg),
      WG_KEY("wd", "color_prob", "colour gain/offset augmentation probability", wd.model.color_prob),
      WG_KEY("wd", "scale_prob", "rescale augmentation probability", wd.model.scale_prob),
      WG_KEY("wd", "checkpoint", "3-class model", wd.checkpoint),
      WG_KEY("wd", "checkpoint_2class", "2-class ablation model", wd.checkpoint_2class),

      WG_KEY("lps1", "resolution", "foot network input side", lps1.model.resolution),
      WG_KEY("lps1", "base_channels", "width of the first encoder stage", lps1.model.base_channels),
      WG_KEY("lps1", "sigma", "heatmap Gaussian std, pixels", lps1.model.sigma),
      WG_KEY("lps1", "iterations", "optimizer steps", lps1.model.iterations),
      WG_KEY("lps1", "batch_size", "images per step", lps1.model.batch_size),
      WG_KEY("lps1", "learning_rate", "Adam learning rate (x0.2 after 70% of steps)", lps1.model.learning_rate),
      WG_KEY("lps1", "rotation_prob", "rotation augmentation probability", lps1.model.rotation_prob),
      WG_KEY("lps1", "rotation_deg", "rotation range (+/-)", lps1.model.rotation_deg),
      WG_KEY("lps1", "scale_prob", "rescale/crop/pad probability", lps1.model.scale_prob),
      WG_KEY("lps1", "scale_min", "smallest rescale factor", lps1.model.scale_min),
      WG_KEY("lps1", "scale_max", "largest rescale factor", lps1.model.scale_max),
      WG_KEY("lps1", "train_count", "shoe-leg records used for training", lps1.train_count),
      WG_KEY("lps1", "checkpoint", "foot estimator", lps1.checkpoint),

      WG_KEY("lps2", "hidden", "denoiser hidden width", lps2.model.hidden),
      WG_KEY("lps2", "layers", "denoiser hidden layers", lps2.model.layers),
      WG_KEY("lps2", "time_dim", "sinusoidal timestep embedding size", lps2.model.time_dim),
      WG_KEY("lps2", "train_steps", "diffusion timesteps T", lps2.model.train_steps),
      WG_KEY("lps2", "beta_min", "first beta of the linear schedule", lps2.model.beta_min),
      WG_KEY("lps2", "beta_max", "last beta of the linear schedule", lps2.model.beta_max),
      WG_KEY("lps2", "sample_steps", "DDIM steps", lps2.model.sample_steps),
      WG_KEY("lps2", "iterations", "optimizer steps", lps2.model.iterations),
      WG_KEY("lps2", "batch_size", "poses per step", lps2.model.batch_size),
      WG_KEY("lps2", "learning_rate", "Adam learning rate (x0.2 after 70% of steps)", lps2.model.learning_rate),
      WG_KEY("lps2", "rotation_prob", "joint rotation augmentation probability", lps2.model.rotation_prob),
      WG_KEY("lps2", "rotation_deg", "rotation range (+/-)", lps2.model.rotation_deg),
      WG_KEY("lps2", "checkpoint", "leg diffusion model", lps2.checkpoint),

      WG_KEY("sw", "resolution", "generation canvas side", sw.model.resolution),
      WG_KEY("sw", "base_channels", "denoiser width", sw.model.base_channels),
      WG_KEY("sw", "time_dim", "sinusoidal timestep embedding size", sw.model.time_dim),
      WG_KEY("sw", "emb_dim", "time/tag embedding width", sw.model.emb_dim),
      WG_KEY("sw", "train_steps", "diffusion timesteps T", sw.model.train_steps),
      WG_KEY("sw", "beta_min", "first beta of the linear schedule", sw.model.beta_min),
      WG_KEY("sw", "beta_max", "last beta of the linear schedule", sw.model.beta_max),
      WG_KEY("sw", "sample_steps", "DDIM steps", sw.model.sample_steps),
      WG_KEY("sw", "cfg_scale", "classifier-free guidance scale", sw.model.cfg_scale),
      WG_KEY("sw", "clip_x0", "clamp the x0 estimate to [-1,1] at each step", sw.model.clip_x0),
      WG_KEY("sw", "cond_dropout", "joint condition dropout during training", sw.model.cond_dropout),
      WG_KEY("sw", "base_iterations", "base pretraining steps", sw.model.base_iterations),
      WG_KEY("sw", "control_iterations", "control-branch training steps", sw.model.control_iterations),
      WG_KEY("sw", "batch_size", "images per step", sw.model.batch_size),
      WG_KEY("sw", "base_learning_rate", "Adam learning rate for the base", sw.model.base_learning_rate),
      WG_KEY("sw", "control_learning_rate", "Adam learning rate for the control branch",
             sw.model.control_learning_rate),
      WG_KEY("sw", "base_checkpoint", "pretrained base denoiser", sw.base_checkpoint),
      WG_KEY("sw", "checkpoint", "full model (pose + shoe control)", sw.checkpoint),
      WG_KEY("sw", "checkpoint_no_pose", "ablation model (shoe-only control)", sw.checkpoint_no_pose),

      WG_KEY("pipeline", "run_root", "where infer creates run directories", pipeline.run_root),
      WG_KEY("pipeline", "layout_rotation_deg", "layout rotation about the canvas centre", pipeline.layout_rotation_deg),
      WG_KEY("pipeline", "layout_scale", "layout scale about the canvas centre", pipeline.layout_scale),
      WG_KEY("pipeline", "layout_tx", "layout translation x, pixels", pipeline.layout_tx),
      WG_KEY("pipeline", "layout_ty", "layout translation y, pixels", pipeline.layout_ty),

      WG_KEY("eval", "ratio_min", "smallest thigh/calf length ratio", eval.plausibility.ratio_min),
      WG_KEY("eval", "ratio_max", "largest thigh/calf length ratio", eval.plausibility.ratio_max),
      WG_KEY("eval", "knee_max_deg", "largest forward knee deviation", eval.plausibility.knee_max_deg),
      WG_KEY("eval", "knee_back_tol_deg", "tolerated backward knee deviation", eval.plausibility.knee_back_tol_deg),
      WG_KEY("eval", "collar_tol_px", "ankle distance tolerated outside the collar", eval.plausibility.collar_tol_px),
      WG_KEY("eval", "leg_min_diff", "backdrop difference marking leg pixels", eval.leg_image.min_diff),
      WG_KEY("eval", "leg_corridor_frac", "allowed distance from a bone, fraction of side",
             eval.leg_image.corridor_frac),
      WG_KEY("eval", "leg_min_coverage", "bone pixels that must show a leg", eval.leg_image.min_coverage),
      WG_KEY("eval", "leg_min_precision", "leg pixels that must lie near the pose", eval.leg_image.min_precision),
      WG_KEY("eval", "count", "held-out scenes for eval/ablate", eval.count),
      WG_KEY("eval", "feature_seed", "random-feature seed of the distribution score", eval.feature_seed),
      WG_KEY("eval", "permutations", "permutation-null draws", eval.permutations),
  };
  return table;
}

#undef WG_KEY

}  // namespace

std::filesystem::path PipelineConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

std::vector<KeyInfo> key_table() {
  std::vector<KeyInfo> out;
  for (const auto& e : entries()) out.push_back(e.info);
  return out;
}

PipelineConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", std::string("malformed config: ") + e.message() + " (line " +
                                    std::to_string(e.line()) + ")");
  }
  std::map<std::pair<std::string, std::string>, const Entry*> index;
  std::set<std::string> sections;
  for (const auto& e : entries()) {
    index[{e.info.section, e.info.key}] = &e;
    sections.insert(e.info.section);
  }
  PipelineConfig c;
  for (const auto& [section, body] : tree) {
    if (!sections.count(section)) throw ConfigError(section, "unknown config section [" + section + "]");
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(section, "key '" + section + "' outside any section");
    }
    for (const auto& [key, value] : body) {
      auto it = index.find({section, key});
      if (it == index.end()) throw ConfigError(section, "unknown config key " + section + "." + key);
      try {
        it->second->set(c, value.data());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(section, e.what());
      }
    }
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  PipelineConfig c = parse_config(ss.str());
  c.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return c;
}

std::string to_ini(const PipelineConfig& config) {
  std::string out;
  std::string section;
  for (const auto& e : entries()) {
    if (e.info.section != section) {
      if (!section.empty()) out += '\n';
      section = e.info.section;
      out += "[" + section + "]\n";
    }
    out += e.info.key + " = " + e.get(config) + "\n";
  }
  return out;
}

}  // namespace weargen::cfg
