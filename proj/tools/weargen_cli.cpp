#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "weargen/config.hpp"
#include "weargen/errors.hpp"
#include "weargen/eval.hpp"
#include "weargen/image_ops.hpp"
#include "weargen/lps.hpp"
#include "weargen/pipeline.hpp"
#include "weargen/report.hpp"
#include "weargen/sw.hpp"
#include "weargen/synthworld.hpp"
#include "weargen/wd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace weargen;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "INI config file (defaults apply when omitted)");
  sub->add_option("--seed", c.seed, "seed");
  sub->add_option("--out", c.out, "output path");
}

cfg::PipelineConfig load(const Common& c) {
  if (c.config.empty()) return {};
  return cfg::load_config(c.config);
}

fs::path out_or(const Common& c, const cfg::PipelineConfig& config, const fs::path& fallback) {
  return c.out.empty() ? config.resolve(fallback) : fs::path(c.out);
}

std::string quote(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += (ch == '\n') ? ' ' : ch;
  }
  return "\"" + out + "\"";
}

int fail(const std::string& kind, const std::string& stage, const std::string& message, int code) {
  std::cerr << "error kind=" << kind << " stage=" << stage << " message=" << quote(message) << std::endl;
  return code;
}

nets::ProgressFn progress(const std::string& tag) {
  return [tag](int iter, double loss) { std::cerr << "[" << tag << "] iter " << iter << " loss " << loss << "\n"; };
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::vector<synth::SceneSample> load_set(const fs::path& dir, std::size_t limit, const std::string& stage) {
  if (!fs::exists(dir / "manifest")) {
    throw ConfigError(stage, "dataset not found: " + dir.string() + " (run gen-data first)");
  }
  return synth::load_dataset(dir, limit);
}

fs::path checkpoint(const cfg::PipelineConfig& config, const fs::path& p, const std::string& stage) {
  const fs::path full = config.resolve(p);
  if (!fs::exists(full)) throw ConfigError(stage, "missing checkpoint for stage " + stage + ": " + full.string());
  return full;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- subcommands ----

int cmd_gen_data(const Common& c, std::optional<std::size_t> n, const std::string& kind) {
  const auto config = load(c);
  const auto& d = config.data;
  fs::path dir;
  std::size_t count = 0;
  std::uint64_t seed = c.seed.value_or(d.seed);
  if (kind == "wd") {
    dir = d.wd_dir;
    count = d.wd_count;
  } else if (kind == "legs") {
    dir = d.leg_dir;
    count = d.leg_count;
  } else {
    dir = "data/test";
    count = d.test_count;
    if (!c.seed) seed = d.seed + 1;
  }
  count = n.value_or(count);
  const fs::path out = out_or(c, config, dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = synth::generate_dataset(d.scene, seed, count, out);
  print({{"dir", out.string()}, {"rows", rows.size()}, {"seed", seed}, {"seconds", elapsed(t0)}});
  return 0;
}

int cmd_train_wd(const Common& c, int classes) {
  auto config = load(c);
  if (classes != 2 && classes != 3) throw InvalidArgument("--classes must be 2 or 3");
  auto wc = config.wd.model;
  wc.classes = classes;
  const auto scenes = load_set(config.resolve(config.data.wd_dir), config.data.wd_count, "wd");
  const auto data = wd::seg_pairs(scenes);
  const std::uint64_t seed = c.seed.value_or(0);
  const auto t0 = std::chrono::steady_clock::now();
  nets::TrainLog log;
  auto model = wd::train_wd(data, wc, seed, &log, progress("train-wd"));
  const double secs = elapsed(t0);
  const fs::path out = out_or(c, config, classes == 3 ? config.wd.checkpoint : config.wd.checkpoint_2class);
  ensure_parent(out);
  wd::save_model(model, out, seed);
  const auto test = wd::seg_pairs(report::held_out(config, config.data.test_count));
  const auto m = wd::eval_segmentation(model, test);
  std::cerr << wd::format_metrics(m);
  print({{"checkpoint", out.string()},
         {"seconds", secs},
         {"loss_initial", log.initial()},
         {"loss_final", log.final()},
         {"held_out", report::to_json(m)}});
  return 0;
}

int cmd_train_lps1(const Common& c) {
  auto config = load(c);
  const auto scenes = load_set(config.resolve(config.data.leg_dir), config.lps1.train_count, "lps1");
  const auto data = report::foot_samples(scenes);
  const std::uint64_t seed = c.seed.value_or(0);
  const auto t0 = std::chrono::steady_clock::now();
  nets::TrainLog log;
  auto model = lps::train_foot_estimator(data, config.lps1.model, seed, &log, progress("train-lps1"));
  const double secs = elapsed(t0);
  const fs::path out = out_or(c, config, config.lps1.checkpoint);
  ensure_parent(out);
  lps::save_foot_model(model, out, seed);
  const auto test = report::foot_samples(report::held_out(config, config.data.test_count));
  std::vector<cv::Mat> xs;
  std::vector<geom::PoseAnnotation> truth;
  for (const auto& s : test) {
    xs.push_back(s.x_w);
    truth.push_back(s.pose);
  }
  const auto m = lps::foot_metrics(lps::estimate_foot_batch(model, xs), truth);
  print({{"checkpoint", out.string()},
         {"seconds", secs},
         {"loss_initial", log.initial()},
         {"loss_final", log.final()},
         {"held_out", report::to_json(m)}});
  return 0;
}

int cmd_train_lps2(const Common& c) {
  auto config = load(c);
  const auto scenes = load_set(config.resolve(config.data.leg_dir), config.data.leg_count, "lps2");
  std::vector<geom::PoseAnnotation> poses;
  for (const auto& s : scenes) poses.push_back(s.pose);
  const std::uint64_t seed = c.seed.value_or(0);
  const auto t0 = std::chrono::steady_clock::now();
  nets::TrainLog log;
  auto model = lps::train_leg_diffusion(poses, config.lps2.model, seed, &log, progress("train-lps2"));
  const double secs = elapsed(t0);
  const fs::path out = out_or(c, config, config.lps2.checkpoint);
  ensure_parent(out);
  lps::save_leg_model(model, out, seed);
  const auto test = report::held_out(config, config.data.test_count);
  const auto r = report::leg_plausibility(model, test, config.lps2.model.sample_steps, seed,
                                          config.eval.plausibility);
  print({{"checkpoint", out.string()},
         {"seconds", secs},
         {"loss_initial", log.initial()},
         {"loss_final", log.final()},
         {"held_out", report::to_json(r)}});
  return 0;
}

int cmd_pretrain_base(const Common& c) {
  auto config = load(c);
  const auto scenes = load_set(config.resolve(config.data.leg_dir), config.data.leg_count, "sw");
  const auto data = sw::sw_samples(scenes, config.sw.model.resolution);
  const std::uint64_t seed = c.seed.value_or(0);
  const auto t0 = std::chrono::steady_clock::now();
  nets::TrainLog log;
  auto model = sw::pretrain_base(data, config.sw.model, seed, &log, progress("pretrain-base"));
  const double secs = elapsed(t0);
  const fs::path out = out_or(c, config, config.sw.base_checkpoint);
  ensure_parent(out);
  sw::save_model(model, out, seed);
  print({{"checkpoint", out.string()}, {"seconds", secs}, {"loss_initial", log.initial()}, {"loss_final", log.final()}});
  return 0;
}

int cmd_train_sw(const Common& c, bool no_pose, const std::string& base_path) {
  auto config = load(c);
  const fs::path base_ckpt = base_path.empty() ? config.resolve(config.sw.base_checkpoint) : fs::path(base_path);
  if (!fs::exists(base_ckpt)) {
    throw ConfigError("sw", "missing base checkpoint: " + base_ckpt.string() + " (run pretrain-base first)");
  }
  const auto base = sw::load_model(base_ckpt);
  auto sc = config.sw.model;
  sc.use_pose = !no_pose;
  if (base.config.resolution != sc.resolution) throw ConfigError("sw", "base checkpoint resolution differs from config");
  const auto scenes = load_set(config.resolve(config.data.leg_dir), config.data.leg_count, "sw");
  const auto data = sw::sw_samples(scenes, sc.resolution);
  const std::uint64_t seed = c.seed.value_or(0);
  const auto t0 = std::chrono::steady_clock::now();
  nets::TrainLog log;
  auto model = sw::train_sw(base, data, sc, seed, &log, progress("train-sw"));
  const double secs = elapsed(t0);
  const fs::path out = out_or(c, config, no_pose ? config.sw.checkpoint_no_pose : config.sw.checkpoint);
  ensure_parent(out);
  sw::save_model(model, out, seed);
  print({{"checkpoint", out.string()}, {"seconds", secs}, {"loss_initial", log.initial()}, {"loss_final", log.final()}});
  return 0;
}

struct InferArgs {
  std::string input;
  std::string tags;
  std::string geometry;
  std::optional<std::size_t> test_index;
  std::string id;
  std::string replay;
  bool no_pose = false;
  bool two_class = false;
};

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  return std::string(std::istreambuf_iterator<char>(fa), {}) == std::string(std::istreambuf_iterator<char>(fb), {});
}

int cmd_infer(const Common& c, const InferArgs& a) {
  if (!a.replay.empty()) {
    const fs::path src = a.replay;
    auto config = pipe::load_run_config(src);
    auto inputs = pipe::load_run_inputs(src);
    std::ifstream rf(src / "record.json");
    const json record = json::parse(rf);
    const auto& v = record.at("variant");
    pipe::Pipeline pipeline(config, v.at("no_pose").get<bool>(), v.at("two_class").get<bool>());
    const fs::path dst = c.out.empty() ? fs::path(src.string() + "-replay") : fs::path(c.out);
    pipe::run_and_persist(pipeline, inputs, dst);
    const bool identical = same_bytes(src / "outputs/final.png", dst / "outputs/final.png");
    print({{"run_dir", dst.string()}, {"replay_of", src.string()}, {"identical", identical}});
    return identical ? 0 : fail("replay", "pipeline", "replayed output differs from the recorded run", 6);
  }

  auto config = load(c);
  pipe::RunInputs inputs;
  inputs.seed = c.seed.value_or(0);
  inputs.layout = pipe::layout_from_config(config);
  if (a.test_index) {
    const auto s = synth::sample_scene(synth::record_seed(config.data.seed + 1, *a.test_index), config.data.scene);
    inputs.x_m = s.shoe_only;
    inputs.tags = a.tags.empty() ? s.tags : synth::tags_from_string(a.tags);
    inputs.geometry = s.geometry;
    inputs.source = "held-out record " + std::to_string(*a.test_index);
  } else {
    if (a.input.empty()) throw InvalidArgument("infer needs --input or --test-index");
    if (a.tags.empty()) throw InvalidArgument("infer needs --tags with --input");
    inputs.x_m = img::read_png(a.input);
    inputs.tags = synth::tags_from_string(a.tags);
    inputs.source = fs::absolute(a.input).string();
    if (!a.geometry.empty()) {
      std::ifstream gf(a.geometry);
      if (!gf) throw IoError("cannot read " + a.geometry);
      std::vector<geom::ShoeGeometry> shoes;
      for (const auto& g : json::parse(gf)) shoes.push_back(geom::shoe_geometry_from_json(g));
      inputs.geometry = std::move(shoes);
    }
  }
  pipe::Pipeline pipeline(config, a.no_pose, a.two_class);
  const std::string id = a.id.empty() ? "run-" + std::to_string(inputs.seed) : a.id;
  const fs::path dir = c.out.empty() ? config.resolve(config.pipeline.run_root) / id : fs::path(c.out);
  const auto t0 = std::chrono::steady_clock::now();
  const json record = pipe::run_and_persist(pipeline, inputs, dir);
  print({{"run_dir", dir.string()}, {"seconds", elapsed(t0)}, {"metrics", record.at("metrics")}});
  return 0;
}

int cmd_eval(const Common& c, const std::string& run) {
  if (!run.empty()) {
    print(pipe::evaluate_run(run));
    return 0;
  }
  auto config = load(c);
  const std::uint64_t seed = c.seed.value_or(0);
  json out;
  const auto test = report::held_out(config, std::max(config.data.test_count, config.eval.count));
  const std::span<const synth::SceneSample> seg_set(test.data(), std::min(test.size(), config.data.test_count));
  const std::span<const synth::SceneSample> e2e_set(test.data(), std::min(test.size(), config.eval.count));

  auto wd_model = wd::load_model(checkpoint(config, config.wd.checkpoint, "wd"));
  out["wd"] = report::to_json(wd::eval_segmentation(wd_model, wd::seg_pairs(seg_set)));

  auto foot = lps::load_foot_model(checkpoint(config, config.lps1.checkpoint, "lps1"));
  const auto fs_set = report::foot_samples(seg_set);
  std::vector<cv::Mat> xs;
  std::vector<geom::PoseAnnotation> truth;
  for (const auto& s : fs_set) {
    xs.push_back(s.x_w);
    truth.push_back(s.pose);
  }
  out["lps1"] = report::to_json(lps::foot_metrics(lps::estimate_foot_batch(foot, xs), truth));

  auto leg = lps::load_leg_model(checkpoint(config, config.lps2.checkpoint, "lps2"));
  const int steps = config.lps2.model.sample_steps;
  out["lps2"] = report::to_json(report::leg_plausibility(leg, seg_set, steps, seed, config.eval.plausibility));
  out["cascade"] = report::to_json(report::cascade_plausibility(foot, leg, seg_set, steps, seed, config.eval.plausibility));

  pipe::Pipeline pipeline(config);
  out["end_to_end"] = report::to_json(report::end_to_end(pipeline, e2e_set, seed));
  if (!c.out.empty()) {
    ensure_parent(c.out);
    std::ofstream f(c.out);
    f << out.dump(2) << "\n";
  }
  print(out);
  return 0;
}

int cmd_ablate(const Common& c) {
  auto config = load(c);
  const std::uint64_t seed = c.seed.value_or(0);
  const auto test = report::held_out(config, std::max(config.data.test_count, config.eval.count));
  const std::span<const synth::SceneSample> seg_set(test.data(), std::min(test.size(), config.data.test_count));
  const std::span<const synth::SceneSample> e2e_set(test.data(), std::min(test.size(), config.eval.count));
  json out;

  json wd_pair;
  for (int classes : {3, 2}) {
    const auto& path = classes == 3 ? config.wd.checkpoint : config.wd.checkpoint_2class;
    auto m = wd::load_model(checkpoint(config, path, "wd"));
    const auto metrics = wd::eval_segmentation(m, wd::seg_pairs(seg_set));
    wd_pair[std::to_string(classes) + "_class"] = {
        {"wearable_iou", metrics.iou[static_cast<std::size_t>(wd::wearable_label(classes))]},
        {"metrics", report::to_json(metrics)}};
  }
  out["wd"] = wd_pair;

  json sw_pair;
  for (bool no_pose : {false, true}) {
    pipe::Pipeline pipeline(config, no_pose);
    sw_pair[no_pose ? "shoe_only_control" : "full_control"] =
        report::to_json(report::end_to_end(pipeline, e2e_set, seed));
  }
  out["sw"] = sw_pair;
  if (!c.out.empty()) {
    ensure_parent(c.out);
    std::ofstream f(c.out);
    f << out.dump(2) << "\n";
  }
  print(out);
  return 0;
}

int cmd_config(const Common& c, bool table) {
  if (table) {
    for (const auto& k : cfg::key_table()) {
      std::cout << k.section << "." << k.key << "\t" << k.default_value << "\t" << k.description << "\n";
    }
    return 0;
  }
  std::cout << cfg::to_ini(load(c));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weargen: synthetic shoe-wearing image generation"};
  app.require_subcommand(1);

  Common common;
  std::optional<std::size_t> n;
  std::string kind = "wd";
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, common);
  gen->add_option("--n", n, "number of records");
  gen->add_option("--kind", kind, "wd | legs | test")->check(CLI::IsMember({"wd", "legs", "test"}));

  int classes = 3;
  auto* twd = app.add_subcommand("train-wd", "train the wearable-area segmenter");
  add_common(twd, common);
  twd->add_option("--classes", classes, "3 (background/visible/wearable) or 2 (other/wearable)");

  auto* tl1 = app.add_subcommand("train-lps1", "train the foot keypoint estimator");
  add_common(tl1, common);
  auto* tl2 = app.add_subcommand("train-lps2", "train the leg keypoint diffusion model");
  add_common(tl2, common);
  auto* pb = app.add_subcommand("pretrain-base", "pretrain the tag-conditioned image denoiser");
  add_common(pb, common);

  bool no_pose = false;
  std::string base_path;
  auto* tsw = app.add_subcommand("train-sw", "train the control branch on top of the pretrained base");
  add_common(tsw, common);
  tsw->add_flag("--no-pose", no_pose, "condition on the visible shoe only");
  tsw->add_option("--base", base_path, "base checkpoint (default from config)");

  InferArgs ia;
  auto* inf = app.add_subcommand("infer", "run the full pipeline on one shoe image");
  add_common(inf, common);
  inf->add_option("--input", ia.input, "shoe-on-black PNG");
  inf->add_option("--tags", ia.tags, "scene tags, e.g. floor=wood,tone=light,shoes=one,garment=jeans");
  inf->add_option("--geometry", ia.geometry, "shoe geometry JSON (enables the pose oracle)");
  inf->add_option("--test-index", ia.test_index, "use a held-out synthetic record as input");
  inf->add_option("--id", ia.id, "run id (default run-<seed>)");
  inf->add_option("--replay", ia.replay, "re-run a finished run directory and compare outputs");
  inf->add_flag("--no-pose", ia.no_pose, "use the shoe-only control model");
  inf->add_flag("--two-class", ia.two_class, "use the 2-class segmenter");

  std::string run;
  auto* ev = app.add_subcommand("eval", "score a run directory, or the held-out suite when --run is absent");
  add_common(ev, common);
  ev->add_option("--run", run, "finished run directory");

  auto* ab = app.add_subcommand("ablate", "paired reports: 3- vs 2-class segmenter, pose vs shoe-only control");
  add_common(ab, common);

  bool table = false;
  auto* cf = app.add_subcommand("config", "print the effective config, or the key table");
  add_common(cf, common);
  cf->add_flag("--keys", table, "print section.key, default and description");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", "cli", e.what(), 64);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (*gen) return cmd_gen_data(common, n, kind);
    if (*twd) return cmd_train_wd(common, classes);
    if (*tl1) return cmd_train_lps1(common);
    if (*tl2) return cmd_train_lps2(common);
    if (*pb) return cmd_pretrain_base(common);
    if (*tsw) return cmd_train_sw(common, no_pose, base_path);
    if (*inf) return cmd_infer(common, ia);
    if (*ev) return cmd_eval(common, run);
    if (*ab) return cmd_ablate(common);
    if (*cf) return cmd_config(common, table);
  } catch (const ConfigError& e) {
    return fail("config", e.stage(), e.what(), 2);
  } catch (const StageError& e) {
    return fail("stage", e.stage(), e.what(), 3);
  } catch (const IoError& e) {
    return fail("io", name, e.what(), 4);
  } catch (const InvalidArgument& e) {
    return fail("invalid_argument", name, e.what(), 5);
  } catch (const OutOfBounds& e) {
    return fail("out_of_bounds", name, e.what(), 5);
  } catch (const NumericGuard& e) {
    return fail("numeric", name, e.what(), 7);
  } catch (const std::exception& e) {
    return fail("internal", name, e.what(), 1);
  }
  return 0;
}
