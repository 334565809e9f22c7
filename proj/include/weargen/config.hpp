#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "weargen/eval.hpp"
#include "weargen/lps.hpp"
#include "weargen/sw.hpp"
#include "weargen/synthworld.hpp"
#include "weargen/wd.hpp"

namespace weargen::cfg {

struct DataSection {
  synth::SceneConfig scene;
  std::uint64_t seed = 1;          // global dataset seed
  std::size_t wd_count = 2000;     // segmentation set
  std::size_t leg_count = 10000;   // shoe-leg set
  std::size_t test_count = 200;    // held-out records, drawn from seed + 1
  std::filesystem::path wd_dir = "data/wd";
  std::filesystem::path leg_dir = "data/legs";
};

struct WDSection {
  wd::WDConfig model;
  std::filesystem::path checkpoint = "checkpoints/wd.ckpt";
  std::filesystem::path checkpoint_2class = "checkpoints/wd2.ckpt";
};

struct FootSection {
  lps::FootConfig model;
  std::size_t train_count = 4000;  // first records of the shoe-leg set
  std::filesystem::path checkpoint = "checkpoints/foot.ckpt";
};

struct LegSection {
  lps::LegConfig model;
  std::filesystem::path checkpoint = "checkpoints/leg.ckpt";
};

struct SWSection {
  sw::SWConfig model;
  std::filesystem::path base_checkpoint = "checkpoints/base.ckpt";
  std::filesystem::path checkpoint = "checkpoints/sw.ckpt";
  std::filesystem::path checkpoint_no_pose = "checkpoints/sw_nopose.ckpt";
};

struct PipelineSection {
  std::filesystem::path run_root = "runs";
  double layout_rotation_deg = 0.0;  // about the canvas centre
  double layout_scale = 1.0;
  double layout_tx = 0.0;            // pixels
  double layout_ty = 0.0;
};

struct EvalSection {
  eval::PlausibilityConfig plausibility;
  eval::LegImageConfig leg_image;
  std::size_t count = 100;           // held-out scenes used by eval/ablate
  std::uint64_t feature_seed = 7;
  int permutations = 200;
};

struct PipelineConfig {
  DataSection data;
  WDSection wd;
  FootSection lps1;
  LegSection lps2;
  SWSection sw;
  PipelineSection pipeline;
  EvalSection eval;

  /// Directory relative paths are resolved against (the config file's).
  std::filesystem::path base_dir = ".";
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// One documented configuration key.
struct KeyInfo {
  std::string section;
  std::string key;
  std::string default_value;
  std::string description;
};

/// Every accepted key with its default, in file order.
std::vector<KeyInfo> key_table();

/// Parses INI text. Unknown sections or keys and malformed values throw
/// ConfigError naming the section.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Full INI dump (every key), suitable for parse_config.
std::string to_ini(const PipelineConfig& config);

}  // namespace weargen::cfg
