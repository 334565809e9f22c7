#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "weargen/config.hpp"
#include "weargen/eval.hpp"
#include "weargen/lps.hpp"
#include "weargen/pipeline.hpp"
#include "weargen/synthworld.hpp"
#include "weargen/wd.hpp"

// Held-out evaluations shared by the eval/ablate commands and the acceptance
// harness.
namespace weargen::report {

/// Held-out scenes: record seeds of stream data.seed + 1.
std::vector<synth::SceneSample> held_out(const cfg::PipelineConfig& config, std::size_t n);

/// Foot-estimator inputs built from ground-truth masks.
std::vector<lps::FootSample> foot_samples(std::span<const synth::SceneSample> scenes);

struct LegReport {
  double pass_rate = 0.0;
  std::vector<eval::PlausibilityReport> reports;
  std::vector<geom::PoseAnnotation> poses;
};

/// Samples one leg pose per scene from its ground-truth foot condition (or
/// from `c_p_source[i]`'s condition when given, e.g. a shuffled order) and
/// scores the composed pose against the scene's own shoes.
LegReport leg_plausibility(lps::LegDiffusionModel& model, std::span<const synth::SceneSample> scenes, int steps,
                           std::uint64_t seed, const eval::PlausibilityConfig& pc,
                           const std::vector<std::size_t>* c_p_source = nullptr);

/// Same, with C_p estimated by the foot model from ground-truth X_w.
LegReport cascade_plausibility(lps::FootModel& foot, lps::LegDiffusionModel& model,
                               std::span<const synth::SceneSample> scenes, int steps, std::uint64_t seed,
                               const eval::PlausibilityConfig& pc);

struct EndToEndReport {
  std::size_t runs = 0;
  std::size_t stage_failures = 0;    // inputs a stage rejected; count as failed runs
  std::size_t id_exact = 0;          // runs with id_consistency == 0
  double leg_image_pass_rate = 0.0;
  double leg_image_precision = 0.0;  // mean
  double leg_image_coverage = 0.0;   // mean
  double plausibility_pass_rate = 0.0;
  eval::DistributionScore distribution;  // finals vs ground-truth worn images
  std::vector<pipe::RunOutput> outputs;    // completed runs
  std::vector<std::size_t> output_index;  // scene index of each output
};

/// Full pipeline over the scenes' X_m with run seed record_seed(seed, i).
EndToEndReport end_to_end(pipe::Pipeline& pipeline, std::span<const synth::SceneSample> scenes, std::uint64_t seed,
                          std::size_t batch = 25);

nlohmann::json to_json(const wd::SegMetrics& m);
nlohmann::json to_json(const lps::FootMetrics& m);
nlohmann::json to_json(const LegReport& r);
nlohmann::json to_json(const EndToEndReport& r);

}  // namespace weargen::report
