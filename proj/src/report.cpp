#include "weargen/report.hpp"

#include <algorithm>
#include <optional>

#include "weargen/errors.hpp"

namespace weargen::report {

using nlohmann::json;

std::vector<synth::SceneSample> held_out(const cfg::PipelineConfig& config, std::size_t n) {
  return synth::generate_samples(config.data.scene, config.data.seed + 1, n);
}

std::vector<lps::FootSample> foot_samples(std::span<const synth::SceneSample> scenes) {
  std::vector<lps::FootSample> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back({wd::extract_visible(s.shoe_only, s.tri_mask), s.pose});
  return out;
}

namespace {

LegReport score_legs(lps::LegDiffusionModel& model, std::span<const synth::SceneSample> scenes,
                     const std::vector<geom::NormalizedPose>& c_p, int steps, std::uint64_t seed,
                     const eval::PlausibilityConfig& pc) {
  std::vector<std::uint64_t> seeds(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) seeds[i] = synth::record_seed(seed, i);
  const auto legs = lps::sample_leg_poses(model, c_p, steps, seeds);
  LegReport r;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    r.poses.push_back(lps::compose_pose(c_p[i], legs[i], scenes[i].pose.image_size));
    r.reports.push_back(eval::pose_plausibility(r.poses.back(), scenes[i].geometry, pc));
  }
  r.pass_rate = eval::pass_rate(r.reports);
  return r;
}

}  // namespace

LegReport leg_plausibility(lps::LegDiffusionModel& model, std::span<const synth::SceneSample> scenes, int steps,
                           std::uint64_t seed, const eval::PlausibilityConfig& pc,
                           const std::vector<std::size_t>* c_p_source) {
  if (c_p_source && c_p_source->size() != scenes.size()) {
    throw InvalidArgument("leg_plausibility: one condition index per scene required");
  }
  std::vector<geom::NormalizedPose> c_p;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::size_t src = c_p_source ? (*c_p_source)[i] : i;
    c_p.push_back(geom::normalize_pose(scenes[src].pose, geom::Subset::kFoot));
  }
  return score_legs(model, scenes, c_p, steps, seed, pc);
}

LegReport cascade_plausibility(lps::FootModel& foot, lps::LegDiffusionModel& model,
                               std::span<const synth::SceneSample> scenes, int steps, std::uint64_t seed,
                               const eval::PlausibilityConfig& pc) {
  std::vector<cv::Mat> x_w;
  for (const auto& s : scenes) x_w.push_back(wd::extract_visible(s.shoe_only, s.tri_mask));
  const auto feet = lps::estimate_foot_batch(foot, x_w);
  std::vector<geom::NormalizedPose> c_p;
  for (const auto& f : feet) c_p.push_back(geom::normalize_pose(f, geom::Subset::kFoot));
  return score_legs(model, scenes, c_p, steps, seed, pc);
}

EndToEndReport end_to_end(pipe::Pipeline& pipeline, std::span<const synth::SceneSample> scenes, std::uint64_t seed,
                          std::size_t batch) {
  EndToEndReport r;
  const auto& config = pipeline.config();
  std::vector<eval::PlausibilityReport> plaus;
  std::size_t leg_pass = 0;
  for (std::size_t start = 0; start < scenes.size(); start += batch) {
    const std::size_t end = std::min(scenes.size(), start + batch);
    std::vector<cv::Mat> x_m;
    std::vector<synth::SceneTags> tags;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = start; i < end; ++i) {
      x_m.push_back(scenes[i].shoe_only);
      tags.push_back(scenes[i].tags);
      seeds.push_back(synth::record_seed(seed, i));
    }
    std::vector<std::optional<pipe::RunOutput>> outs;
    try {
      for (auto& o : pipeline.run_batch(x_m, tags, seeds)) outs.emplace_back(std::move(o));
    } catch (const StageError&) {
      // Retry one by one so a single failed input does not drop the batch.
      outs.clear();
      for (std::size_t k = 0; k < x_m.size(); ++k) {
        try {
          outs.emplace_back(pipeline.run(x_m[k], tags[k], seeds[k]));
        } catch (const StageError&) {
          outs.emplace_back(std::nullopt);
        }
      }
    }
    for (std::size_t k = 0; k < outs.size(); ++k) {
      const auto& s = scenes[start + k];
      if (!outs[k]) {
        ++r.stage_failures;
        plaus.emplace_back();
        continue;
      }
      const json m = pipe::run_metrics(*outs[k], s.tags, &s.geometry, config);
      if (m.at("id_consistency").get<int>() == 0) ++r.id_exact;
      const auto& leg = m.at("leg_image");
      if (leg.at("pass").get<bool>()) ++leg_pass;
      r.leg_image_precision += leg.at("precision").get<double>();
      r.leg_image_coverage += leg.at("coverage").get<double>();
      plaus.push_back(eval::pose_plausibility(outs[k]->pose, s.geometry, config.eval.plausibility));
      r.outputs.push_back(std::move(*outs[k]));
      r.output_index.push_back(start + k);
    }
  }
  r.runs = scenes.size();
  if (r.runs > 0) {
    const double n = static_cast<double>(r.runs);
    r.leg_image_pass_rate = static_cast<double>(leg_pass) / n;
    r.leg_image_precision /= n;
    r.leg_image_coverage /= n;
    r.plausibility_pass_rate = eval::pass_rate(plaus);
  }
  if (r.outputs.size() >= eval::kMinSetSize) {
    std::vector<cv::Mat> finals, worn;
    for (std::size_t i = 0; i < r.outputs.size(); ++i) {
      finals.push_back(r.outputs[i].final_image);
      worn.push_back(scenes[r.output_index[i]].worn);
    }
    r.distribution = eval::distribution_score(finals, worn, config.eval.feature_seed, config.eval.permutations);
  }
  return r;
}

json to_json(const wd::SegMetrics& m) {
  return {{"classes", m.classes}, {"iou", m.iou}, {"acc", m.acc}, {"miou", m.miou}, {"macc", m.macc}, {"aacc", m.aacc}};
}

json to_json(const lps::FootMetrics& m) {
  return {{"pck", m.pck}, {"presence_accuracy", m.presence_accuracy}, {"evaluated_points", m.evaluated_points}};
}

json to_json(const LegReport& r) {
  std::size_t collar = 0, order = 0, ratio = 0, knee = 0;
  for (const auto& x : r.reports) {
    collar += x.ankle_in_collar ? 0 : 1;
    order += x.joint_order_ok ? 0 : 1;
    ratio += x.bone_ratio_ok ? 0 : 1;
    knee += x.knee_direction_ok ? 0 : 1;
  }
  return {{"pass_rate", r.pass_rate},
          {"count", r.reports.size()},
          {"failures", {{"ankle_in_collar", collar}, {"joint_order", order}, {"bone_ratio", ratio}, {"knee", knee}}}};
}

json to_json(const EndToEndReport& r) {
  json j = {{"runs", r.runs},
            {"stage_failures", r.stage_failures},
            {"id_exact", r.id_exact},
            {"leg_image_pass_rate", r.leg_image_pass_rate},
            {"leg_image_precision", r.leg_image_precision},
            {"leg_image_coverage", r.leg_image_coverage},
            {"plausibility_pass_rate", r.plausibility_pass_rate}};
  if (r.outputs.size() >= eval::kMinSetSize) j["distribution"] = eval::to_json(r.distribution);
  return j;
}

}  // namespace weargen::report
