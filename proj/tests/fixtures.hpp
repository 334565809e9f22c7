#pragma once

#include "weargen/image_ops.hpp"
#include "weargen/pipeline.hpp"
#include "weargen/skeleton.hpp"
#include "weargen/sw.hpp"
#include "weargen/synthworld.hpp"

namespace testing {

/// A run output assembled from ground truth: the worn scene, pasted back like a
/// generated image,, so the pose oracle and the leg-image check must pass.
inline weargen::pipe::RunOutput ground_truth_run(const weargen::synth::SceneSample& s, int sw_res) {
  using namespace weargen;
  pipe::RunOutput out;
  out.x_m = s.shoe_only.clone();
  out.tri_mask = s.tri_mask.clone();
  out.x_w = cv::Mat::zeros(s.shoe_only.size(), CV_8UC3);
  s.shoe_only.copyTo(out.x_w, s.tri_mask == synth::kVisible);
  out.c_p.image_size = s.pose.image_size;
  for (auto j : geom::subset_joints(geom::Subset::kFoot)) out.c_p[j] = s.pose[j];
  out.l0_prime = geom::normalize_pose(s.pose, geom::Subset::kLeg);
  out.pose = s.pose;
  out.x_p = geom::render_skeleton(s.pose, sw_res);
  out.raw = img::resize_image(s.worn, sw_res);
  out.final_image = sw::paste_back(s.worn, out.x_w, s.tri_mask == synth::kVisible);
  out.id_consistency = 0;
  return out;
}

inline weargen::pipe::RunInputs ground_truth_inputs(const weargen::synth::SceneSample& s) {
  weargen::pipe::RunInputs in;
  in.x_m = s.shoe_only.clone();
  in.tags = s.tags;
  in.seed = s.seed;
  in.geometry = s.geometry;
  in.source = "synthetic:" + std::to_string(s.seed);
  return in;
}

}  // namespace testing
