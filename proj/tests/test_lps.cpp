#include "unit.hpp"

#include <cmath>
#include <random>

#include <opencv2/imgproc.hpp>

#include "support.hpp"
#include "weargen/checkpoint.hpp"
#include "weargen/errors.hpp"
#include "weargen/lps.hpp"
#include "weargen/report.hpp"
#include "weargen/synthworld.hpp"

using namespace weargen;
using namespace weargen::lps;
using geom::Joint;
using geom::Subset;

namespace {

geom::PoseAnnotation foot_only(const geom::PoseAnnotation& p) {
  geom::PoseAnnotation out;
  out.image_size = p.image_size;
  for (Joint j : geom::subset_joints(Subset::kFoot)) out[j] = p[j];
  return out;
}

LegConfig small_leg(int iterations) {
  LegConfig c;
  c.hidden = 128;
  c.layers = 3;
  c.iterations = iterations;
  c.batch_size = 128;
  c.rotation_prob = 0.0;
  return c;
}

}  // namespace

TEST_CASE("foot metrics on a hand-worked example") {
  geom::PoseAnnotation truth;
  truth.image_size = 100;
  truth[Joint::kLeftAnkle] = {50, 50, true};
  truth[Joint::kLeftHeel] = {40, 60, true};
  truth[Joint::kLeftBigToe] = {70, 62, true};
  truth[Joint::kLeftSmallToe] = {68, 66, true};
  geom::PoseAnnotation pred = truth;
  pred[Joint::kLeftHeel] = {40, 69, true};            // 9 px: inside 0.1 * 100
  pred[Joint::kLeftBigToe] = {70 + 8, 62 + 8, true};  // 11.3 px: outside
  pred[Joint::kLeftSmallToe].present = false;         // missed point
  pred[Joint::kRightHeel] = {10, 10, true};           // spurious point
  const std::vector<geom::PoseAnnotation> p{pred}, t{truth};
  const auto m = foot_metrics(p, t, 0.1);
  CHECK(m.evaluated_points == 4);
  CHECK(m.pck == doctest::Approx(0.5));
  CHECK(m.presence_accuracy == doctest::Approx(6.0 / 8.0));
  CHECK_THROWS_AS(foot_metrics(p, {}, 0.1), InvalidArgument);
}

TEST_CASE("foot augmentation keeps image and keypoints aligned") {
  // Black canvas with a lit 3x3 dot under each present foot point.
  const auto scene = synth::sample_scene(8, synth::SceneConfig{});
  FootSample s{cv::Mat(64, 64, CV_8UC3, cv::Scalar::all(0)), foot_only(scene.pose)};
  const Joint probe = scene.pose[Joint::kLeftHeel].present ? Joint::kLeftHeel : Joint::kRightHeel;
  const auto& k = s.pose[probe];
  cv::circle(s.x_w, cv::Point(static_cast<int>(k.x), static_cast<int>(k.y)), 1, cv::Scalar::all(255), cv::FILLED);
  FootConfig c;
  c.rotation_prob = 1.0;
  c.scale_prob = 1.0;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 40; ++i) {
    const auto out = augment_foot(s, c, rng);
    REQUIRE(out.pose[probe].present);
    cv::Mat gray;
    cv::cvtColor(out.x_w, gray, cv::COLOR_BGR2GRAY);
    const cv::Moments mo = cv::moments(gray, false);
    REQUIRE(mo.m00 > 0);
    const double cx = mo.m10 / mo.m00, cy = mo.m01 / mo.m00;
    // The dot sits within a pixel of the point; scaling can stretch that.
    const auto& q = out.pose[probe];
    CHECK(std::hypot(cx - q.x, cy - q.y) < 2.5);
    CHECK_NOTHROW(geom::validate(out.pose));
  }
}

TEST_CASE("foot estimator overfits a small set and is deterministic") {
  const auto scenes = synth::generate_samples(synth::SceneConfig{}, 41, 12);
  const auto data = report::foot_samples(scenes);
  FootConfig c;
  c.iterations = 600;
  c.batch_size = 12;
  c.rotation_prob = 0.0;
  c.scale_prob = 0.0;
  auto model = train_foot_estimator(data, c, 2);
  std::vector<cv::Mat> images;
  std::vector<geom::PoseAnnotation> truth;
  for (const auto& d : data) {
    images.push_back(d.x_w);
    truth.push_back(foot_only(d.pose));
  }
  const auto pred = estimate_foot_batch(model, images);
  const auto m = foot_metrics(pred, truth, 0.1);
  MESSAGE("train-set PCK " << m.pck << " presence " << m.presence_accuracy);
  // Absent-slot suppression needs the full budget; it is scored on held-out data elsewhere.
  CHECK(m.pck >= 0.95);
  // Batched and single-image estimates agree.
  const auto one = estimate_foot(model, images[3]);
  for (Joint j : geom::subset_joints(Subset::kFoot)) {
    CHECK(one[j].present == pred[3][j].present);
    if (one[j].present) CHECK(std::hypot(one[j].x - pred[3][j].x, one[j].y - pred[3][j].y) < 1e-3);
  }
  // Estimates never place leg joints.
  for (const auto& p : pred) {
    for (Joint j : {Joint::kLeftHip, Joint::kRightHip, Joint::kLeftKnee, Joint::kRightKnee}) CHECK_FALSE(p[j].present);
  }

  c.iterations = 3;
  auto a = train_foot_estimator(data, c, 9);
  auto b = train_foot_estimator(data, c, 9);
  CHECK(ckpt::digest(*a.net) == ckpt::digest(*b.net));

  testing::TempDir dir("lps1");
  save_foot_model(model, dir.path / "lps1.ckpt", 2);
  auto back = load_foot_model(dir.path / "lps1.ckpt");
  CHECK(ckpt::digest(*back.net) == ckpt::digest(*model.net));
}

TEST_CASE("leg training pair without rotation is the plain normalisation") {
  const auto scene = synth::sample_scene(12, synth::SceneConfig{});
  std::mt19937_64 rng(0);
  const auto [l0, c_p] = leg_training_pair(scene.pose, small_leg(1), rng);
  CHECK(l0 == geom::normalize_pose(scene.pose, Subset::kLeg).values);
  CHECK(c_p == geom::normalize_pose(scene.pose, Subset::kFoot).values);
  CHECK(l0.size() == kLegDim);
  CHECK(c_p.size() == kFootDim);
}

TEST_CASE("leg loss matches a manual recomputation") {
  auto model = make_leg_model(small_leg(1));
  torch::manual_seed(5);
  const auto x0 = torch::rand({6, kLegDim});
  const auto eps = torch::randn({6, kLegDim});
  const auto c_p = torch::rand({6, kFootDim});
  const auto t = torch::tensor({0, 5, 100, 400, 800, 999}, torch::kLong);
  torch::NoGradGuard ng;
  const auto x_t = diff::q_sample(x0, t, eps, model.schedule);
  const double manual = (model.net->forward(x_t, t, c_p) - eps).pow(2).mean().item<double>();
  CHECK(leg_loss(model, x0, t, eps, c_p).item<double>() == doctest::Approx(manual).epsilon(1e-6));
}

TEST_CASE("leg diffusion collapses onto a single training pair") {
  const auto scene = synth::sample_scene(77, synth::SceneConfig{});
  const std::vector<geom::PoseAnnotation> poses{scene.pose};
  LegConfig c = small_leg(3000);
  c.hidden = 256;
  c.layers = 4;
  c.batch_size = 256;
  auto model = train_leg_diffusion(poses, c, 3);
  const auto c_p = geom::normalize_pose(scene.pose, Subset::kFoot);
  const auto target = geom::normalize_pose(scene.pose, Subset::kLeg).values;
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = sample_leg_pose(model, c_p, 25, seed);
    REQUIRE(s.values.size() == kLegDim);
    double d2 = 0.0;
    for (std::size_t i = 0; i < kLegDim; ++i) {
      CHECK(s.values[i] >= 0.0);
      CHECK(s.values[i] <= 1.0);
      d2 += (s.values[i] - target[i]) * (s.values[i] - target[i]);
    }
    sum += std::sqrt(d2);
  }
  MESSAGE("mean L2 to the training pose " << sum / 10.0);
  CHECK(sum / 10.0 < 0.05);

  // Sampling is a pure function of (model, condition, steps, seed).
  const auto a = sample_leg_pose(model, c_p, 25, 42);
  const auto b = sample_leg_pose(model, c_p, 25, 42);
  CHECK(a.values == b.values);
  // Batched rows match single calls.
  const std::vector<geom::NormalizedPose> conds{c_p, c_p};
  const std::vector<std::uint64_t> seeds{42, 43};
  const auto batch = sample_leg_poses(model, conds, 25, seeds);
  for (std::size_t i = 0; i < kLegDim; ++i) CHECK(std::abs(batch[0].values[i] - a.values[i]) < 1e-5);

  auto again = train_leg_diffusion(poses, small_leg(20), 3);
  auto twice = train_leg_diffusion(poses, small_leg(20), 3);
  CHECK(ckpt::digest(*again.net) == ckpt::digest(*twice.net));

  testing::TempDir dir("lps2");
  save_leg_model(model, dir.path / "lps2.ckpt", 3);
  auto back = load_leg_model(dir.path / "lps2.ckpt");
  CHECK(sample_leg_pose(back, c_p, 25, 42).values == a.values);
}

TEST_CASE("untrained samples stay in the unit box") {
  auto model = make_leg_model(small_leg(1));
  const auto scene = synth::sample_scene(2, synth::SceneConfig{});
  const auto c_p = geom::normalize_pose(scene.pose, Subset::kFoot);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (double v : sample_leg_pose(model, c_p, 10, seed).values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("compose_pose") {
  geom::PoseAnnotation foot;
  foot.image_size = 64;
  foot[Joint::kRightAnkle] = {30, 40, true};
  foot[Joint::kRightHeel] = {27, 50, true};
  foot[Joint::kRightBigToe] = {45, 52, true};
  foot[Joint::kRightSmallToe] = {43, 54, true};
  const auto c_p = geom::normalize_pose(foot, Subset::kFoot);

  geom::PoseAnnotation legs;
  legs.image_size = 64;
  legs[Joint::kLeftHip] = {10, 2, true};
  legs[Joint::kRightHip] = {28, 3, true};
  legs[Joint::kLeftKnee] = {12, 20, true};
  legs[Joint::kRightKnee] = {33, 21, true};
  legs[Joint::kLeftAnkle] = {5, 5, true};
  legs[Joint::kRightAnkle] = {5, 5, true};
  const auto l0 = geom::normalize_pose(legs, Subset::kLeg);

  const auto pose = compose_pose(c_p, l0, 64);
  // Foot slots and ankles come from the condition.
  for (Joint j : geom::subset_joints(Subset::kFoot)) {
    CHECK(pose[j].present == foot[j].present);
    if (foot[j].present) {
      CHECK(pose[j].x == doctest::Approx(foot[j].x));
      CHECK(pose[j].y == doctest::Approx(foot[j].y));
    }
  }
  // Hip and knee only on the side whose ankle is present.
  CHECK(pose[Joint::kRightHip].present);
  CHECK(pose[Joint::kRightKnee].present);
  CHECK(pose[Joint::kRightHip].x == doctest::Approx(28.0));
  CHECK(pose[Joint::kRightKnee].y == doctest::Approx(21.0));
  CHECK_FALSE(pose[Joint::kLeftHip].present);
  CHECK_FALSE(pose[Joint::kLeftKnee].present);

  // Out-of-range samples are clamped into the canvas.
  geom::NormalizedPose wild{Subset::kLeg, std::vector<double>(kLegDim, 1.0)};
  wild.values[2] = 0.0;
  const auto clamped = compose_pose(c_p, wild, 64);
  CHECK(clamped[Joint::kRightHip].x >= 0.0);
  CHECK(clamped[Joint::kRightHip].x < 64.0);
  CHECK_NOTHROW(geom::validate(clamped));

  CHECK_THROWS_AS(compose_pose(l0, c_p, 64), InvalidArgument);
}
