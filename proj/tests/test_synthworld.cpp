#include "unit.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <opencv2/imgproc.hpp>

#include "support.hpp"
#include "weargen/errors.hpp"
#include "weargen/image_ops.hpp"
#include "weargen/synthworld.hpp"

using namespace weargen;
using namespace weargen::synth;

namespace {

int count_label(const cv::Mat& m, int label) { return cv::countNonZero(m == label); }

bool labels_closed(const cv::Mat& m) {
  double lo = 0, hi = 0;
  cv::minMaxLoc(m, &lo, &hi);
  return lo >= 0 && hi <= 2;
}

cv::Mat grow(const cv::Mat& m, int r) {
  cv::Mat out;
  cv::dilate(m, out, cv::getStructuringElement(cv::MORPH_RECT, cv::Size(2 * r + 1, 2 * r + 1)));
  return out;
}

std::vector<SegSample> four(std::uint64_t seed) {
  std::vector<SegSample> out;
  for (std::uint64_t i = 0; i < 4; ++i) {
    const auto s = sample_scene(seed + i, SceneConfig{});
    out.push_back({s.shoe_only, s.tri_mask});
  }
  return out;
}

}  // namespace

TEST_CASE("sample_scene is deterministic") {
  const auto a = sample_scene(0, SceneConfig{});
  const auto b = sample_scene(0, SceneConfig{});
  CHECK(testing::same_image(a.worn, b.worn));
  CHECK(testing::same_image(a.unworn, b.unworn));
  CHECK(testing::same_image(a.shoe_only, b.shoe_only));
  CHECK(testing::same_image(a.tri_mask, b.tri_mask));
  CHECK(testing::same_pose(a.pose, b.pose));
  CHECK((a.tags == b.tags));
  const auto c = sample_scene(1, SceneConfig{});
  CHECK_FALSE(testing::same_image(a.worn, c.worn));
}

TEST_CASE("scene invariants over a generated batch") {
  const SceneConfig cfg;
  const auto scenes = generate_samples(cfg, 123, 1000);
  int two_shoes = 0;
  for (const auto& s : scenes) {
    REQUIRE(s.worn.rows == cfg.canvas);
    REQUIRE(s.tri_mask.type() == CV_8UC1);
    // Partition of the canvas.
    const int total = s.tri_mask.rows * s.tri_mask.cols;
    CHECK(count_label(s.tri_mask, 0) + count_label(s.tri_mask, 1) + count_label(s.tri_mask, 2) == total);
    // Shoe-only image is the shoe on black: every labelled pixel is lit, and
    // anti-aliased fringe stays within two pixels of the labels.
    cv::Mat planes[3], mx;
    cv::split(s.shoe_only, planes);
    cv::max(planes[0], planes[1], mx);
    cv::max(mx, planes[2], mx);
    CHECK(cv::countNonZero((mx == 0) & (s.tri_mask > 0)) == 0);
    CHECK(cv::countNonZero((mx > 0) & ~grow(s.tri_mask > 0, 2)) == 0);
    // Visible pixels are untouched by the leg.
    const cv::Mat vis = s.tri_mask == kVisible;
    cv::Mat diff;
    cv::absdiff(s.worn, s.unworn, diff);
    cv::Mat diff_any;
    cv::cvtColor(diff, diff_any, cv::COLOR_BGR2GRAY);
    CHECK(cv::countNonZero(diff_any & vis) == 0);
    // The leg covers the wearable area.
    const cv::Mat wear = s.tri_mask == kWearable;
    CHECK(cv::countNonZero(wear) > 0);
    CHECK(cv::countNonZero((diff_any > 0) & wear) >= 0.95 * cv::countNonZero(wear));

    REQUIRE(s.shoes.size() == s.geometry.size());
    REQUIRE(s.legs.size() == s.shoes.size());
    two_shoes += s.shoes.size() == 2 ? 1 : 0;
    for (std::size_t k = 0; k < s.shoes.size(); ++k) {
      const auto& g = s.geometry[k];
      const bool left = g.side == geom::Side::kLeft;
      const auto ankle = s.pose[left ? geom::Joint::kLeftAnkle : geom::Joint::kRightAnkle];
      const auto knee = s.pose[left ? geom::Joint::kLeftKnee : geom::Joint::kRightKnee];
      const auto hip = s.pose[left ? geom::Joint::kLeftHip : geom::Joint::kRightHip];
      REQUIRE(ankle.present);
      CHECK(geom::point_in_polygon(g.collar, {ankle.x, ankle.y}));
      // Foot points lie inside the silhouette.
      for (auto j : {left ? geom::Joint::kLeftHeel : geom::Joint::kRightHeel,
                     left ? geom::Joint::kLeftBigToe : geom::Joint::kRightBigToe,
                     left ? geom::Joint::kLeftSmallToe : geom::Joint::kRightSmallToe}) {
        const auto p = s.pose[j];
        REQUIRE(p.present);
        bool inside = false;
        for (const auto& poly : g.silhouette) inside = inside || geom::point_in_polygon(poly, {p.x, p.y});
        CHECK(inside);
      }
      // Standing kinematics. Hips may be clipped above the canvas, so the
      // ordering is checked on the unclipped leg spec.
      const auto& leg = s.legs[k];
      CHECK(leg.hip.y < leg.knee.y);
      CHECK(leg.knee.y < leg.ankle.y);
      CHECK(std::hypot(leg.hip.x - leg.knee.x, leg.hip.y - leg.knee.y) == doctest::Approx(leg.thigh_length));
      CHECK(std::hypot(leg.knee.x - leg.ankle.x, leg.knee.y - leg.ankle.y) == doctest::Approx(leg.calf_length));
      CHECK(leg.knee_angle >= 0.0);
      CHECK(leg.knee_angle <= 2.6);
      CHECK(std::abs(leg.ankle.x - ankle.x) < 0.5);
      CHECK(std::abs(leg.ankle.y - ankle.y) < 0.5);
      if (hip.present && knee.present) CHECK(hip.y < knee.y);
    }
    CHECK_NOTHROW(geom::validate(s.pose));
  }
  // Roughly half of the scenes hold two shoes.
  CHECK(two_shoes > 400);
  CHECK(two_shoes < 600);
}

TEST_CASE("record seeds are stable and distinct") {
  CHECK(record_seed(1, 0) == record_seed(1, 0));
  CHECK(record_seed(1, 0) != record_seed(1, 1));
  CHECK(record_seed(1, 0) != record_seed(2, 0));
  const auto batch = generate_samples(SceneConfig{}, 7, 3, 5);
  REQUIRE(batch.size() == 3);
  CHECK(batch[0].seed == record_seed(7, 5));
  CHECK(testing::same_image(batch[1].worn, sample_scene(record_seed(7, 6), SceneConfig{}).worn));
}

TEST_CASE("tags round-trip") {
  SceneTags t{2, 1, 1, 0};
  CHECK((tags_from_string(tags_to_string(t)) == t));
  CHECK(tags_to_string(t) == "floor=carpet,tone=warm,shoes=two,garment=jeans");
  CHECK_THROWS_AS(tags_from_string("floor=lava,tone=warm,shoes=two,garment=jeans"), InvalidArgument);
  CHECK_THROWS_AS(tags_from_string("floor=wood"), InvalidArgument);
}

TEST_CASE("scene config validation") {
  SceneConfig bad;
  bad.canvas = 8;
  CHECK_THROWS_AS(sample_scene(0, bad), InvalidArgument);
  bad = SceneConfig{};
  bad.two_shoe_prob = 1.5;
  CHECK_THROWS_AS(sample_scene(0, bad), InvalidArgument);
}

TEST_CASE("generate_dataset count and determinism") {
  testing::TempDir a("ds-a"), b("ds-b");
  const auto rows = generate_dataset(SceneConfig{}, 3, 10, a.path);
  CHECK(rows.size() == 10);
  generate_dataset(SceneConfig{}, 3, 10, b.path);
  std::size_t files = 0;
  for (const char* sub : {"worn", "unworn", "shoe_only", "trimask", "pose"}) {
    for (auto& e : std::filesystem::directory_iterator(a.path / sub)) files += e.is_regular_file() ? 1 : 0;
  }
  CHECK(files == 50);
  std::ifstream ma(a.path / "manifest"), mb(b.path / "manifest");
  const std::string sa((std::istreambuf_iterator<char>(ma)), {}), sb((std::istreambuf_iterator<char>(mb)), {});
  CHECK(sa == sb);
  CHECK(std::count(sa.begin(), sa.end(), '\n') == 10);
  const auto back = read_manifest(a.path);
  CHECK((back == rows));
  // Records load back bit-exactly.
  const auto rec = load_record(a.path, rows[4]);
  const auto direct = sample_scene(rows[4].seed, SceneConfig{});
  CHECK(testing::same_image(rec.worn, direct.worn));
  CHECK(testing::same_image(rec.tri_mask, direct.tri_mask));
  CHECK(testing::same_pose(rec.pose, direct.pose));
  CHECK(rec.geometry.size() == direct.geometry.size());
  CHECK(load_dataset(a.path, 3).size() == 3);
}

TEST_CASE("apply_layout") {
  const auto s = sample_scene(11, SceneConfig{});
  const cv::Mat identity = cv::Mat::eye(2, 3, CV_64F);
  const auto same = apply_layout(s.shoe_only, s.tri_mask, identity);
  CHECK(testing::same_image(same.image, s.shoe_only));
  CHECK(testing::same_image(same.mask, s.tri_mask));

  // A small centred shoe survives rotations; compare label rasters of two
  // 90-degree turns with one 180-degree turn.
  cv::Mat small_mask(64, 64, CV_8UC1, cv::Scalar(0));
  cv::rectangle(small_mask, cv::Rect(24, 26, 14, 9), cv::Scalar(1), cv::FILLED);
  cv::rectangle(small_mask, cv::Rect(28, 28, 5, 4), cv::Scalar(2), cv::FILLED);
  cv::Mat small_img(64, 64, CV_8UC3, cv::Scalar::all(0));
  small_img.setTo(cv::Scalar(40, 90, 200), small_mask > 0);
  const cv::Mat r90 = img::rotation_about_center(64, 90.0);
  const cv::Mat r180 = img::rotation_about_center(64, 180.0);
  const auto once = apply_layout(small_img, small_mask, r90);
  const auto twice = apply_layout(once.image, once.mask, r90);
  const auto direct = apply_layout(small_img, small_mask, r180);
  CHECK(testing::same_image(twice.mask, direct.mask));
  CHECK(labels_closed(direct.mask));

  const auto rot = apply_layout(small_img, small_mask, img::rotation_about_center(64, 30.0));
  CHECK(labels_closed(rot.mask));
  const double before = count_label(small_mask, 1);
  CHECK(std::abs(count_label(rot.mask, 1) - before) <= 0.05 * before);

  cv::Mat shift = identity.clone();
  shift.at<double>(0, 2) = 60.0;
  CHECK_THROWS_AS(apply_layout(s.shoe_only, s.tri_mask, shift), OutOfBounds);
  CHECK_THROWS_AS(apply_layout(s.shoe_only, s.tri_mask, cv::Mat::zeros(2, 3, CV_64F)), InvalidArgument);
}

TEST_CASE("mosaic") {
  const auto src = four(40);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto out = mosaic_augment(src, 0.0, rng);
    CHECK(testing::same_image(out.image, src[0].image));
    CHECK(testing::same_image(out.mask, src[0].mask));
  }
  for (int i = 0; i < 20; ++i) CHECK(labels_closed(mosaic_augment(src, 1.0, rng).mask));

  const auto c = mosaic_compose(src, 32, 32);
  const cv::Rect q[4] = {{0, 0, 32, 32}, {32, 0, 32, 32}, {0, 32, 32, 32}, {32, 32, 32, 32}};
  for (int k = 0; k < 4; ++k) {
    CHECK(testing::same_image(c.image(q[k]), src[static_cast<std::size_t>(k)].image(q[k])));
    CHECK(testing::same_image(c.mask(q[k]), src[static_cast<std::size_t>(k)].mask(q[k])));
  }
  CHECK_THROWS_AS(mosaic_compose(std::span<const SegSample>(src.data(), 3), 32, 32), InvalidArgument);
}

TEST_CASE("background depends on tags only") {
  const SceneTags t{0, 2, 0, 1};
  CHECK(testing::same_image(render_background(t, 64), render_background(t, 64)));
  CHECK_FALSE(testing::same_image(render_background(t, 64), render_background(SceneTags{1, 2, 0, 1}, 64)));
  // The background is what the worn scene shows away from shoe and leg.
  const auto s = sample_scene(5, SceneConfig{});
  const cv::Mat bg = render_background(s.tags, 64);
  cv::Mat diff;
  cv::absdiff(s.unworn, bg, diff);
  cv::Mat gray;
  cv::cvtColor(diff, gray, cv::COLOR_BGR2GRAY);
  CHECK(cv::countNonZero((gray > 0) & ~grow(s.tri_mask > 0, 2)) == 0);
}
