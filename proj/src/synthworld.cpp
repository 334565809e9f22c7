#include "weargen/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/imgproc.hpp>

#include "weargen/errors.hpp"
#include "weargen/image_ops.hpp"

namespace weargen::synth {

using geom::Joint;
using geom::Point2;
using geom::Side;

namespace {

constexpr std::array<std::string_view, 3> kFloorValues = {"wood", "tile", "carpet"};
constexpr std::array<std::string_view, 3> kToneValues = {"light", "warm", "cool"};
constexpr std::array<std::string_view, 2> kShoeValues = {"one", "two"};
constexpr std::array<std::string_view, 3> kGarmentValues = {"jeans", "trousers", "bare"};

const std::array<TagSlot, 4> kVocabulary = {{
    {"floor", kFloorValues},
    {"tone", kToneValues},
    {"shoes", kShoeValues},
    {"garment", kGarmentValues},
}};

// BGR palettes.
// Backdrops are kept at least ~45 levels away from every skin and garment
// colour in some channel so legs stay separable from the scene.
const std::array<cv::Vec3b, 3> kWallColors = {cv::Vec3b(222, 224, 226), cv::Vec3b(90, 210, 240),
                                              cv::Vec3b(214, 188, 160)};
const std::array<cv::Vec3b, 3> kFloorColors = {cv::Vec3b(30, 70, 110), cv::Vec3b(178, 180, 176),
                                               cv::Vec3b(92, 62, 120)};
const std::array<cv::Vec3b, 3> kSoleColors = {cv::Vec3b(236, 236, 236), cv::Vec3b(34, 34, 36),
                                              cv::Vec3b(64, 122, 170)};
const std::array<cv::Vec3b, 3> kSkinColors = {cv::Vec3b(150, 182, 222), cv::Vec3b(110, 148, 196),
                                              cv::Vec3b(80, 112, 160)};
const cv::Vec3b kCollarInterior(26, 26, 28);

constexpr int kShift = 4;  // sub-pixel bits for OpenCV drawing
constexpr double kSubpixel = 1 << kShift;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen_); }
  int index(int n) { return std::uniform_int_distribution<int>(0, n - 1)(gen_); }
  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }
  cv::Vec3b jitter(cv::Vec3b c, int amount) {
    cv::Vec3b out;
    for (int i = 0; i < 3; ++i) {
      out[i] = cv::saturate_cast<std::uint8_t>(c[i] + std::uniform_int_distribution<int>(-amount, amount)(gen_));
    }
    return out;
  }

 private:
  std::mt19937_64 gen_;
};

std::vector<cv::Point> to_cv(const std::vector<Point2>& poly) {
  std::vector<cv::Point> pts;
  pts.reserve(poly.size());
  for (const auto& p : poly) {
    pts.emplace_back(static_cast<int>(std::lround(p.x * kSubpixel)), static_cast<int>(std::lround(p.y * kSubpixel)));
  }
  return pts;
}

cv::Point to_cv(Point2 p) {
  return {static_cast<int>(std::lround(p.x * kSubpixel)), static_cast<int>(std::lround(p.y * kSubpixel))};
}

void fill_polygon(cv::Mat& img, const std::vector<Point2>& poly, const cv::Scalar& color, int line_type) {
  std::vector<std::vector<cv::Point>> pts = {to_cv(poly)};
  cv::fillPoly(img, pts, color, line_type, kShift);
}

cv::Scalar scalar(cv::Vec3b c) { return {static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])}; }

Point2 centroid(const std::vector<Point2>& poly) {
  // Area centroid of a simple polygon.
  double a = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const double cross = poly[j].x * poly[i].y - poly[i].x * poly[j].y;
    a += cross;
    cx += (poly[j].x + poly[i].x) * cross;
    cy += (poly[j].y + poly[i].y) * cross;
  }
  a *= 0.5;
  return {cx / (6.0 * a), cy / (6.0 * a)};
}

/// Builds a shoe in image coordinates. `anchor` is the heel-ground point,
/// `facing` +1 for toe towards +x, `tilt` radians.
ShoeSpec make_shoe(Rng& rng, Side side, double length, Point2 anchor, double tilt) {
  ShoeSpec s;
  s.side = side;
  s.length = length;
  const double L = length;
  const double t = 0.09 * L;
  const double h = rng.uniform(0.0, 0.10) * L;
  const double H = rng.uniform(0.36, 0.48) * L;
  s.heel_height = h;

  const double facing = side == Side::kRight ? 1.0 : -1.0;
  const double c = std::cos(tilt);
  const double sn = std::sin(tilt);
  // Local frame: x forward, y up, origin at the heel on the ground.
  auto map = [&](double x, double y) {
    const double lx = facing * x;
    const double ly = -y;
    return Point2{anchor.x + c * lx - sn * ly, anchor.y + sn * lx + c * ly};
  };
  auto map_all = [&](std::initializer_list<std::pair<double, double>> pts) {
    std::vector<Point2> out;
    for (const auto& [x, y] : pts) out.push_back(map(x, y));
    return out;
  };

  s.sole = map_all({{0, 0},
                    {0.26 * L, 0},
                    {0.34 * L, 0.5 * h},
                    {0.62 * L, 0},
                    {0.96 * L, 0},
                    {L, 0.45 * t},
                    {L, t},
                    {0.62 * L, t},
                    {0.34 * L, h + t},
                    {0, h + t}});
  const std::pair<double, double> back = {0.02 * L, h + t + H};
  const std::pair<double, double> front = {0.44 * L, 0.4 * h + t + 0.85 * H};
  s.upper = map_all({{0, h + t},
                     {-0.03 * L, h + t + 0.9 * H},
                     back,
                     front,
                     {0.56 * L, t + 0.62 * H},
                     {0.80 * L, t + 0.34 * H},
                     {0.95 * L, t + 0.15 * H},
                     {L, t},
                     {0.62 * L, t},
                     {0.34 * L, h + t}});
  s.collar_back = map(back.first, back.second);
  s.collar_front = map(front.first, front.second);
  s.collar = map_all({back,
                      front,
                      {front.first - 0.05 * L, front.second - 0.11 * L},
                      {back.first + 0.06 * L, back.second - 0.11 * L}});
  s.logo = map_all({{0.56 * L, t + 0.12 * H}, {0.78 * L, t + 0.22 * H}, {0.58 * L, t + 0.34 * H}});
  s.forward = {facing * c, facing * sn};
  s.ankle = centroid(s.collar);
  s.heel = map(0.08 * L, 0.5 * (h + t));
  s.big_toe = map(0.88 * L, t + 0.12 * H);
  s.small_toe = map(0.76 * L, 0.5 * t);

  s.upper_color = cv::Vec3b(static_cast<std::uint8_t>(rng.uniform(40, 230)),
                            static_cast<std::uint8_t>(rng.uniform(40, 230)),
                            static_cast<std::uint8_t>(rng.uniform(40, 230)));
  s.sole_color = kSoleColors[static_cast<std::size_t>(rng.index(3))];
  cv::Vec3b logo;
  for (int i = 0; i < 3; ++i) logo[i] = static_cast<std::uint8_t>(s.upper_color[i] > 135 ? 25 : 235);
  s.logo_color = logo;
  return s;
}

bool inside_canvas(Point2 p, double lo, double hi) { return p.x >= lo && p.x < hi && p.y >= lo && p.y < hi; }

Point2 direction(double facing, double angle) { return {facing * std::sin(angle), -std::cos(angle)}; }

LegSpec make_leg(Rng& rng, const ShoeSpec& shoe, const SceneConfig& cfg, double scale_down) {
  const double S = cfg.canvas;
  const double deg = std::numbers::pi / 180.0;
  const double facing = shoe.side == Side::kRight ? 1.0 : -1.0;
  LegSpec leg;
  leg.ankle = shoe.ankle;
  leg.calf_length = rng.uniform(0.21, 0.28) * S * scale_down;
  leg.thigh_length = leg.calf_length * rng.uniform(0.88, 1.14);
  const double calf_angle = rng.uniform(cfg.calf_tilt_min_deg, cfg.calf_tilt_max_deg) * deg * scale_down;
  leg.knee_angle = rng.uniform(0.0, cfg.max_knee_bend) * scale_down;
  leg.hip_angle = calf_angle - leg.knee_angle;
  const Point2 dc = direction(facing, calf_angle);
  leg.knee = {leg.ankle.x + leg.calf_length * dc.x, leg.ankle.y + leg.calf_length * dc.y};
  const Point2 dt = direction(facing, leg.hip_angle);
  leg.hip = {leg.knee.x + leg.thigh_length * dt.x, leg.knee.y + leg.thigh_length * dt.y};
  const double rc = std::max(1.0, shoe.band_radius - 1.0);
  leg.calf_width = 2.0 * rc;
  leg.thigh_width = leg.calf_width * rng.uniform(1.1, 1.3);
  return leg;
}

void draw_limbs(cv::Mat& img, const LegSpec& leg, const cv::Scalar& thigh, const cv::Scalar& calf, int line_type) {
  cv::line(img, to_cv(leg.knee), to_cv(leg.ankle), calf, std::max(1, static_cast<int>(std::lround(leg.calf_width))),
           line_type, kShift);
  cv::line(img, to_cv(leg.hip), to_cv(leg.knee), thigh, std::max(1, static_cast<int>(std::lround(leg.thigh_width))),
           line_type, kShift);
}

cv::Mat band_mask(const ShoeSpec& shoe, int canvas) {
  cv::Mat collar(canvas, canvas, CV_8UC1, cv::Scalar(0));
  fill_polygon(collar, shoe.collar, cv::Scalar(255), cv::LINE_8);
  const int r = std::max(1, static_cast<int>(std::lround(shoe.band_radius)));
  const cv::Mat kernel = cv::getStructuringElement(cv::MORPH_ELLIPSE, cv::Size(2 * r + 1, 2 * r + 1));
  cv::Mat band;
  cv::dilate(collar, band, kernel);
  return band;
}

void draw_shoe(cv::Mat& img, const ShoeSpec& shoe, const cv::Mat& visible) {
  fill_polygon(img, shoe.upper, scalar(shoe.upper_color), cv::LINE_AA);
  fill_polygon(img, shoe.sole, scalar(shoe.sole_color), cv::LINE_AA);
  fill_polygon(img, shoe.collar, scalar(kCollarInterior), cv::LINE_AA);
  // The logo is clipped to the visible region so it always survives paste-back.
  cv::Mat logo_layer = img.clone();
  fill_polygon(logo_layer, shoe.logo, scalar(shoe.logo_color), cv::LINE_AA);
  cv::Mat logo_mask(img.size(), CV_8UC1, cv::Scalar(0));
  fill_polygon(logo_mask, shoe.logo, cv::Scalar(255), cv::LINE_8);
  logo_layer.copyTo(img, logo_mask & visible);
}

struct Attempt {
  bool ok = false;
  SceneSample sample;
};

Attempt try_scene(Rng& rng, std::uint64_t seed, const SceneConfig& cfg) {
  const int S = cfg.canvas;
  const double Sd = S;
  const double deg = std::numbers::pi / 180.0;
  Attempt out;
  SceneSample& sc = out.sample;
  sc.seed = seed;
  sc.tags.floor = rng.index(3);
  sc.tags.tone = rng.index(3);
  sc.tags.garment = rng.index(3);
  sc.tags.shoes = rng.bernoulli(cfg.two_shoe_prob) ? 1 : 0;

  const double ground = rng.uniform(0.88, 0.94) * Sd;
  if (sc.tags.shoes == 0) {
    const Side side = rng.bernoulli(0.5) ? Side::kLeft : Side::kRight;
    const double L = rng.uniform(0.44, 0.56) * Sd;
    const double lo = 0.06 * Sd;
    const double hi = 0.94 * Sd - L;
    const double heel_x = side == Side::kRight ? rng.uniform(lo, hi) : Sd - rng.uniform(lo, hi);
    sc.shoes.push_back(make_shoe(rng, side, L, {heel_x, ground}, rng.uniform(-1, 1) * cfg.shoe_tilt_deg * deg));
  } else {
    const double L = rng.uniform(0.32, 0.40) * Sd;
    const double gap = rng.uniform(0.08, 0.14) * Sd;
    const double shift = rng.uniform(-0.04, 0.04) * Sd;
    const double g2 = ground + rng.uniform(-0.02, 0.02) * Sd;
    sc.shoes.push_back(make_shoe(rng, Side::kLeft, L * rng.uniform(0.97, 1.03),
                                 {0.5 * Sd - 0.5 * gap + shift, ground},
                                 rng.uniform(-1, 1) * cfg.shoe_tilt_deg * deg));
    sc.shoes.push_back(make_shoe(rng, Side::kRight, L * rng.uniform(0.97, 1.03),
                                 {0.5 * Sd + 0.5 * gap + shift, std::min(g2, 0.95 * Sd)},
                                 rng.uniform(-1, 1) * cfg.shoe_tilt_deg * deg));
  }
  for (auto& shoe : sc.shoes) shoe.band_radius = std::max(1.0, cfg.band_radius_frac * shoe.length);

  // Every shoe point has to stay on the canvas.
  for (const auto& shoe : sc.shoes) {
    for (const auto* poly : {&shoe.sole, &shoe.upper}) {
      for (const auto& p : *poly) {
        if (!inside_canvas(p, 1.0, Sd - 1.0)) return out;
      }
    }
  }

  // Exact (aliasing-free) label geometry.
  cv::Mat silhouette(S, S, CV_8UC1, cv::Scalar(0));
  cv::Mat bands(S, S, CV_8UC1, cv::Scalar(0));
  std::vector<cv::Mat> shoe_bands;
  for (const auto& shoe : sc.shoes) {
    fill_polygon(silhouette, shoe.sole, cv::Scalar(255), cv::LINE_8);
    fill_polygon(silhouette, shoe.upper, cv::Scalar(255), cv::LINE_8);
    shoe_bands.push_back(band_mask(shoe, S));
    bands |= shoe_bands.back();
  }
  const cv::Mat wearable = silhouette & bands;
  const cv::Mat visible = silhouette & ~bands;
  if (cv::countNonZero(visible) == 0) return out;
  for (const auto& band : shoe_bands) {
    if (cv::countNonZero(band & silhouette) == 0) return out;
  }

  // Legs: rejection-sample poses whose limbs cover no visible shoe pixel.
  for (const auto& shoe : sc.shoes) {
    bool placed = false;
    for (int attempt = 0; attempt < 80 && !placed; ++attempt) {
      const double scale_down = attempt < 60 ? 1.0 : 0.85;
      LegSpec leg = make_leg(rng, shoe, cfg, scale_down);
      if (!inside_canvas(leg.hip, 0.02 * Sd, 0.98 * Sd) || !inside_canvas(leg.knee, 0.02 * Sd, 0.98 * Sd)) continue;
      cv::Mat limbs(S, S, CV_8UC1, cv::Scalar(0));
      draw_limbs(limbs, leg, cv::Scalar(255), cv::Scalar(255), cv::LINE_8);
      if (cv::countNonZero(limbs & visible) != 0) continue;
      sc.legs.push_back(leg);
      placed = true;
    }
    if (!placed) return out;
  }

  // Garment and skin colours.
  const cv::Vec3b skin = rng.jitter(kSkinColors[static_cast<std::size_t>(rng.index(3))], 8);
  cv::Vec3b garment;
  switch (sc.tags.garment) {
    case 0: garment = rng.jitter(cv::Vec3b(150, 86, 40), 12); break;
    case 1: garment = rng.jitter(cv::Vec3b(48, 46, 44), 8); break;
    default: garment = skin; break;
  }
  for (auto& leg : sc.legs) {
    leg.garment_color = garment;
    leg.skin_color = skin;
  }

  // RGB rasters.
  const cv::Mat background = render_background(sc.tags, S, cfg.horizon_frac);
  sc.unworn = background.clone();
  sc.shoe_only = cv::Mat(S, S, CV_8UC3, cv::Scalar::all(0));
  for (const auto& shoe : sc.shoes) {
    draw_shoe(sc.unworn, shoe, visible);
    draw_shoe(sc.shoe_only, shoe, visible);
  }

  cv::Mat leg_layer = sc.unworn.clone();
  for (std::size_t i = 0; i < sc.legs.size(); ++i) {
    leg_layer.setTo(scalar(skin), shoe_bands[i]);
    draw_limbs(leg_layer, sc.legs[i], scalar(garment), scalar(sc.tags.garment == 2 ? skin : garment), cv::LINE_AA);
  }
  sc.worn = sc.unworn.clone();
  leg_layer.copyTo(sc.worn, ~visible);

  sc.tri_mask = cv::Mat(S, S, CV_8UC1, cv::Scalar(kBackground));
  sc.tri_mask.setTo(cv::Scalar(kVisible), visible);
  sc.tri_mask.setTo(cv::Scalar(kWearable), wearable);

  // Pose.
  sc.pose.image_size = S;
  for (std::size_t i = 0; i < sc.shoes.size(); ++i) {
    const auto& shoe = sc.shoes[i];
    const auto& leg = sc.legs[i];
    const bool left = shoe.side == Side::kLeft;
    auto set = [&](Joint l, Joint r, Point2 p) { sc.pose[left ? l : r] = {p.x, p.y, true}; };
    set(Joint::kLeftHip, Joint::kRightHip, leg.hip);
    set(Joint::kLeftKnee, Joint::kRightKnee, leg.knee);
    set(Joint::kLeftAnkle, Joint::kRightAnkle, shoe.ankle);
    set(Joint::kLeftHeel, Joint::kRightHeel, shoe.heel);
    set(Joint::kLeftBigToe, Joint::kRightBigToe, shoe.big_toe);
    set(Joint::kLeftSmallToe, Joint::kRightSmallToe, shoe.small_toe);
    sc.geometry.push_back(shoe.geometry());
  }
  for (const auto& kp : sc.pose.keypoints) {
    if (kp.present && !inside_canvas({kp.x, kp.y}, 0.0, Sd)) return out;
  }
  out.ok = true;
  return out;
}

}  // namespace

std::span<const TagSlot> tag_vocabulary() { return kVocabulary; }

std::array<int, 4> tag_indices(const SceneTags& tags) { return {tags.floor, tags.tone, tags.shoes, tags.garment}; }

std::string tags_to_string(const SceneTags& tags) {
  const auto idx = tag_indices(tags);
  std::string out;
  for (std::size_t i = 0; i < kVocabulary.size(); ++i) {
    if (i) out += ',';
    out += kVocabulary[i].name;
    out += '=';
    out += kVocabulary[i].values[static_cast<std::size_t>(idx[i])];
  }
  return out;
}

SceneTags tags_from_string(const std::string& s) {
  std::array<int, 4> idx = {-1, -1, -1, -1};
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto end = std::min(s.find(',', pos), s.size());
    const std::string item = s.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidArgument("tag '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    bool found = false;
    for (std::size_t i = 0; i < kVocabulary.size() && !found; ++i) {
      if (kVocabulary[i].name != key) continue;
      for (std::size_t v = 0; v < kVocabulary[i].values.size(); ++v) {
        if (kVocabulary[i].values[v] == value) {
          idx[i] = static_cast<int>(v);
          found = true;
        }
      }
      if (!found) throw InvalidArgument("unknown value '" + value + "' for tag '" + key + "'");
    }
    if (!found) throw InvalidArgument("unknown tag '" + key + "'");
  }
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0) throw InvalidArgument("missing tag '" + std::string(kVocabulary[i].name) + "'");
  }
  return {idx[0], idx[1], idx[2], idx[3]};
}

geom::ShoeGeometry ShoeSpec::geometry() const {
  geom::ShoeGeometry g;
  g.side = side;
  g.collar = collar;
  g.silhouette = {sole, upper};
  g.forward = forward;
  return g;
}

std::uint64_t record_seed(std::uint64_t global_seed, std::uint64_t index) {
  // splitmix64 over a combination of both inputs.
  std::uint64_t z = global_seed * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

cv::Mat render_background(const SceneTags& tags, int canvas, double horizon_frac) {
  cv::Mat img(canvas, canvas, CV_8UC3, scalar(kWallColors[static_cast<std::size_t>(tags.tone)]));
  const int horizon = static_cast<int>(std::lround(horizon_frac * canvas));
  img.rowRange(std::clamp(horizon, 0, canvas), canvas).setTo(scalar(kFloorColors[static_cast<std::size_t>(tags.floor)]));
  return img;
}

SceneSample sample_scene(std::uint64_t seed, const SceneConfig& config) {
  if (config.canvas < 16) throw InvalidArgument("sample_scene: canvas must be at least 16 px");
  if (config.two_shoe_prob < 0.0 || config.two_shoe_prob > 1.0) {
    throw InvalidArgument("sample_scene: two_shoe_prob must be in [0,1]");
  }
  if (config.max_knee_bend < 0.0 || config.max_knee_bend > 2.6) {
    throw InvalidArgument("sample_scene: max_knee_bend must be in [0, 2.6]");
  }
  Rng rng(seed);
  for (;;) {
    auto attempt = try_scene(rng, seed, config);
    if (attempt.ok) return std::move(attempt.sample);
  }
}

std::vector<SceneSample> generate_samples(const SceneConfig& config, std::uint64_t global_seed, std::size_t n,
                                          std::size_t first) {
  std::vector<SceneSample> out;
  out.reserve(n);
  for (std::size_t i = first; i < first + n; ++i) out.push_back(sample_scene(record_seed(global_seed, i), config));
  return out;
}

SegSample apply_layout(const cv::Mat& shoe_only, const cv::Mat& tri_mask, const cv::Mat& affine) {
  if (shoe_only.size() != tri_mask.size()) throw InvalidArgument("apply_layout: resolution mismatch");
  if (affine.rows != 2 || affine.cols != 3) throw InvalidArgument("apply_layout: transform must be 2x3");
  cv::Mat a;
  affine.convertTo(a, CV_64F);
  const double det = a.at<double>(0, 0) * a.at<double>(1, 1) - a.at<double>(0, 1) * a.at<double>(1, 0);
  if (std::abs(det) < 1e-9) throw InvalidArgument("apply_layout: transform is not invertible");

  std::vector<cv::Point> fg;
  cv::findNonZero(tri_mask, fg);
  const double W = tri_mask.cols;
  const double Hh = tri_mask.rows;
  for (const auto& p : fg) {
    for (double dx : {-0.5, 0.5}) {
      for (double dy : {-0.5, 0.5}) {
        const double x = p.x + dx;
        const double y = p.y + dy;
        const double tx = a.at<double>(0, 0) * x + a.at<double>(0, 1) * y + a.at<double>(0, 2);
        const double ty = a.at<double>(1, 0) * x + a.at<double>(1, 1) * y + a.at<double>(1, 2);
        if (tx < -0.5 || ty < -0.5 || tx > W - 0.5 || ty > Hh - 0.5) {
          throw OutOfBounds("apply_layout: transformed shoe leaves the canvas");
        }
      }
    }
  }
  return {img::warp_image(shoe_only, a), img::warp_mask(tri_mask, a)};
}

SegSample mosaic_compose(std::span<const SegSample> samples, int split_x, int split_y) {
  if (samples.size() != 4) throw InvalidArgument("mosaic: exactly four samples required");
  const cv::Size size = samples[0].image.size();
  for (const auto& s : samples) {
    if (s.image.size() != size || s.mask.size() != size) throw InvalidArgument("mosaic: resolution mismatch");
  }
  split_x = std::clamp(split_x, 0, size.width);
  split_y = std::clamp(split_y, 0, size.height);
  SegSample out{samples[0].image.clone(), samples[0].mask.clone()};
  const std::array<cv::Rect, 4> quads = {
      cv::Rect(0, 0, split_x, split_y),
      cv::Rect(split_x, 0, size.width - split_x, split_y),
      cv::Rect(0, split_y, split_x, size.height - split_y),
      cv::Rect(split_x, split_y, size.width - split_x, size.height - split_y),
  };
  for (std::size_t q = 0; q < 4; ++q) {
    if (quads[q].area() == 0) continue;
    samples[q].image(quads[q]).copyTo(out.image(quads[q]));
    samples[q].mask(quads[q]).copyTo(out.mask(quads[q]));
  }
  return out;
}

SegSample mosaic_augment(std::span<const SegSample> samples, double p, std::mt19937_64& rng) {
  if (samples.size() != 4) throw InvalidArgument("mosaic: exactly four samples required");
  const cv::Size size = samples[0].image.size();
  for (const auto& s : samples) {
    if (s.image.size() != size || s.mask.size() != size) throw InvalidArgument("mosaic: resolution mismatch");
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (!(u(rng) < p)) return {samples[0].image.clone(), samples[0].mask.clone()};
  const int sx = static_cast<int>(std::lround(size.width * (0.25 + 0.5 * u(rng))));
  const int sy = static_cast<int>(std::lround(size.height * (0.25 + 0.5 * u(rng))));
  return mosaic_compose(samples, sx, sy);
}

}  // namespace weargen::synth
