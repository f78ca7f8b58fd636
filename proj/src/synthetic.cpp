#include "pitchcal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pitchcal/errors.hpp"
#include "pitchcal/evaluation.hpp"

namespace pitchcal {

namespace {

constexpr double kAnnotationLineStepM = 1.0;
constexpr int kAnnotationSamplesPerCircle = 36;
constexpr int kMaxCameraAttempts = 100000;

bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

class PointPerturber {
 public:
  PointPerturber(const SyntheticScenario& s, std::mt19937_64& rng) : s_(s), rng_(rng) {}

  Vec2 operator()(Vec2 p) {
    if (s_.noise_sigma_px > 0.0) {
      std::normal_distribution<double> n(0.0, s_.noise_sigma_px);
      const double dx = n(rng_);
      const double dy = n(rng_);
      p += Vec2(dx, dy);
    }
    if (s_.outlier_prob > 0.0 && uniform(rng_, 0.0, 1.0) < s_.outlier_prob) {
      const double angle = uniform(rng_, 0.0, 2.0 * std::numbers::pi);
      p += s_.outlier_magnitude_px * Vec2(std::cos(angle), std::sin(angle));
    }
    return p;
  }

 private:
  const SyntheticScenario& s_;
  std::mt19937_64& rng_;
};

double class_dropout(const SyntheticScenario& s, const std::string& name) {
  const auto it = s.class_dropout_prob.find(name);
  return it == s.class_dropout_prob.end() ? s.dropout_prob : it->second;
}

bool enough_keypoints(const CameraParams& cam, const SyntheticScenario& s, const PitchTemplate& pitch) {
  const auto ids = visible_keypoint_ids(cam, pitch);
  if (static_cast<int>(ids.size()) < s.min_visible_keypoints) return false;
  KeypointSet set;
  for (int id : ids) set.insert({id, *project(cam, pitch.keypoint(id).world)});
  return ground_homography(set, pitch).has_value();
}

}  // namespace

void SyntheticScenario::validate() const {
  const CameraRanges& c = camera;
  const PlausibilityBounds b;
  if (!(c.max_abs_x_m >= 0 && c.max_abs_x_m <= b.max_abs_xy_m)) throw Error("camera x range outside plausibility");
  if (!(c.min_abs_y_m >= 0 && c.min_abs_y_m <= c.max_abs_y_m && c.max_abs_y_m <= b.max_abs_xy_m))
    throw Error("camera y range invalid");
  if (!(c.min_z_m > 0 && c.min_z_m <= c.max_z_m && c.max_z_m <= b.max_height_m)) throw Error("camera z range invalid");
  if (!(c.min_focal_px >= b.min_focal_px && c.min_focal_px <= c.max_focal_px && c.max_focal_px <= b.max_focal_px))
    throw Error("focal range invalid");
  if (!(c.target_margin_m >= 0) || !(c.max_roll_rad >= 0)) throw Error("camera jitter must be non-negative");
  if (image_size.width <= 0 || image_size.height <= 0) throw Error("image size must be positive");
  if (!(noise_sigma_px >= 0) || !(outlier_magnitude_px >= 0)) throw Error("noise magnitudes must be non-negative");
  if (!in_unit(dropout_prob) || !in_unit(outlier_prob) || !in_unit(keypoint_dropout_prob))
    throw Error("probabilities must lie in [0, 1]");
  for (const auto& [name, p] : class_dropout_prob)
    if (!in_unit(p)) throw Error("dropout probability for " + name + " outside [0, 1]");
  if (!(in_unit(min_confidence) && in_unit(max_confidence) && min_confidence <= max_confidence))
    throw Error("confidence range invalid");
  if (min_visible_keypoints < 0) throw Error("min_visible_keypoints must be non-negative");
}

std::uint64_t frame_seed(std::uint64_t base_seed, std::uint64_t frame_index) {
  // splitmix64 finalizer over the combined state.
  std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ULL * (frame_index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

CameraParams sample_camera(const SyntheticScenario& s, std::mt19937_64& rng, const PitchTemplate& pitch) {
  s.validate();
  const CameraRanges& c = s.camera;
  const double hl = pitch.dimensions().length / 2.0 - c.target_margin_m;
  const double hw = pitch.dimensions().width / 2.0 - c.target_margin_m;
  for (int attempt = 0; attempt < kMaxCameraAttempts; ++attempt) {
    const double x = uniform(rng, -c.max_abs_x_m, c.max_abs_x_m);
    const double y_abs = uniform(rng, c.min_abs_y_m, c.max_abs_y_m);
    const double y = uniform(rng, 0.0, 1.0) < 0.5 ? -y_abs : y_abs;
    const double z = uniform(rng, c.min_z_m, c.max_z_m);
    const double focal = uniform(rng, c.min_focal_px, c.max_focal_px);
    const Vec3 target(uniform(rng, -hl, hl), uniform(rng, -hw, hw), 0.0);
    const double roll = uniform(rng, -c.max_roll_rad, c.max_roll_rad);
    const CameraParams cam = CameraParams::look_at(Vec3(x, y, z), target, focal, s.image_size, roll);
    if (s.min_visible_keypoints == 0 || enough_keypoints(cam, s, pitch)) return cam;
  }
  throw EstimationFailure("no camera satisfied the visibility requirement");
}

std::vector<int> visible_keypoint_ids(const CameraParams& params, const PitchTemplate& pitch) {
  std::vector<int> ids;
  for (const auto& def : pitch.keypoints()) {
    const auto px = project(params, def.world);
    if (px && params.image_size.contains(*px)) ids.push_back(def.id);
  }
  return ids;
}

Annotation render_annotation(const CameraParams& params, const SyntheticScenario& s, std::mt19937_64& rng,
                             const PitchTemplate& pitch) {
  s.validate();
  Annotation out;
  out.image_size = params.image_size;
  PointPerturber perturb(s, rng);
  for (const auto& m : pitch.markings()) {
    const bool dropped = uniform(rng, 0.0, 1.0) < class_dropout(s, m.name);
    const double step = m.is_conic() ? 2.0 * std::numbers::pi * m.radius / kAnnotationSamplesPerCircle
                                     : kAnnotationLineStepM;
    std::vector<Vec2> points;
    for (const auto& piece : project_marking(params, m, step))
      for (const auto& p : piece) points.push_back(p);
    if (dropped || points.size() < 2) continue;
    for (auto& p : points) p = perturb(p);
    out.classes.emplace(m.name, std::move(points));
  }
  return out;
}

Detections render_detections(const CameraParams& params, const SyntheticScenario& s, std::mt19937_64& rng,
                             const PitchTemplate& pitch) {
  s.validate();
  Detections out;
  out.image_size = params.image_size;
  PointPerturber perturb(s, rng);
  for (int id : visible_keypoint_ids(params, pitch)) {
    const bool dropped = uniform(rng, 0.0, 1.0) < s.keypoint_dropout_prob;
    const Vec2 p = perturb(*project(params, pitch.keypoint(id).world));
    const double conf = uniform(rng, s.min_confidence, s.max_confidence);
    if (!dropped) out.keypoints.insert({id, p, conf, KeypointSource::detector});
  }
  for (const auto& m : pitch.markings()) {
    if (m.is_conic()) continue;
    const bool dropped = uniform(rng, 0.0, 1.0) < class_dropout(s, m.name);
    const auto intervals = visible_intervals(params, m);
    if (dropped || intervals.empty()) continue;
    const auto longest = *std::max_element(intervals.begin(), intervals.end(), [](const Interval& a, const Interval& b) {
      return a.end - a.begin < b.end - b.begin;
    });
    const auto p1 = project(params, m.point_at(longest.begin));
    const auto p2 = project(params, m.point_at(longest.end));
    if (!p1 || !p2) continue;
    LineObservation line;
    line.class_name = m.name;
    line.p1 = perturb(*p1);
    line.p2 = perturb(*p2);
    line.confidence = uniform(rng, s.min_confidence, s.max_confidence);
    out.lines.push_back(std::move(line));
  }
  return out;
}

SyntheticFrame make_frame(const SyntheticScenario& scenario, std::uint64_t index, const PitchTemplate& pitch) {
  std::mt19937_64 rng(frame_seed(scenario.seed, index));
  SyntheticFrame frame;
  frame.camera = sample_camera(scenario, rng, pitch);
  frame.annotation = render_annotation(frame.camera, scenario, rng, pitch);
  frame.detections = render_detections(frame.camera, scenario, rng, pitch);
  return frame;
}

}  // namespace pitchcal
