#include "pitchcal/keypoints.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "pitchcal/errors.hpp"

namespace pitchcal {

namespace {

constexpr size_t kMinLinePoints = 2;
constexpr size_t kMinConicPoints = 5;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

void validate(const Keypoint& k) {
  if (k.id < 0 || k.id >= kNumKeypoints) throw Error("keypoint id out of range: " + std::to_string(k.id));
  if (!(k.confidence >= 0.0 && k.confidence <= 1.0)) throw Error("keypoint confidence outside [0, 1]");
  if (!k.position.allFinite()) throw Error("keypoint position is not finite");
}

Keypoint derived(int id, const Vec2& p) { return {id, p, 1.0, KeypointSource::annotation_derived}; }

std::optional<Conic> fit_class_ellipse(const Annotation& annotation, const std::string& name) {
  const auto* pts = annotation.find(name);
  if (pts == nullptr || pts->size() < kMinConicPoints) return std::nullopt;
  try {
    return fit_ellipse(*pts);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::optional<Line2> fit_class_line(const Annotation& annotation, const std::string& name) {
  const auto* pts = annotation.find(name);
  if (pts == nullptr || pts->size() < kMinLinePoints) return std::nullopt;
  try {
    return fit_line(*pts);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Decides which of two image candidates corresponds to world point w0 (the other to w1).
// Returns true when candidates must be swapped, i.e. c1 <-> w0.
class PairMatcher {
 public:
  PairMatcher(const KeypointSet& known, const PitchTemplate& pitch)
      : known_(known), pitch_(pitch), homography_(ground_homography(known, pitch)) {}

  bool swapped(const Vec3& w0, const Vec3& w1, const Vec2& c0, const Vec2& c1, const std::vector<int>& references) const {
    if (const auto s = by_homography(w0, w1, c0, c1)) return *s;
    for (int ref : references)
      if (const auto s = by_reference(ref, w0, w1, c0, c1)) return *s;
    for (const auto& [ref, k] : known_)
      if (const auto s = by_reference(ref, w0, w1, c0, c1)) return *s;
    return by_sort(w0, w1, c0, c1);
  }

 private:
  std::optional<bool> by_homography(const Vec3& w0, const Vec3& w1, const Vec2& c0, const Vec2& c1) const {
    if (!homography_) return std::nullopt;
    const Vec2 p0 = homography_->map(w0.head<2>());
    const Vec2 p1 = homography_->map(w1.head<2>());
    if (!p0.allFinite() || !p1.allFinite()) return std::nullopt;
    const double keep = (p0 - c0).squaredNorm() + (p1 - c1).squaredNorm();
    const double swap = (p0 - c1).squaredNorm() + (p1 - c0).squaredNorm();
    return swap < keep;
  }

  // Uses a known keypoint as a third point. Collinear reference: order along the line is preserved.
  // Otherwise: a camera above the ground reverses triangle orientation from world (x, y) to image (u, v).
  std::optional<bool> by_reference(int ref, const Vec3& w0, const Vec3& w1, const Vec2& c0, const Vec2& c1) const {
    const Keypoint* k = known_.find(ref);
    if (k == nullptr) return std::nullopt;
    const KeypointDef& def = pitch_.keypoint(ref);
    if (!def.on_ground()) return std::nullopt;
    const Vec2 a = def.world.head<2>();
    const Vec2 ia = k->position;
    const double world_area = cross(w0.head<2>() - a, w1.head<2>() - a);
    const double scale = (w0.head<2>() - a).norm() * (w1.head<2>() - a).norm();
    if (std::abs(world_area) <= 1e-9 * scale) {
      const double dw0 = (w0.head<2>() - a).norm(), dw1 = (w1.head<2>() - a).norm();
      const double dc0 = (c0 - ia).norm(), dc1 = (c1 - ia).norm();
      if (dw0 == dw1 || dc0 == dc1) return std::nullopt;
      return (dw0 < dw1) != (dc0 < dc1);
    }
    const double image_area = cross(c0 - ia, c1 - ia);
    if (!(std::abs(image_area) > 1e-9 * (c0 - ia).norm() * (c1 - ia).norm())) return std::nullopt;
    // Correct labeling has opposite signs.
    return (world_area > 0) == (image_area > 0);
  }

  // Deterministic fallback: image (v, u) order against world (-y, x) order.
  static bool by_sort(const Vec3& w0, const Vec3& w1, const Vec2& c0, const Vec2& c1) {
    const auto world_less = [](const Vec3& a, const Vec3& b) {
      return -a.y() != -b.y() ? -a.y() < -b.y() : a.x() < b.x();
    };
    const auto image_less = [](const Vec2& a, const Vec2& b) { return a.y() != b.y() ? a.y() < b.y() : a.x() < b.x(); };
    return world_less(w0, w1) != image_less(c0, c1);
  }

  const KeypointSet& known_;
  const PitchTemplate& pitch_;
  std::optional<Homography> homography_;
};

// Line-line keypoints lying on the given marking class.
std::vector<int> anchors_on_line(const PitchTemplate& pitch, const std::string& line_class) {
  std::vector<int> ids;
  for (const auto& def : pitch.keypoints())
    if (def.family == KeypointFamily::line_line && def.on_ground() &&
        std::find(def.classes.begin(), def.classes.end(), line_class) != def.classes.end())
      ids.push_back(def.id);
  return ids;
}

// Some four points with no three collinear: the minimum for a well-posed homography.
bool has_general_quadruple(const std::vector<Vec2>& pts) {
  double extent = 0.0;
  for (const auto& p : pts) extent = std::max(extent, (p - pts.front()).norm());
  const double tol = 1e-3 * extent * extent;
  const auto ok = [&](size_t a, size_t b, size_t c) { return std::abs(cross(pts[b] - pts[a], pts[c] - pts[a])) > tol; };
  const size_t n = pts.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      for (size_t k = j + 1; k < n; ++k) {
        if (!ok(i, j, k)) continue;
        for (size_t l = k + 1; l < n; ++l)
          if (ok(i, j, l) && ok(i, k, l) && ok(j, k, l)) return true;
      }
  return false;
}

}  // namespace

const std::vector<Vec2>* Annotation::find(const std::string& name) const {
  const auto it = classes.find(name);
  return it == classes.end() ? nullptr : &it->second;
}

bool KeypointSet::insert(const Keypoint& keypoint) {
  validate(keypoint);
  return points_.emplace(keypoint.id, keypoint).second;
}

void KeypointSet::insert_or_assign(const Keypoint& keypoint) {
  validate(keypoint);
  points_.insert_or_assign(keypoint.id, keypoint);
}

void KeypointSet::merge(const KeypointSet& other) {
  for (const auto& [id, k] : other) points_.emplace(id, k);
}

const Keypoint* KeypointSet::find(int id) const {
  const auto it = points_.find(id);
  return it == points_.end() ? nullptr : &it->second;
}

bool KeypointSet::operator==(const KeypointSet& other) const {
  if (points_.size() != other.points_.size()) return false;
  for (auto a = points_.begin(), b = other.points_.begin(); a != points_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.position != b->second.position ||
        a->second.confidence != b->second.confidence || a->second.source != b->second.source)
      return false;
  }
  return true;
}

KeypointSet derive_line_line(const Annotation& annotation, const PitchTemplate& pitch) {
  KeypointSet out;
  for (const auto& def : pitch.keypoints()) {
    if (def.family != KeypointFamily::line_line) continue;
    const auto* a = annotation.find(def.classes[0]);
    const auto* b = annotation.find(def.classes[1]);
    if (a == nullptr || b == nullptr || a->size() < kMinLinePoints || b->size() < kMinLinePoints) continue;
    try {
      const Vec2 p = refine_intersection(*a, *b);
      if (p.allFinite()) out.insert(derived(def.id, p));
    } catch (const Error&) {
      // Near-parallel or degenerate fits: the keypoint is omitted.
    }
  }
  return out;
}

KeypointSet derive_line_conic(const Annotation& annotation, const KeypointSet& known, const PitchTemplate& pitch) {
  KeypointSet out;
  const PairMatcher matcher(known, pitch);
  const auto& defs = pitch.keypoints();
  for (size_t i = 0; i + 1 < defs.size(); ++i) {
    const KeypointDef& d0 = defs[i];
    const KeypointDef& d1 = defs[i + 1];
    // Definitions come in consecutive pairs sharing the same conic and line.
    if (d0.family != KeypointFamily::line_conic || d1.classes != d0.classes) continue;
    ++i;
    const auto conic = fit_class_ellipse(annotation, d0.classes[0]);
    const auto line = fit_class_line(annotation, d0.classes[1]);
    if (!conic || !line) continue;
    const auto pts = intersect_line_conic(*line, *conic);
    if (pts.size() != 2) continue;
    const bool swap = matcher.swapped(d0.world, d1.world, pts[0], pts[1], anchors_on_line(pitch, d0.classes[1]));
    out.insert(derived(d0.id, swap ? pts[1] : pts[0]));
    out.insert(derived(d1.id, swap ? pts[0] : pts[1]));
  }
  return out;
}

KeypointSet derive_tangent(const Annotation& annotation, const KeypointSet& anchors, const PitchTemplate& pitch) {
  KeypointSet out;
  const PairMatcher matcher(anchors, pitch);
  const auto& defs = pitch.keypoints();
  for (size_t i = 0; i < defs.size(); ++i) {
    const KeypointDef& def = defs[i];
    if (def.family != KeypointFamily::tangent) continue;
    const bool paired = i + 1 < defs.size() && defs[i + 1].family == KeypointFamily::tangent &&
                        defs[i + 1].anchor == def.anchor && defs[i + 1].classes == def.classes;
    const Keypoint* anchor = anchors.find(def.anchor);
    const auto conic = fit_class_ellipse(annotation, def.classes[0]);
    if (anchor == nullptr || !conic) {
      if (paired) ++i;
      continue;
    }
    std::array<Vec2, 2> touch;
    try {
      touch = tangent_points(anchor->position, *conic);
    } catch (const Error&) {
      if (paired) ++i;
      continue;
    }
    const std::vector<int> refs = {def.anchor};
    if (paired) {
      const KeypointDef& other = defs[i + 1];
      const bool swap = matcher.swapped(def.world, other.world, touch[0], touch[1], refs);
      out.insert(derived(def.id, swap ? touch[1] : touch[0]));
      out.insert(derived(other.id, swap ? touch[0] : touch[1]));
      ++i;
    } else {
      // Only one contact point is a keypoint; the other is the tangency on the undrawn part of the circle.
      const MarkingClass& m = pitch.marking(def.classes[0]);
      const Vec2 c = m.center.head<2>();
      const Vec2 a = pitch.keypoint(def.anchor).world.head<2>();
      const Vec2 w = def.world.head<2>();
      // Reflection of the kept point across the center-anchor axis is the other contact point.
      const Vec2 axis = (a - c).normalized();
      const Vec2 rel = w - c;
      const Vec2 w_other = c + 2.0 * rel.dot(axis) * axis - rel;
      const bool swap = matcher.swapped(def.world, Vec3(w_other.x(), w_other.y(), 0.0), touch[0], touch[1], refs);
      out.insert(derived(def.id, swap ? touch[1] : touch[0]));
    }
  }
  return out;
}

KeypointSet derive_extra(const Annotation& /*annotation*/, const KeypointSet& base, const PitchTemplate& pitch) {
  KeypointSet out;
  KeypointSet structural;
  for (const auto& [id, k] : base)
    if (pitch.keypoint(id).family != KeypointFamily::extra) structural.insert(k);
  const auto h = ground_homography(structural, pitch);
  if (!h) return out;
  // Points on the same side of the vanishing line as the observed ones.
  double side = 0.0;
  for (const auto& [id, k] : structural) {
    const KeypointDef& def = pitch.keypoint(id);
    if (def.on_ground()) side += h->map_homogeneous(def.world.head<2>()).z() > 0 ? 1.0 : -1.0;
  }
  for (const auto& def : pitch.keypoints()) {
    if (def.family != KeypointFamily::extra) continue;
    const Eigen::Vector3d p = h->map_homogeneous(def.world.head<2>());
    if (p.z() * side <= 0.0) continue;
    const Vec2 px = p.head<2>() / p.z();
    if (px.allFinite()) out.insert(derived(def.id, px));
  }
  return out;
}

KeypointSet remap_left_right(const KeypointSet& keypoints, const Annotation& annotation, const PitchTemplate& pitch) {
  std::vector<Correspondence> ground;
  for (const auto& c : to_correspondences(keypoints, pitch))
    if (c.world.z() == 0.0) ground.push_back(c);
  if (!ground_homography(keypoints, pitch)) return keypoints;
  CameraParams cam;
  try {
    cam = calibrate_planar(ground, annotation.image_size);
  } catch (const Error&) {
    return keypoints;
  }
  const double hl = pitch.dimensions().length / 2.0;
  if (std::abs(cam.position.x() - (-hl)) <= std::abs(cam.position.x() - hl)) return keypoints;
  KeypointSet out;
  for (const auto& [id, k] : keypoints) {
    Keypoint moved = k;
    moved.id = pitch.keypoint(id).half_turn;
    out.insert(moved);
  }
  return out;
}

KeypointSet derive_keypoints(const Annotation& annotation, const DeriveOptions& options, const PitchTemplate& pitch) {
  KeypointSet all;
  if (options.line_line) all.merge(derive_line_line(annotation, pitch));
  if (options.line_conic) all.merge(derive_line_conic(annotation, all, pitch));
  if (options.tangent) all.merge(derive_tangent(annotation, all, pitch));
  if (options.extra) all.merge(derive_extra(annotation, all, pitch));
  if (options.remap) all = remap_left_right(all, annotation, pitch);
  return all;
}

std::optional<Homography> ground_homography(const KeypointSet& keypoints, const PitchTemplate& pitch) {
  std::vector<PointPair> pairs;
  std::vector<Vec2> world;
  for (const auto& [id, k] : keypoints) {
    const KeypointDef& def = pitch.keypoint(id);
    if (!def.on_ground()) continue;
    pairs.push_back({def.world.head<2>(), k.position});
    world.push_back(def.world.head<2>());
  }
  if (pairs.size() < 4 || !has_general_quadruple(world)) return std::nullopt;
  try {
    return estimate_homography(pairs);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<Correspondence> to_correspondences(const KeypointSet& keypoints, const PitchTemplate& pitch) {
  std::vector<Correspondence> out;
  out.reserve(keypoints.size());
  for (const auto& [id, k] : keypoints) out.push_back({pitch.keypoint(id).world, k.position, id, k.confidence});
  return out;
}

}  // namespace pitchcal
