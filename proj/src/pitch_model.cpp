#include "pitchcal/pitch_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pitchcal/errors.hpp"

namespace pitchcal {

namespace {

constexpr double kPi = std::numbers::pi;

// Tangent points on a ground circle seen from an external ground point.
std::array<Vec3, 2> circle_tangents(const Vec3& center, double radius, const Vec3& external) {
  const Vec2 v = (external - center).head<2>();
  const double d2 = v.squaredNorm();
  const double along = radius * radius / d2;
  const double across = radius * std::sqrt(d2 - radius * radius) / d2;
  const Vec2 perp(-v.y(), v.x());
  const Vec2 p0 = center.head<2>() + along * v + across * perp;
  const Vec2 p1 = center.head<2>() + along * v - across * perp;
  return {Vec3(p0.x(), p0.y(), 0.0), Vec3(p1.x(), p1.y(), 0.0)};
}

}  // namespace

std::string_view family_name(KeypointFamily family) {
  switch (family) {
    case KeypointFamily::line_line: return "line_line";
    case KeypointFamily::line_conic: return "line_conic";
    case KeypointFamily::tangent: return "tangent";
    case KeypointFamily::extra: return "extra";
  }
  return "unknown";
}

Vec3 MarkingClass::point_at(double s) const {
  if (kind == MarkingKind::line_segment) return a + s * (b - a);
  const double angle = angle_begin + s * (angle_end - angle_begin);
  return center + radius * Vec3(std::cos(angle), std::sin(angle), 0.0);
}

double MarkingClass::length() const {
  if (kind == MarkingKind::line_segment) return (b - a).norm();
  return radius * (angle_end - angle_begin);
}

PitchTemplate::PitchTemplate(const PitchDimensions& dims) : dims_(dims) {
  const auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(dims.length) || !positive(dims.width) || !positive(dims.goal_width) ||
      !positive(dims.crossbar_height) || !positive(dims.penalty_area_length) ||
      !positive(dims.penalty_area_width) || !positive(dims.goal_area_length) ||
      !positive(dims.goal_area_width) || !positive(dims.circle_radius) ||
      !positive(dims.penalty_spot_distance)) {
    throw Error("pitch dimensions must be strictly positive");
  }
  if (dims.goal_area_length >= dims.penalty_area_length ||
      dims.goal_area_width >= dims.penalty_area_width ||
      dims.penalty_area_width >= dims.width || dims.goal_width >= dims.goal_area_width ||
      2.0 * dims.penalty_area_length >= dims.length) {
    throw Error("penalty area must strictly contain the goal area and fit in the pitch");
  }
  if (dims.circle_radius >= dims.width / 2.0) throw Error("circle radius must be below width/2");
  const double arc_offset = dims.penalty_area_length - dims.penalty_spot_distance;
  if (arc_offset <= 0.0 || arc_offset >= dims.circle_radius) {
    throw Error("penalty arc must cross the penalty area front line");
  }
  build_markings();
  build_keypoints();
}

void PitchTemplate::build_markings() {
  const double hl = dims_.length / 2.0;
  const double hw = dims_.width / 2.0;
  const double pa_x = hl - dims_.penalty_area_length;
  const double pa_y = dims_.penalty_area_width / 2.0;
  const double ga_x = hl - dims_.goal_area_length;
  const double ga_y = dims_.goal_area_width / 2.0;
  const double gy = dims_.goal_width / 2.0;
  const double h = dims_.crossbar_height;

  const auto seg = [&](std::string name, Vec3 a, Vec3 b, MarkingPlane plane = MarkingPlane::ground) {
    MarkingClass m;
    m.name = std::move(name);
    m.kind = MarkingKind::line_segment;
    m.plane = plane;
    m.a = a;
    m.b = b;
    markings_.push_back(std::move(m));
  };

  seg("Side line top", {-hl, hw, 0}, {hl, hw, 0});
  seg("Side line bottom", {-hl, -hw, 0}, {hl, -hw, 0});
  seg("Side line left", {-hl, hw, 0}, {-hl, -hw, 0});
  seg("Side line right", {hl, hw, 0}, {hl, -hw, 0});
  seg("Middle line", {0, hw, 0}, {0, -hw, 0});

  seg("Big rect. left top", {-hl, pa_y, 0}, {-pa_x, pa_y, 0});
  seg("Big rect. left main", {-pa_x, pa_y, 0}, {-pa_x, -pa_y, 0});
  seg("Big rect. left bottom", {-hl, -pa_y, 0}, {-pa_x, -pa_y, 0});
  seg("Big rect. right top", {hl, pa_y, 0}, {pa_x, pa_y, 0});
  seg("Big rect. right main", {pa_x, pa_y, 0}, {pa_x, -pa_y, 0});
  seg("Big rect. right bottom", {hl, -pa_y, 0}, {pa_x, -pa_y, 0});

  seg("Small rect. left top", {-hl, ga_y, 0}, {-ga_x, ga_y, 0});
  seg("Small rect. left main", {-ga_x, ga_y, 0}, {-ga_x, -ga_y, 0});
  seg("Small rect. left bottom", {-hl, -ga_y, 0}, {-ga_x, -ga_y, 0});
  seg("Small rect. right top", {hl, ga_y, 0}, {ga_x, ga_y, 0});
  seg("Small rect. right main", {ga_x, ga_y, 0}, {ga_x, -ga_y, 0});
  seg("Small rect. right bottom", {hl, -ga_y, 0}, {ga_x, -ga_y, 0});

  // "left"/"right" posts as seen from the pitch, facing the goal.
  seg("Goal left crossbar", {-hl, -gy, h}, {-hl, gy, h}, MarkingPlane::goal_left);
  seg("Goal left post left", {-hl, -gy, 0}, {-hl, -gy, h}, MarkingPlane::goal_left);
  seg("Goal left post right", {-hl, gy, 0}, {-hl, gy, h}, MarkingPlane::goal_left);
  seg("Goal right crossbar", {hl, gy, h}, {hl, -gy, h}, MarkingPlane::goal_right);
  seg("Goal right post left", {hl, gy, 0}, {hl, gy, h}, MarkingPlane::goal_right);
  seg("Goal right post right", {hl, -gy, 0}, {hl, -gy, h}, MarkingPlane::goal_right);

  const double r = dims_.circle_radius;
  const double half_arc = std::acos((dims_.penalty_area_length - dims_.penalty_spot_distance) / r);
  const double spot_x = hl - dims_.penalty_spot_distance;

  MarkingClass central;
  central.name = "Circle central";
  central.kind = MarkingKind::circle;
  central.radius = r;
  central.angle_begin = 0.0;
  central.angle_end = 2.0 * kPi;
  markings_.push_back(central);

  MarkingClass left = central;
  left.name = "Circle left";
  left.kind = MarkingKind::arc;
  left.center = Vec3(-spot_x, 0, 0);
  left.angle_begin = -half_arc;
  left.angle_end = half_arc;
  markings_.push_back(left);

  MarkingClass right = left;
  right.name = "Circle right";
  right.center = Vec3(spot_x, 0, 0);
  right.angle_begin = kPi - half_arc;
  right.angle_end = kPi + half_arc;
  markings_.push_back(right);
}

void PitchTemplate::build_keypoints() {
  const double hl = dims_.length / 2.0;
  const double hw = dims_.width / 2.0;
  const double pa_x = hl - dims_.penalty_area_length;
  const double pa_y = dims_.penalty_area_width / 2.0;
  const double ga_x = hl - dims_.goal_area_length;
  const double ga_y = dims_.goal_area_width / 2.0;
  const double gy = dims_.goal_width / 2.0;
  const double h = dims_.crossbar_height;
  const double r = dims_.circle_radius;
  const double spot_x = hl - dims_.penalty_spot_distance;

  const auto add = [&](KeypointFamily family, std::string name, Vec3 world,
                       std::vector<std::string> classes, int anchor = -1) {
    KeypointDef def;
    def.id = static_cast<int>(keypoints_.size());
    def.family = family;
    def.name = std::move(name);
    def.world = world;
    def.classes = std::move(classes);
    def.anchor = anchor;
    keypoints_.push_back(std::move(def));
  };
  using F = KeypointFamily;

  // Line-line: one side at a time; sign = -1 for the left half.
  const auto side = [&](double s, const std::string& lr) {
    const std::string goal_line = lr == "left" ? "Side line left" : "Side line right";
    const std::string big = "Big rect. " + lr + " ";
    const std::string small = "Small rect. " + lr + " ";
    const std::string goal = "Goal " + lr + " ";
    add(F::line_line, "corner top " + lr, {s * hl, hw, 0}, {"Side line top", goal_line});
    add(F::line_line, "corner bottom " + lr, {s * hl, -hw, 0}, {"Side line bottom", goal_line});
    add(F::line_line, big + "top goal line", {s * hl, pa_y, 0}, {big + "top", goal_line});
    add(F::line_line, big + "top corner", {s * pa_x, pa_y, 0}, {big + "top", big + "main"});
    add(F::line_line, big + "bottom corner", {s * pa_x, -pa_y, 0}, {big + "bottom", big + "main"});
    add(F::line_line, big + "bottom goal line", {s * hl, -pa_y, 0}, {big + "bottom", goal_line});
    add(F::line_line, small + "top goal line", {s * hl, ga_y, 0}, {small + "top", goal_line});
    add(F::line_line, small + "top corner", {s * ga_x, ga_y, 0}, {small + "top", small + "main"});
    add(F::line_line, small + "bottom corner", {s * ga_x, -ga_y, 0}, {small + "bottom", small + "main"});
    add(F::line_line, small + "bottom goal line", {s * hl, -ga_y, 0}, {small + "bottom", goal_line});
    // Left goal: "post left" at y = -gy. Right goal mirrored under x -> -x is "post right".
    const std::string post_neg = s < 0 ? goal + "post left" : goal + "post right";
    const std::string post_pos = s < 0 ? goal + "post right" : goal + "post left";
    add(F::line_line, post_neg + " ground", {s * hl, -gy, 0}, {post_neg, goal_line});
    add(F::line_line, post_pos + " ground", {s * hl, gy, 0}, {post_pos, goal_line});
    add(F::line_line, post_neg + " crossbar", {s * hl, -gy, h}, {post_neg, goal + "crossbar"});
    add(F::line_line, post_pos + " crossbar", {s * hl, gy, h}, {post_pos, goal + "crossbar"});
  };
  side(-1.0, "left");
  add(F::line_line, "halfway top", {0, hw, 0}, {"Middle line", "Side line top"});
  add(F::line_line, "halfway bottom", {0, -hw, 0}, {"Middle line", "Side line bottom"});
  side(1.0, "right");

  // Line-conic.
  const double arc_y = std::sqrt(r * r - (dims_.penalty_area_length - dims_.penalty_spot_distance) *
                                             (dims_.penalty_area_length - dims_.penalty_spot_distance));
  add(F::line_conic, "central circle top", {0, r, 0}, {"Circle central", "Middle line"});
  add(F::line_conic, "central circle bottom", {0, -r, 0}, {"Circle central", "Middle line"});
  add(F::line_conic, "left arc top", {-pa_x, arc_y, 0}, {"Circle left", "Big rect. left main"});
  add(F::line_conic, "left arc bottom", {-pa_x, -arc_y, 0}, {"Circle left", "Big rect. left main"});
  add(F::line_conic, "right arc top", {pa_x, arc_y, 0}, {"Circle right", "Big rect. right main"});
  add(F::line_conic, "right arc bottom", {pa_x, -arc_y, 0}, {"Circle right", "Big rect. right main"});

  // Tangent points. Central circle from the two halfway/touchline intersections.
  const auto by_x = [](std::array<Vec3, 2> t) {
    if (t[0].x() > t[1].x()) std::swap(t[0], t[1]);
    return t;
  };
  const int halfway_top = 14;
  const int halfway_bottom = 15;
  for (int anchor : {halfway_top, halfway_bottom}) {
    const auto t = by_x(circle_tangents(Vec3::Zero(), r, keypoints_[anchor].world));
    const std::string which = anchor == halfway_top ? "top" : "bottom";
    add(F::tangent, "central circle tangent " + which + " left", t[0], {"Circle central"}, anchor);
    add(F::tangent, "central circle tangent " + which + " right", t[1], {"Circle central"}, anchor);
  }
  // Penalty arcs from the penalty-area front corners; keep the point on the drawn arc.
  const int left_top_corner = 3, left_bottom_corner = 4;
  const int right_top_corner = 19, right_bottom_corner = 20;
  const auto arc_tangent = [&](const std::string& conic, double s, int anchor, const std::string& which) {
    const Vec3 center(s * spot_x, 0, 0);
    const auto t = circle_tangents(center, r, keypoints_[anchor].world);
    // The drawn arc lies on the pitch-center side of the penalty area front line.
    const Vec3& pick = std::abs(t[0].x()) < std::abs(t[1].x()) ? t[0] : t[1];
    add(F::tangent, conic + " tangent " + which, pick, {conic}, anchor);
  };
  arc_tangent("Circle left", -1.0, left_top_corner, "top");
  arc_tangent("Circle left", -1.0, left_bottom_corner, "bottom");
  arc_tangent("Circle right", 1.0, right_top_corner, "top");
  arc_tangent("Circle right", 1.0, right_bottom_corner, "bottom");

  // Extra points: the longitudinal axis, then central circle quarter turns.
  add(F::extra, "left goal line center", {-hl, 0, 0}, {});
  add(F::extra, "left goal area center", {-ga_x, 0, 0}, {});
  add(F::extra, "left penalty spot", {-spot_x, 0, 0}, {});
  add(F::extra, "left penalty area center", {-pa_x, 0, 0}, {});
  add(F::extra, "pitch center", {0, 0, 0}, {});
  add(F::extra, "right penalty area center", {pa_x, 0, 0}, {});
  add(F::extra, "right penalty spot", {spot_x, 0, 0}, {});
  add(F::extra, "right goal area center", {ga_x, 0, 0}, {});
  add(F::extra, "right goal line center", {hl, 0, 0}, {});
  const double q = r / std::sqrt(2.0);
  add(F::extra, "central circle 45", {q, q, 0}, {});
  add(F::extra, "central circle 135", {-q, q, 0}, {});
  add(F::extra, "central circle 225", {-q, -q, 0}, {});
  add(F::extra, "central circle 315", {q, -q, 0}, {});

  // Symmetry partners by geometric lookup.
  const auto find_at = [&](const Vec3& p) {
    for (const auto& k : keypoints_)
      if ((k.world - p).norm() < 1e-9) return k.id;
    return -1;
  };
  for (auto& k : keypoints_) {
    k.mirror = find_at(Vec3(-k.world.x(), k.world.y(), k.world.z()));
    k.half_turn = find_at(Vec3(-k.world.x(), -k.world.y(), k.world.z()));
  }
}

const MarkingClass* PitchTemplate::find_marking(std::string_view name) const {
  const auto it = std::find_if(markings_.begin(), markings_.end(),
                               [&](const MarkingClass& m) { return m.name == name; });
  return it == markings_.end() ? nullptr : &*it;
}

const MarkingClass& PitchTemplate::marking(std::string_view name) const {
  const MarkingClass* m = find_marking(name);
  if (m == nullptr) throw Error("unknown marking class: " + std::string(name));
  return *m;
}

const KeypointDef& PitchTemplate::keypoint(int id) const {
  if (id < 0 || id >= static_cast<int>(keypoints_.size()))
    throw Error("unknown keypoint id " + std::to_string(id));
  return keypoints_[static_cast<size_t>(id)];
}

PitchTemplate default_template() { return PitchTemplate(PitchDimensions{}); }

const PitchTemplate& standard_pitch() {
  static const PitchTemplate pitch;
  return pitch;
}

std::vector<Vec3> sample_marking(const MarkingClass& marking, double step) {
  if (!(step > 0.0)) throw Error("sample step must be positive");
  const int min_segments = marking.is_conic() ? 4 : 1;
  // Conic chords are shorter than the arc they span, so arc length bounds spacing.
  const int segments =
      std::max(min_segments, static_cast<int>(std::ceil(marking.length() / step - 1e-12)));
  std::vector<Vec3> points;
  points.reserve(static_cast<size_t>(segments) + 1);
  for (int i = 0; i <= segments; ++i) points.push_back(marking.point_at(static_cast<double>(i) / segments));
  return points;
}

std::vector<Vec3> sample_marking_angular(const MarkingClass& marking, int samples_per_circle) {
  if (!marking.is_conic()) throw Error("angular sampling requires a conic marking");
  const double span = marking.angle_end - marking.angle_begin;
  const int segments = std::max(4, static_cast<int>(std::ceil(samples_per_circle * span / (2.0 * kPi) - 1e-12)));
  std::vector<Vec3> points;
  for (int i = 0; i <= segments; ++i) points.push_back(marking.point_at(static_cast<double>(i) / segments));
  return points;
}

Vec3 keypoint_world(const PitchTemplate& pitch, int id) { return pitch.keypoint(id).world; }

}  // namespace pitchcal
