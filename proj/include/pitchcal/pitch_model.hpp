#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace pitchcal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Pitch dimensions in meters. World frame: origin at the pitch center, x along
// the long axis (left goal at x = -length/2), y along the short axis ("top"
// touchline at y = +width/2), z up.
struct PitchDimensions {
  double length = 105.0;
  double width = 68.0;
  double goal_width = 7.32;
  double crossbar_height = 2.44;
  double penalty_area_length = 16.5;
  double penalty_area_width = 40.32;
  double goal_area_length = 5.5;
  double goal_area_width = 18.32;
  double circle_radius = 9.15;
  double penalty_spot_distance = 11.0;
};

enum class MarkingKind { line_segment, circle, arc };
enum class MarkingPlane { ground, goal_left, goal_right };

struct MarkingClass {
  std::string name;
  MarkingKind kind = MarkingKind::line_segment;
  MarkingPlane plane = MarkingPlane::ground;
  // line_segment
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  // circle / arc, in the ground plane; angles in radians, begin < end
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double angle_begin = 0.0;
  double angle_end = 0.0;

  bool is_conic() const { return kind != MarkingKind::line_segment; }
  // Point at normalized parameter s in [0, 1] along the marking.
  Vec3 point_at(double s) const;
  double length() const;
};

enum class KeypointFamily { line_line, line_conic, tangent, extra };

std::string_view family_name(KeypointFamily family);

struct KeypointDef {
  int id = 0;
  KeypointFamily family = KeypointFamily::line_line;
  std::string name;
  Vec3 world = Vec3::Zero();
  // line_line: the two defining lines. line_conic: {conic, line}.
  // tangent: {conic}. extra: empty.
  std::vector<std::string> classes;
  // tangent only: keypoint id of the external point.
  int anchor = -1;
  // Partner under x -> -x, and under the half-turn (x, y) -> (-x, -y).
  int mirror = -1;
  int half_turn = -1;

  bool on_ground() const { return world.z() == 0.0; }
};

inline constexpr int kNumKeypoints = 57;
inline constexpr int kNumLineClasses = 23;
inline constexpr int kNumConicClasses = 3;

class PitchTemplate {
 public:
  explicit PitchTemplate(const PitchDimensions& dims = {});

  const PitchDimensions& dimensions() const { return dims_; }
  const std::vector<MarkingClass>& markings() const { return markings_; }
  const std::vector<KeypointDef>& keypoints() const { return keypoints_; }

  // nullptr when the name is not part of the catalog.
  const MarkingClass* find_marking(std::string_view name) const;
  const MarkingClass& marking(std::string_view name) const;
  const KeypointDef& keypoint(int id) const;

 private:
  void build_markings();
  void build_keypoints();

  PitchDimensions dims_;
  std::vector<MarkingClass> markings_;
  std::vector<KeypointDef> keypoints_;
};

PitchTemplate default_template();

// Shared immutable instance of the default template.
const PitchTemplate& standard_pitch();

// Ordered points along the marking with spacing <= step; endpoints included.
std::vector<Vec3> sample_marking(const MarkingClass& marking, double step);

Vec3 keypoint_world(const PitchTemplate& pitch, int id);

// Ordered points for the conic classes: uses angular samples rather than arc length.
std::vector<Vec3> sample_marking_angular(const MarkingClass& marking, int samples_per_circle);

}  // namespace pitchcal
