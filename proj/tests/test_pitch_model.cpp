#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "pitchcal/errors.hpp"
#include "pitchcal/pitch_model.hpp"

namespace pitchcal {
namespace {

double distance_to_marking(const MarkingClass& m, const Vec3& p) {
  if (m.kind == MarkingKind::line_segment) {
    const Vec3 d = (m.b - m.a).normalized();
    const Vec3 r = p - m.a;
    return (r - r.dot(d) * d).norm();
  }
  return std::abs(Vec3(p.x() - m.center.x(), p.y() - m.center.y(), p.z()).norm() - m.radius) + std::abs(p.z());
}

TEST(PitchModel, CatalogCounts) {
  const PitchTemplate pitch = default_template();
  EXPECT_EQ(pitch.keypoints().size(), 57u);
  int lines = 0, conics = 0;
  for (const auto& m : pitch.markings()) (m.is_conic() ? conics : lines)++;
  EXPECT_EQ(lines, 23);
  EXPECT_EQ(conics, 3);
  EXPECT_NE(pitch.find_marking("Circle central"), nullptr);
  EXPECT_NE(pitch.find_marking("Circle left"), nullptr);
  EXPECT_NE(pitch.find_marking("Circle right"), nullptr);

  int counts[4] = {0, 0, 0, 0};
  for (const auto& k : pitch.keypoints()) counts[static_cast<int>(k.family)]++;
  EXPECT_EQ(counts[0], 30);
  EXPECT_EQ(counts[1], 6);
  EXPECT_EQ(counts[2], 8);
  EXPECT_EQ(counts[3], 13);
}

TEST(PitchModel, NamedKeypoints) {
  const PitchTemplate pitch = default_template();
  const auto find = [&](const std::string& name) {
    for (const auto& k : pitch.keypoints())
      if (k.name == name) return k.world;
    ADD_FAILURE() << name;
    return Vec3(Vec3::Constant(NAN));
  };
  EXPECT_TRUE(find("pitch center").isApprox(Vec3::Zero()) || find("pitch center").norm() == 0.0);
  EXPECT_NEAR((find("left penalty spot") - Vec3(-41.5, 0, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((find("central circle top") - Vec3(0, 9.15, 0)).norm(), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(find("Goal left post left crossbar").z(), 2.44);
  EXPECT_DOUBLE_EQ(find("Goal left post right crossbar").z(), 2.44);
}

TEST(PitchModel, KeypointsLieOnTheirMarkings) {
  const PitchTemplate pitch = default_template();
  for (const auto& k : pitch.keypoints()) {
    for (const auto& cls : k.classes) {
      EXPECT_LT(distance_to_marking(pitch.marking(cls), k.world), 1e-9) << k.name << " / " << cls;
    }
    if (k.family == KeypointFamily::tangent) {
      // Tangency: the radius to the contact point is orthogonal to the line from the anchor.
      const auto& conic = pitch.marking(k.classes[0]);
      const Vec3 radius = k.world - conic.center;
      const Vec3 to_anchor = pitch.keypoint(k.anchor).world - k.world;
      EXPECT_LT(std::abs(radius.dot(to_anchor.normalized())), 1e-9) << k.name;
      // And it lies on the drawn part of the conic.
      const double ang = std::atan2(radius.y(), radius.x());
      bool on_arc = false;
      for (double wrap : {-2 * M_PI, 0.0, 2 * M_PI})
        on_arc |= ang + wrap >= conic.angle_begin - 1e-12 && ang + wrap <= conic.angle_end + 1e-12;
      EXPECT_TRUE(on_arc) << k.name;
    }
  }
}

TEST(PitchModel, MirrorAndHalfTurnPartners) {
  const PitchTemplate pitch = default_template();
  std::set<int> mirrors, turns;
  for (const auto& k : pitch.keypoints()) {
    ASSERT_GE(k.mirror, 0) << k.name;
    ASSERT_GE(k.half_turn, 0) << k.name;
    const Vec3 m = pitch.keypoint(k.mirror).world;
    EXPECT_LT((m - Vec3(-k.world.x(), k.world.y(), k.world.z())).norm(), 1e-9);
    EXPECT_EQ(pitch.keypoint(k.mirror).mirror, k.id);
    EXPECT_EQ(pitch.keypoint(k.mirror).family, k.family);
    EXPECT_EQ(pitch.keypoint(k.half_turn).half_turn, k.id);
    EXPECT_EQ(pitch.keypoint(k.half_turn).family, k.family);
    mirrors.insert(k.mirror);
    turns.insert(k.half_turn);
  }
  EXPECT_EQ(mirrors.size(), 57u);
  EXPECT_EQ(turns.size(), 57u);
}

TEST(PitchModel, TemplateIsSymmetric) {
  const PitchTemplate pitch = default_template();
  for (const auto& m : pitch.markings()) {
    for (const Vec3& p : sample_marking(m, 1.0)) {
      for (const Vec3& q : {Vec3(-p.x(), p.y(), p.z()), Vec3(p.x(), -p.y(), p.z())}) {
        double best = INFINITY;
        for (const auto& other : pitch.markings()) {
          for (const Vec3& s : sample_marking(other, 0.05)) best = std::min(best, (s - q).norm());
        }
        EXPECT_LT(best, 0.03) << m.name;
      }
    }
  }
}

TEST(PitchModel, SampleMarking) {
  const PitchTemplate pitch = default_template();
  const auto halfway = sample_marking(pitch.marking("Middle line"), 34.0);
  ASSERT_EQ(halfway.size(), 3u);
  EXPECT_NEAR(std::abs(halfway[0].y()), 34.0, 1e-12);
  EXPECT_NEAR(halfway[1].norm(), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(halfway[2].y()), 34.0, 1e-12);

  const auto circle = sample_marking(pitch.marking("Circle central"), 1000.0);
  EXPECT_GE(circle.size(), 4u);
  for (const auto& p : circle) EXPECT_NEAR(p.norm(), 9.15, 1e-12);

  for (const auto& m : pitch.markings()) {
    const auto pts = sample_marking(m, 0.5);
    EXPECT_LT((pts.front() - m.point_at(0.0)).norm(), 1e-12);
    EXPECT_LT((pts.back() - m.point_at(1.0)).norm(), 1e-12);
    for (size_t i = 1; i < pts.size(); ++i) EXPECT_LE((pts[i] - pts[i - 1]).norm(), 0.5 + 1e-12) << m.name;
  }
  EXPECT_THROW(sample_marking(pitch.marking("Middle line"), 0.0), Error);
}

TEST(PitchModel, GoalPlaneHeights) {
  const PitchTemplate pitch = default_template();
  for (const auto& m : pitch.markings()) {
    if (m.plane == MarkingPlane::ground) {
      EXPECT_EQ(m.a.z(), 0.0);
      EXPECT_EQ(m.b.z(), 0.0);
    } else {
      EXPECT_LE(std::max(m.a.z(), m.b.z()), 2.44);
      EXPECT_GE(std::min(m.a.z(), m.b.z()), 0.0);
    }
  }
}

TEST(PitchModel, InvalidDimensionsRejected) {
  PitchDimensions d;
  d.circle_radius = 40.0;
  EXPECT_THROW(PitchTemplate{d}, Error);
  d = {};
  d.goal_area_width = 50.0;
  EXPECT_THROW(PitchTemplate{d}, Error);
  d = {};
  d.length = -1.0;
  EXPECT_THROW(PitchTemplate{d}, Error);
  EXPECT_THROW(default_template().keypoint(57), Error);
  EXPECT_THROW(default_template().keypoint(-1), Error);
}

}  // namespace
}  // namespace pitchcal
