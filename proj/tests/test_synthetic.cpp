#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Geometry>

#include "pitchcal/errors.hpp"
#include "pitchcal/synthetic.hpp"
#include "pitchcal/voter.hpp"

using namespace pitchcal;

namespace {

const PitchTemplate& pitch() { return standard_pitch(); }

}  // namespace

TEST(SampleCamera, DefaultScenarioAlwaysPlausible) {
  SyntheticScenario s;
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 10000; ++i) {
    const CameraParams cam = sample_camera(s, rng);
    ASSERT_TRUE(is_plausible(cam)) << "sample " << i;
    const Vec3& c = cam.position;
    ASSERT_LE(std::abs(c.x()), 60.0);
    ASSERT_GE(std::abs(c.y()), 25.0);
    ASSERT_LE(std::abs(c.y()), 55.0);
    ASSERT_GE(c.z(), 8.0);
    ASSERT_LE(c.z(), 40.0);
    ASSERT_GE(cam.focal, 800.0);
    ASSERT_LE(cam.focal, 6000.0);
  }
}

TEST(SampleCamera, BroadcastImageSize) {
  SyntheticScenario s;
  std::mt19937_64 rng(1);
  const CameraParams cam = sample_camera(s, rng);
  EXPECT_EQ(cam.image_size.width, 960);
  EXPECT_EQ(cam.image_size.height, 540);
  EXPECT_EQ(cam.principal_point, Vec2(480, 270));
}

TEST(SampleCamera, SeedDeterminesCamera) {
  SyntheticScenario s;
  std::mt19937_64 a(77), b(77);
  const CameraParams ca = sample_camera(s, a);
  const CameraParams cb = sample_camera(s, b);
  EXPECT_EQ(ca.position, cb.position);
  EXPECT_EQ(ca.rotation, cb.rotation);
  EXPECT_EQ(ca.focal, cb.focal);
}

TEST(SampleCamera, VisibilityRequirementHonoured) {
  SyntheticScenario s;
  s.min_visible_keypoints = 10;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) EXPECT_GE(visible_keypoint_ids(sample_camera(s, rng)).size(), 10u);
}

TEST(Scenario, Validation) {
  SyntheticScenario s;
  EXPECT_NO_THROW(s.validate());
  s.dropout_prob = 1.5;
  EXPECT_THROW(s.validate(), Error);
  s = SyntheticScenario{};
  s.camera.max_z_m = 150.0;
  EXPECT_THROW(s.validate(), Error);
  s = SyntheticScenario{};
  s.camera.min_focal_px = 5.0;
  EXPECT_THROW(s.validate(), Error);
  s = SyntheticScenario{};
  s.noise_sigma_px = -1.0;
  EXPECT_THROW(s.validate(), Error);
  s = SyntheticScenario{};
  s.class_dropout_prob["Middle line"] = -0.1;
  EXPECT_THROW(s.validate(), Error);
}

TEST(RenderAnnotation, NoiselessPointsLieOnTheirMarking) {
  SyntheticScenario s;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const CameraParams cam = sample_camera(s, rng);
    const Annotation a = render_annotation(cam, s, rng);
    for (const auto& [name, points] : a.classes) {
      const MarkingClass& m = pitch().marking(name);
      ASSERT_GE(points.size(), 2u);
      for (const auto& p : points) {
        ASSERT_TRUE(cam.image_size.contains(p));
        // Back-project the pixel onto the marking's plane and compare with the marking itself.
        const Vec3 dir = cam.rotation.transpose() * Vec3((p.x() - cam.principal_point.x()) / cam.focal,
                                                         (p.y() - cam.principal_point.y()) / cam.focal, 1.0);
        double err;
        if (m.is_conic()) {
          const double s_ground = -cam.position.z() / dir.z();
          const Vec3 g = cam.position + s_ground * dir;
          err = std::abs((g - m.center).head<2>().norm() - m.radius);
          const auto back = project(cam, g);
          ASSERT_TRUE(back);
          EXPECT_LT((*back - p).norm(), 1e-9);
        } else {
          // Distance from the marking's 3D line to the viewing ray, via the reprojected closest point.
          const Vec3 u = (m.b - m.a).normalized();
          const Vec3 w0 = cam.position - m.a;
          const Vec3 n = dir.cross(u);
          err = std::abs(w0.dot(n)) / n.norm();
        }
        EXPECT_LT(err, 1e-6) << name;
      }
    }
  }
}

TEST(RenderAnnotation, ClassDropoutRemovesClass) {
  SyntheticScenario s;
  s.class_dropout_prob["Circle central"] = 1.0;
  const auto cam = CameraParams::look_at({0, -40, 20}, {0, 0, 0}, 1500, {});
  std::mt19937_64 rng(6);
  const Annotation a = render_annotation(cam, s, rng);
  EXPECT_FALSE(a.find("Circle central"));
  EXPECT_TRUE(a.find("Middle line"));
}

TEST(RenderAnnotation, NoiseHasRequestedSpread) {
  SyntheticScenario clean;
  SyntheticScenario noisy;
  noisy.noise_sigma_px = 1.0;
  std::mt19937_64 cams(8);
  std::vector<double> residuals;
  std::uint64_t k = 0;
  while (residuals.size() < 20000) {
    const CameraParams cam = sample_camera(clean, cams);
    std::mt19937_64 r1(++k), r2(k);
    const Annotation a = render_annotation(cam, clean, r1);
    const Annotation b = render_annotation(cam, noisy, r2);
    for (const auto& [name, pts] : a.classes) {
      const auto* q = b.find(name);
      ASSERT_NE(q, nullptr);
      ASSERT_EQ(q->size(), pts.size());
      for (size_t i = 0; i < pts.size(); ++i) {
        residuals.push_back((*q)[i].x() - pts[i].x());
        residuals.push_back((*q)[i].y() - pts[i].y());
      }
    }
  }
  double mean = 0.0;
  for (double r : residuals) mean += r;
  mean /= residuals.size();
  double var = 0.0;
  for (double r : residuals) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / (residuals.size() - 1));
  EXPECT_GE(sd, 0.9);
  EXPECT_LE(sd, 1.1);
  EXPECT_LT(std::abs(mean), 0.05);
}

TEST(RenderDetections, NoiselessKeypointsAreProjections) {
  SyntheticScenario s;
  s.min_visible_keypoints = 8;
  const SyntheticFrame f = make_frame(s, 0);
  EXPECT_EQ(f.detections.keypoints.size(), visible_keypoint_ids(f.camera).size());
  for (const auto& [id, k] : f.detections.keypoints) {
    EXPECT_LT((k.position - *project(f.camera, pitch().keypoint(id).world)).norm(), 1e-9);
    EXPECT_EQ(k.confidence, 1.0);
  }
  for (const auto& l : f.detections.lines) {
    const MarkingClass& m = pitch().marking(l.class_name);
    EXPECT_FALSE(m.is_conic());
    const Vec2 a = *project(f.camera, m.a);
    const Vec2 b = *project(f.camera, m.b);
    const Line2 line = Line2::through(a, b);
    EXPECT_LT(std::abs(line.signed_distance(l.p1)), 1e-6);
    EXPECT_LT(std::abs(line.signed_distance(l.p2)), 1e-6);
  }
}

TEST(RenderDetections, NoiselessPipelineRecoversCamera) {
  SyntheticScenario s;
  s.min_visible_keypoints = 8;
  s.seed = 99;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const SyntheticFrame f = make_frame(s, i);
    const auto outcome = calibrate_detections(f.detections, VoterConfig{});
    ASSERT_TRUE(outcome) << "frame " << i;
    EXPECT_LT(std::abs(outcome->params.focal / f.camera.focal - 1.0), 1e-3);
    EXPECT_LT((outcome->params.position - f.camera.position).norm(), 0.02);
  }
}

TEST(RenderDetections, CentreCircleViewHasFewKeypoints) {
  // Zoomed on the centre circle, away from the halfway line ends.
  const auto cam = CameraParams::look_at({0, -45, 18}, {0, 24, 0}, 2200, {});
  ASSERT_TRUE(project(cam, pitch().marking("Circle central").center));
  const auto ids = visible_keypoint_ids(cam);
  EXPECT_LE(ids.size(), 6u);
  std::mt19937_64 rng(1);
  const Annotation a = render_annotation(cam, SyntheticScenario{}, rng);
  EXPECT_TRUE(a.find("Circle central"));
}

TEST(RenderDetections, SkyCameraProducesNothing) {
  CameraParams cam = CameraParams::look_at({0, -40, 20}, {0, 200, 120}, 1000, {});
  std::mt19937_64 rng(1);
  const SyntheticScenario s;
  const Annotation a = render_annotation(cam, s, rng);
  const Detections d = render_detections(cam, s, rng);
  EXPECT_TRUE(a.classes.empty());
  EXPECT_TRUE(d.keypoints.empty());
  EXPECT_TRUE(d.lines.empty());
  EXPECT_FALSE(calibrate_detections(d, VoterConfig{}));
}

TEST(MakeFrame, ReproducibleAndIndependentOfOrder) {
  SyntheticScenario s;
  s.noise_sigma_px = 1.0;
  s.min_confidence = 0.2;
  s.seed = 42;
  const SyntheticFrame late_first = make_frame(s, 7);
  make_frame(s, 3);
  const SyntheticFrame again = make_frame(s, 7);
  EXPECT_EQ(late_first.camera.position, again.camera.position);
  EXPECT_EQ(late_first.detections.keypoints, again.detections.keypoints);
  ASSERT_EQ(late_first.annotation.classes.size(), again.annotation.classes.size());
  for (const auto& [name, pts] : late_first.annotation.classes) {
    const auto* q = again.annotation.find(name);
    ASSERT_NE(q, nullptr);
    for (size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(pts[i], (*q)[i]);
  }
  EXPECT_NE(frame_seed(42, 0), frame_seed(42, 1));
  EXPECT_NE(frame_seed(42, 0), frame_seed(43, 0));
}
