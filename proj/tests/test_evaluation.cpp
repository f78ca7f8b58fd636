#include <gtest/gtest.h>

#include <random>

#include "pitchcal/errors.hpp"
#include "pitchcal/evaluation.hpp"
#include "pitchcal/synthetic.hpp"

using namespace pitchcal;

namespace {

const PitchTemplate& pitch() { return standard_pitch(); }

PolylineSet horizontal(const std::string& name, double y) { return {{name, {{Vec2(0, y), Vec2(100, y)}}}}; }

Annotation annotated(const std::string& name, std::vector<Vec2> points) {
  Annotation a;
  a.classes[name] = std::move(points);
  return a;
}

CameraParams top_down_camera() { return CameraParams::look_at({0, -0.5, 60}, {0, 0, 0}, 350, {}); }

}  // namespace

TEST(SegmentConfusion, AllPointsWithinThresholdIsTruePositive) {
  const auto c = segment_confusion(horizontal("Middle line", 10), annotated("Middle line", {{5, 12}, {50, 8}}), 5.0);
  EXPECT_EQ(total_counts(c), (ClassCounts{1, 0, 0}));
}

TEST(SegmentConfusion, UnpredictedAndUnannotatedClasses) {
  const auto c = segment_confusion(horizontal("Middle line", 10), annotated("Side line top", {{5, 12}}), 5.0);
  EXPECT_EQ(total_counts(c), (ClassCounts{0, 1, 1}));
  EXPECT_EQ(c.at("Middle line"), (ClassCounts{0, 1, 0}));
  EXPECT_EQ(c.at("Side line top"), (ClassCounts{0, 0, 1}));
}

TEST(SegmentConfusion, DistanceExactlyThresholdCounts) {
  const auto c = segment_confusion(horizontal("Middle line", 10), annotated("Middle line", {{20, 15}}), 5.0);
  EXPECT_EQ(total_counts(c), (ClassCounts{1, 0, 0}));
  const auto d = segment_confusion(horizontal("Middle line", 10), annotated("Middle line", {{20, 15.001}}), 5.0);
  EXPECT_EQ(total_counts(d), (ClassCounts{0, 1, 0}));
}

TEST(SegmentConfusion, DistanceToPolylineUsesSegments) {
  const std::vector<Polyline> pl = {{Vec2(0, 0), Vec2(10, 0), Vec2(10, 10)}};
  EXPECT_DOUBLE_EQ(point_to_polyline_distance({5, 3}, pl), 3.0);
  EXPECT_DOUBLE_EQ(point_to_polyline_distance({13, 5}, pl), 3.0);
  EXPECT_DOUBLE_EQ(point_to_polyline_distance({-3, -4}, pl), 5.0);
}

TEST(AccAtT, Fixtures) {
  EXPECT_DOUBLE_EQ(*acc_at_t({1, 0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(*acc_at_t({3, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(*acc_at_t({0, 2, 0}), 0.0);
  EXPECT_FALSE(acc_at_t({0, 0, 0}));
}

TEST(Score, ReportedCombinations) {
  EXPECT_NEAR(score(0.7322, 0.7559), 0.5535, 5e-4);
  EXPECT_NEAR(score(0.7446, 0.7245), 0.5395, 5e-4);
  EXPECT_DOUBLE_EQ(score(1.0, 0.37), 0.37);
  EXPECT_DOUBLE_EQ(score(0.0, 0.8), 0.0);
  EXPECT_THROW(score(1.2, 0.5), Error);
  EXPECT_THROW(score(0.5, -0.1), Error);
}

TEST(L2Keypoints, Examples) {
  KeypointSet a, b;
  a.insert({0, {10, 10}});
  a.insert({1, {20, 20}});
  EXPECT_DOUBLE_EQ(l2_keypoints(a, a), 0.0);
  b.insert({0, {13, 14}});
  b.insert({7, {0, 0}});
  EXPECT_DOUBLE_EQ(l2_keypoints(a, b), 5.0);
  KeypointSet c;
  c.insert({0, {10, 10}});
  c.insert({1, {30, 20}});
  EXPECT_DOUBLE_EQ(l2_keypoints(a, c), 5.0);
  KeypointSet none;
  none.insert({9, {0, 0}});
  EXPECT_THROW(l2_keypoints(a, none), Error);
}

TEST(ProjectMarkings, TopDownViewShowsEveryClass) {
  const auto predicted = project_markings(top_down_camera(), pitch());
  EXPECT_EQ(predicted.size(), static_cast<size_t>(kNumLineClasses + kNumConicClasses));
  for (const auto& m : pitch().markings()) EXPECT_TRUE(predicted.count(m.name)) << m.name;
}

TEST(ProjectMarkings, CentreCircleZoomHidesTouchlines) {
  const auto cam = CameraParams::look_at({0, -40, 20}, {0, 0, 0}, 3000, {});
  const auto predicted = project_markings(cam, pitch());
  EXPECT_TRUE(predicted.count("Circle central"));
  EXPECT_TRUE(predicted.count("Middle line"));
  EXPECT_FALSE(predicted.count("Side line top"));
  EXPECT_FALSE(predicted.count("Side line bottom"));
}

TEST(ProjectMarkings, PolylinesStayInsideTheFrame) {
  SyntheticScenario s;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const CameraParams cam = sample_camera(s, rng);
    for (const auto& [name, pieces] : project_markings(cam, pitch()))
      for (const auto& piece : pieces) {
        EXPECT_GE(piece.size(), 2u);
        for (const auto& p : piece) {
          EXPECT_GE(p.x(), -1e-6);
          EXPECT_LE(p.x(), cam.image_size.width + 1e-6);
          EXPECT_GE(p.y(), -1e-6);
          EXPECT_LE(p.y(), cam.image_size.height + 1e-6);
        }
      }
  }
}

TEST(VisibleIntervals, SegmentEndsOnTheFrameBorder) {
  // Interval ends strictly inside the marking must project onto the image border.
  SyntheticScenario s;
  std::mt19937_64 rng(9);
  int clipped = 0;
  for (int i = 0; i < 100; ++i) {
    const CameraParams cam = sample_camera(s, rng);
    for (const auto& m : pitch().markings()) {
      if (m.is_conic()) continue;
      for (const auto& iv : visible_intervals(cam, m)) {
        for (double t : {iv.begin, iv.end}) {
          if (t <= 1e-12 || t >= 1.0 - 1e-12) continue;
          const Vec2 p = *project(cam, m.point_at(t));
          const double border = std::min({std::abs(p.x()), std::abs(p.x() - cam.image_size.width), std::abs(p.y()),
                                          std::abs(p.y() - cam.image_size.height)});
          EXPECT_LT(border, 1e-6) << m.name;
          ++clipped;
        }
      }
    }
  }
  EXPECT_GT(clipped, 100);
}

TEST(VisibleIntervals, ConicEndsOnTheFrameBorder) {
  const auto cam = CameraParams::look_at({0, -40, 20}, {0, -6, 0}, 2500, {});
  const auto& circle = pitch().marking("Circle central");
  const auto intervals = visible_intervals(cam, circle);
  ASSERT_FALSE(intervals.empty());
  for (const auto& iv : intervals)
    for (double t : {iv.begin, iv.end}) {
      const Vec2 p = *project(cam, circle.point_at(t));
      const double border = std::min({std::abs(p.x()), std::abs(p.x() - cam.image_size.width), std::abs(p.y()),
                                      std::abs(p.y() - cam.image_size.height)});
      EXPECT_LT(border, 1e-6);
    }
}

TEST(Evaluator, PerfectPredictionScoresOne) {
  SyntheticScenario s;
  s.seed = 21;
  Evaluator ev;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const SyntheticFrame f = make_frame(s, i);
    ev.add_frame(f.camera, f.annotation);
  }
  const EvalReport r = ev.report(5.0);
  ASSERT_TRUE(r.acc_at_t);
  EXPECT_EQ(*r.acc_at_t, 1.0);
  EXPECT_EQ(r.completeness_ratio, 1.0);
  EXPECT_EQ(r.score, 1.0);
  EXPECT_EQ(r.total.fp + r.total.fn, 0);
}

TEST(Evaluator, AccuracyNonDecreasingInThreshold) {
  SyntheticScenario s;
  s.seed = 22;
  s.noise_sigma_px = 3.0;
  s.dropout_prob = 0.1;
  std::mt19937_64 jitter(5);
  Evaluator ev({2.0, 5.0, 10.0, 20.0});
  for (std::uint64_t i = 0; i < 30; ++i) {
    const SyntheticFrame f = make_frame(s, i);
    CameraParams guess = f.camera;
    guess.focal *= std::uniform_real_distribution<double>(0.98, 1.02)(jitter);
    ev.add_frame(guess, f.annotation);
  }
  double prev = -1.0;
  for (const auto& r : ev.reports()) {
    ASSERT_TRUE(r.acc_at_t);
    EXPECT_GE(*r.acc_at_t, prev);
    prev = *r.acc_at_t;
    EXPECT_NEAR(r.score, *r.acc_at_t * r.completeness_ratio, 1e-12);
  }
}

TEST(Evaluator, CompletenessCountsFramesWithoutCamera) {
  SyntheticScenario s;
  s.seed = 23;
  Evaluator ev;
  for (std::uint64_t i = 0; i < 4; ++i) {
    const SyntheticFrame f = make_frame(s, i);
    ev.add_frame(i == 3 ? std::nullopt : std::optional<CameraParams>(f.camera), f.annotation, &f.detections.keypoints,
                 &f.detections.keypoints);
  }
  const EvalReport r = ev.report(5.0);
  EXPECT_EQ(r.frames, 4);
  EXPECT_EQ(r.frames_with_camera, 3);
  EXPECT_DOUBLE_EQ(r.completeness_ratio, 0.75);
  EXPECT_DOUBLE_EQ(r.score, 0.75);
  ASSERT_TRUE(r.l2_px);
  EXPECT_EQ(*r.l2_px, 0.0);
  EXPECT_THROW(ev.report(7.0), Error);
}

TEST(Evaluator, MergeEqualsSequential) {
  SyntheticScenario s;
  s.seed = 24;
  s.noise_sigma_px = 2.0;
  Evaluator all, a, b;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const SyntheticFrame f = make_frame(s, i);
    all.add_frame(f.camera, f.annotation);
    (i % 2 ? a : b).add_frame(f.camera, f.annotation);
  }
  a.merge(b);
  for (double t : {5.0, 10.0, 20.0}) {
    EXPECT_EQ(a.report(t).total, all.report(t).total);
    EXPECT_EQ(a.report(t).per_class, all.report(t).per_class);
  }
}
