#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "pitchcal/errors.hpp"
#include "pitchcal/synthetic.hpp"
#include "pitchcal/voter.hpp"

using namespace pitchcal;

namespace {

const PitchTemplate& pitch() { return standard_pitch(); }

// Exact projections of every keypoint in front of the camera; in-frame ones only when asked.
KeypointSet exact_keypoints(const CameraParams& cam, bool in_frame_only, double confidence = 1.0) {
  KeypointSet out;
  for (const auto& def : pitch().keypoints()) {
    const auto p = project(cam, def.world);
    if (!p || (in_frame_only && !cam.image_size.contains(*p))) continue;
    out.insert({def.id, *p, confidence, KeypointSource::detector});
  }
  return out;
}

CameraParams full_view_camera() { return CameraParams::look_at({0, -75, 45}, {0, 0, 0}, 520, {}); }

SyntheticScenario scenario(int min_visible, std::uint64_t seed) {
  SyntheticScenario s;
  s.min_visible_keypoints = min_visible;
  s.seed = seed;
  return s;
}

// A ground line-line keypoint chosen by the rng, displaced by `magnitude` pixels.
KeypointSet with_outlier(KeypointSet kp, std::mt19937_64& rng, double magnitude) {
  std::vector<int> candidates;
  for (const auto& [id, k] : kp)
    if (pitch().keypoint(id).family == KeypointFamily::line_line && pitch().keypoint(id).on_ground())
      candidates.push_back(id);
  const int id = candidates[std::uniform_int_distribution<size_t>(0, candidates.size() - 1)(rng)];
  const double a = std::uniform_real_distribution<double>(0, 2 * 3.141592653589793)(rng);
  Keypoint k = *kp.find(id);
  k.position += magnitude * Vec2(std::cos(a), std::sin(a));
  kp.insert_or_assign(k);
  return kp;
}

const SubsetCandidate& candidate(const std::vector<SubsetCandidate>& cs, SubsetLabel label) {
  for (const auto& c : cs)
    if (c.label == label) return c;
  throw std::logic_error("missing candidate");
}

}  // namespace

TEST(Vote, NoiselessFullViewPrefersAllPoints) {
  const CameraParams cam = full_view_camera();
  const KeypointSet kp = exact_keypoints(cam, true);
  ASSERT_GE(kp.size(), 40u);
  const auto candidates = vote_candidates(kp, 0.5, VoterConfig{}, cam.image_size);
  ASSERT_EQ(candidates.size(), 4u);
  for (const auto& c : candidates) {
    ASSERT_TRUE(c.params.has_value()) << subset_name(c.label) << ": " << c.failure;
    EXPECT_LT(c.rmse_px, 1e-6);
    EXPECT_NEAR(c.params->focal, cam.focal, 1e-3 * cam.focal);
  }
  const auto outcome = vote(kp, 0.5, VoterConfig{}, cam.image_size);
  ASSERT_TRUE(outcome);
  EXPECT_EQ(outcome->subset, SubsetLabel::all);
  EXPECT_EQ(outcome->used_ids.size(), kp.size());
}

TEST(Vote, OutlierSelectsRansacSubset) {
  int checked = 0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const SyntheticFrame f = make_frame(scenario(12, 77), i);
    std::mt19937_64 rng(frame_seed(999, i));
    const KeypointSet kp = with_outlier(f.detections.keypoints, rng, 60.0);
    const auto candidates = vote_candidates(kp, 0.5, VoterConfig{}, f.camera.image_size);
    const auto outcome = select_candidate(candidates, 0.5, VoterConfig{});
    ASSERT_TRUE(outcome);
    EXPECT_EQ(outcome->subset, SubsetLabel::ground_ransac) << "frame " << i;
    const auto& all = candidate(candidates, SubsetLabel::all);
    if (all.params) EXPECT_LT(outcome->rmse_px, all.rmse_px);
    ++checked;
  }
  EXPECT_EQ(checked, 10);
}

TEST(Vote, ThreeKeypointsGiveNone) {
  const CameraParams cam = full_view_camera();
  KeypointSet kp;
  for (int id : {0, 1, 16}) kp.insert({id, *project(cam, pitch().keypoint(id).world)});
  EXPECT_FALSE(vote(kp, 0.5, VoterConfig{}, cam.image_size));
  EXPECT_FALSE(iterative_vote(kp, VoterConfig{}, cam.image_size));
}

TEST(Vote, ConfidenceFilterIsInclusive) {
  const CameraParams cam = full_view_camera();
  const KeypointSet kp = exact_keypoints(cam, true, 0.5);
  const auto outcome = vote(kp, 0.5, VoterConfig{}, cam.image_size);
  ASSERT_TRUE(outcome);
  EXPECT_EQ(outcome->used_ids.size(), kp.size());
  EXPECT_FALSE(vote(kp, 0.51, VoterConfig{}, cam.image_size));
}

TEST(Vote, AllPointsPreferredBelowBound) {
  // An 8 px outlier: RANSAC drops it and reaches a lower RMSE, yet the all-points RMSE stays below 5 px.
  const CameraParams cam = full_view_camera();
  KeypointSet kp = exact_keypoints(cam, true);
  Keypoint k = *kp.find(3);
  k.position += Vec2(8.0, 0.0);
  kp.insert_or_assign(k);
  const auto candidates = vote_candidates(kp, 0.5, VoterConfig{}, cam.image_size);
  const auto& all = candidate(candidates, SubsetLabel::all);
  const auto& ransac = candidate(candidates, SubsetLabel::ground_ransac);
  ASSERT_TRUE(all.params && ransac.params);
  ASSERT_LT(ransac.rmse_px, all.rmse_px);
  ASSERT_LT(all.rmse_px, 5.0);
  const auto outcome = select_candidate(candidates, 0.5, VoterConfig{});
  ASSERT_TRUE(outcome);
  EXPECT_EQ(outcome->subset, SubsetLabel::all);
}

TEST(Vote, MinimumRmseWhenAllPointsAboveBound) {
  std::vector<SubsetCandidate> cs(4);
  for (size_t i = 0; i < 4; ++i) {
    cs[i].label = kSubsetOrder[i];
    cs[i].params = full_view_camera();
  }
  cs[0].rmse_px = 7.0;
  cs[1].rmse_px = 6.0;
  cs[2].rmse_px = 2.0;
  cs[3].rmse_px = 3.0;
  EXPECT_EQ(select_candidate(cs, 0.5, VoterConfig{})->subset, SubsetLabel::ground_ransac);
  cs[0].rmse_px = 4.999;
  EXPECT_EQ(select_candidate(cs, 0.5, VoterConfig{})->subset, SubsetLabel::all);
  cs[0].rmse_px = 5.0;
  EXPECT_EQ(select_candidate(cs, 0.5, VoterConfig{})->subset, SubsetLabel::ground_ransac);
}

TEST(IterativeVote, ConfidenceOneMatchesHighestThreshold) {
  const SyntheticFrame f = make_frame(scenario(8, 5), 0);
  const auto a = iterative_vote(f.detections.keypoints, VoterConfig{}, f.camera.image_size);
  const auto b = vote(f.detections.keypoints, 0.5, VoterConfig{}, f.camera.image_size);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->threshold, 0.5);
  EXPECT_EQ(a->subset, b->subset);
  EXPECT_EQ(a->used_ids, b->used_ids);
  EXPECT_EQ(a->params.focal, b->params.focal);
}

TEST(IterativeVote, FallsBackToMidThreshold) {
  const CameraParams cam = full_view_camera();
  KeypointSet kp;
  int n = 0;
  for (const auto& [id, k] : exact_keypoints(cam, true)) {
    if (pitch().keypoint(id).family != KeypointFamily::line_line || n >= 11) continue;
    kp.insert({id, k.position, n < 3 ? 0.9 : 0.4, KeypointSource::detector});
    ++n;
  }
  ASSERT_EQ(kp.size(), 11u);
  const auto outcome = iterative_vote(kp, VoterConfig{}, cam.image_size);
  ASSERT_TRUE(outcome);
  EXPECT_EQ(outcome->threshold, 0.3);
  EXPECT_EQ(outcome->used_ids.size(), 11u);
  EXPECT_NEAR(outcome->params.focal, cam.focal, 1e-3 * cam.focal);
}

TEST(IterativeVote, EmptyGivesNone) { EXPECT_FALSE(iterative_vote(KeypointSet{}, VoterConfig{}, ImageSize{})); }

TEST(IterativeVote, LoweringLowestThresholdKeepsSuccess) {
  VoterConfig high;
  high.confidence_thresholds = {0.8, 0.6, 0.4};
  VoterConfig low = high;
  low.confidence_thresholds.back() = 0.05;
  SyntheticScenario s = scenario(6, 31);
  s.min_confidence = 0.0;
  s.max_confidence = 1.0;
  s.noise_sigma_px = 0.5;
  int successes = 0;
  for (std::uint64_t i = 0; i < 40; ++i) {
    const SyntheticFrame f = make_frame(s, i);
    const auto a = iterative_vote(f.detections.keypoints, high, f.camera.image_size);
    const auto b = iterative_vote(f.detections.keypoints, low, f.camera.image_size);
    for (const auto* o : {&a, &b}) {
      if (!*o) continue;
      EXPECT_TRUE(is_plausible((*o)->params));
      EXPECT_TRUE(std::isfinite((*o)->rmse_px));
    }
    if (a) {
      ++successes;
      EXPECT_TRUE(b) << "frame " << i;
    }
  }
  EXPECT_GT(successes, 10);
}

TEST(IterativeVote, Deterministic) {
  SyntheticScenario s = scenario(8, 12);
  s.noise_sigma_px = 1.0;
  s.outlier_prob = 0.1;
  s.outlier_magnitude_px = 40.0;
  for (std::uint64_t i = 0; i < 5; ++i) {
    const SyntheticFrame f = make_frame(s, i);
    const auto a = calibrate_detections(f.detections, VoterConfig{});
    const auto b = calibrate_detections(f.detections, VoterConfig{});
    ASSERT_EQ(a.has_value(), b.has_value());
    if (!a) continue;
    EXPECT_EQ(a->subset, b->subset);
    EXPECT_EQ(a->rmse_px, b->rmse_px);
    EXPECT_EQ(a->params.position, b->params.position);
  }
}

TEST(FuseLines, EnoughKeypointsShortCircuits) {
  const SyntheticFrame f = make_frame(scenario(10, 3), 0);
  ASSERT_GE(f.detections.keypoints.size(), 10u);
  EXPECT_EQ(fuse_lines(f.detections.keypoints, f.detections.lines, VoterConfig{}, f.camera.image_size),
            f.detections.keypoints);
}

TEST(FuseLines, IntersectionOutsideTheFrame) {
  // Narrow view next to the halfway line / top touchline junction, which falls left of the image.
  const KeypointDef& junction = pitch().keypoint(14);
  ASSERT_EQ(junction.family, KeypointFamily::line_line);
  const auto cam = CameraParams::look_at({-20, -45, 18}, {14, 18, 0}, 2600, {});
  const auto direct = project(cam, junction.world);
  ASSERT_TRUE(direct);
  ASSERT_LT(direct->x(), -100.0);
  std::mt19937_64 rng(1);
  const Detections det = render_detections(cam, SyntheticScenario{}, rng);
  ASSERT_LT(det.keypoints.size(), 7u);
  for (const auto& name : junction.classes)
    ASSERT_TRUE(std::any_of(det.lines.begin(), det.lines.end(),
                            [&](const LineObservation& l) { return l.class_name == name; }))
        << name;
  const KeypointSet fused = fuse_lines(det.keypoints, det.lines, VoterConfig{}, cam.image_size);
  const Keypoint* k = fused.find(junction.id);
  ASSERT_NE(k, nullptr);
  EXPECT_EQ(k->source, KeypointSource::line_fusion);
  EXPECT_LT(k->position.x(), 0.0);
  EXPECT_LT((k->position - *direct).norm(), 1e-6);
  for (const auto& [id, orig] : det.keypoints) EXPECT_EQ(fused.find(id)->position, orig.position);
}

TEST(FuseLines, DetectorKeypointWins) {
  const CameraParams cam = full_view_camera();
  const KeypointDef& corner = pitch().keypoint(0);
  LineObservation a{corner.classes[0], *project(cam, pitch().marking(corner.classes[0]).a),
                    *project(cam, pitch().marking(corner.classes[0]).b), 0.9};
  LineObservation b{corner.classes[1], *project(cam, pitch().marking(corner.classes[1]).a),
                    *project(cam, pitch().marking(corner.classes[1]).b), 0.7};
  KeypointSet kp;
  kp.insert({corner.id, Vec2(10, 10), 0.2, KeypointSource::detector});
  const KeypointSet fused = fuse_lines(kp, {a, b}, VoterConfig{}, cam.image_size);
  EXPECT_EQ(fused.find(corner.id)->position, Vec2(10, 10));
  EXPECT_EQ(fused.find(corner.id)->source, KeypointSource::detector);

  const KeypointSet fresh = fuse_lines(KeypointSet{}, {a, b}, VoterConfig{}, cam.image_size);
  ASSERT_TRUE(fresh.contains(corner.id));
  EXPECT_DOUBLE_EQ(fresh.find(corner.id)->confidence, 0.7);
  EXPECT_LT((fresh.find(corner.id)->position - *project(cam, corner.world)).norm(), 1e-6);
}

TEST(FuseLines, ParallelObservationsSkipped) {
  LineObservation a{"Side line top", {0, 100}, {900, 100}, 1.0};
  LineObservation b{"Side line left", {0, 200}, {900, 200}, 1.0};
  const KeypointSet fused = fuse_lines(KeypointSet{}, {a, b}, VoterConfig{}, ImageSize{});
  EXPECT_FALSE(fused.contains(0));
}

TEST(FuseLines, NeverRemovesOrModifies) {
  SyntheticScenario s = scenario(0, 8);
  s.keypoint_dropout_prob = 0.7;
  s.noise_sigma_px = 2.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const SyntheticFrame f = make_frame(s, i);
    const KeypointSet fused = fuse_lines(f.detections.keypoints, f.detections.lines, VoterConfig{}, f.camera.image_size);
    EXPECT_GE(fused.size(), f.detections.keypoints.size());
    for (const auto& [id, k] : f.detections.keypoints) {
      const Keypoint* g = fused.find(id);
      ASSERT_NE(g, nullptr);
      EXPECT_EQ(g->position, k.position);
      EXPECT_EQ(g->confidence, k.confidence);
      EXPECT_EQ(g->source, k.source);
    }
  }
}

TEST(VoterConfig, Validation) {
  VoterConfig c;
  EXPECT_NO_THROW(c.validate());
  c.confidence_thresholds = {0.3, 0.5, 0.1};
  EXPECT_THROW(c.validate(), Error);
  c.confidence_thresholds = {0.5, 0.5};
  EXPECT_THROW(c.validate(), Error);
  c.confidence_thresholds = {1.2, 0.5};
  EXPECT_THROW(c.validate(), Error);
  c = VoterConfig{};
  c.rmse_preference_px = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = VoterConfig{};
  c.ransac_tol_px = -1.0;
  EXPECT_THROW(c.validate(), Error);
}
