#include "pitchcal/voter.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pitchcal/errors.hpp"
#include "pitchcal/geometry.hpp"

namespace pitchcal {

namespace {

SubsetCandidate calibrate_subset(SubsetLabel label, std::vector<Correspondence> corr, const VoterConfig& config,
                                 ImageSize image_size) {
  SubsetCandidate c;
  c.label = label;
  for (const auto& x : corr) c.ids.push_back(x.id);
  if (corr.size() < 4) {
    c.failure = "fewer than 4 points";
    return c;
  }
  try {
    const CameraParams params = calibrate(corr, image_size);
    const double rmse = reprojection_rmse(params, corr);
    if (!std::isfinite(rmse)) {
      c.failure = "points behind the camera";
    } else if (!is_plausible(params, config.bounds)) {
      c.failure = "implausible camera";
    } else {
      c.params = params;
      c.rmse_px = rmse;
    }
  } catch (const Error& e) {
    c.failure = e.what();
  }
  return c;
}

}  // namespace

std::string_view subset_name(SubsetLabel label) {
  switch (label) {
    case SubsetLabel::all: return "all";
    case SubsetLabel::line_line_only: return "line_line_only";
    case SubsetLabel::ground_ransac: return "ground_ransac";
    case SubsetLabel::ground_all: return "ground_all";
  }
  return "unknown";
}

void VoterConfig::validate() const {
  if (!(rmse_preference_px > 0) || !(ransac_tol_px > 0)) throw Error("voter tolerances must be positive");
  if (ransac_max_iterations <= 0) throw Error("RANSAC iteration budget must be positive");
  if (confidence_thresholds.empty()) throw Error("at least one confidence threshold is required");
  for (size_t i = 0; i < confidence_thresholds.size(); ++i) {
    const double t = confidence_thresholds[i];
    if (!(t >= 0.0 && t <= 1.0)) throw Error("confidence thresholds must lie in [0, 1]");
    if (i > 0 && !(t < confidence_thresholds[i - 1])) throw Error("confidence thresholds must be strictly descending");
  }
  if (min_keypoints_for_no_fusion < 0) throw Error("min_keypoints_for_no_fusion must be non-negative");
}

std::vector<SubsetCandidate> vote_candidates(const KeypointSet& keypoints, double threshold, const VoterConfig& config,
                                             ImageSize image_size, const PitchTemplate& pitch) {
  config.validate();
  std::vector<Correspondence> all, line_line, ground;
  for (const auto& c : to_correspondences(keypoints, pitch)) {
    if (!(c.confidence >= threshold)) continue;
    all.push_back(c);
    if (pitch.keypoint(c.id).family == KeypointFamily::line_line) line_line.push_back(c);
    if (c.world.z() == 0.0) ground.push_back(c);
  }

  std::vector<Correspondence> ransac;
  if (ground.size() >= 4) {
    std::vector<PointPair> pairs;
    for (const auto& c : ground) pairs.push_back({c.world.head<2>(), c.image});
    try {
      RansacOptions opt;
      opt.tolerance_px = config.ransac_tol_px;
      opt.max_iterations = config.ransac_max_iterations;
      opt.seed = config.ransac_seed;
      for (size_t i : ransac_homography_filter(pairs, opt).inliers) ransac.push_back(ground[i]);
    } catch (const Error&) {
      ransac.clear();
    }
  }

  // Identical subsets share one calibration.
  std::map<std::vector<int>, SubsetCandidate> cache;
  std::vector<SubsetCandidate> out;
  for (SubsetLabel label : kSubsetOrder) {
    const std::vector<Correspondence>& corr = label == SubsetLabel::all              ? all
                                              : label == SubsetLabel::line_line_only ? line_line
                                              : label == SubsetLabel::ground_ransac  ? ransac
                                                                                     : ground;
    std::vector<int> ids;
    for (const auto& c : corr) ids.push_back(c.id);
    auto it = cache.find(ids);
    if (it == cache.end()) it = cache.emplace(ids, calibrate_subset(label, corr, config, image_size)).first;
    SubsetCandidate c = it->second;
    c.label = label;
    out.push_back(std::move(c));
  }
  return out;
}

std::optional<CalibrationOutcome> select_candidate(const std::vector<SubsetCandidate>& candidates, double threshold,
                                                   const VoterConfig& config) {
  const SubsetCandidate* best = nullptr;
  for (const auto& c : candidates) {
    if (!c.params) continue;
    if (c.label == SubsetLabel::all && c.rmse_px < config.rmse_preference_px) {
      best = &c;
      break;
    }
    if (best == nullptr || c.rmse_px < best->rmse_px) best = &c;
  }
  if (best == nullptr) return std::nullopt;
  return CalibrationOutcome{*best->params, best->label, best->rmse_px, best->ids, threshold};
}

std::optional<CalibrationOutcome> vote(const KeypointSet& keypoints, double threshold, const VoterConfig& config,
                                       ImageSize image_size, const PitchTemplate& pitch) {
  return select_candidate(vote_candidates(keypoints, threshold, config, image_size, pitch), threshold, config);
}

std::optional<CalibrationOutcome> iterative_vote(const KeypointSet& keypoints, const VoterConfig& config,
                                                 ImageSize image_size, const PitchTemplate& pitch) {
  config.validate();
  for (double t : config.confidence_thresholds)
    if (auto outcome = vote(keypoints, t, config, image_size, pitch)) return outcome;
  return std::nullopt;
}

KeypointSet fuse_lines(const KeypointSet& keypoints, const std::vector<LineObservation>& lines,
                       const VoterConfig& config, ImageSize image_size, const PitchTemplate& pitch) {
  const auto in_frame = std::count_if(keypoints.begin(), keypoints.end(),
                                      [&](const auto& kv) { return image_size.contains(kv.second.position); });
  if (in_frame >= config.min_keypoints_for_no_fusion) return keypoints;

  // One observation per class: the most confident, first on ties.
  std::map<std::string, const LineObservation*> by_class;
  for (const auto& l : lines) {
    if (pitch.find_marking(l.class_name) == nullptr) continue;
    if (!((l.p2 - l.p1).norm() > 1e-9) || !l.p1.allFinite() || !l.p2.allFinite()) continue;
    auto& slot = by_class[l.class_name];
    if (slot == nullptr || l.confidence > slot->confidence) slot = &l;
  }

  KeypointSet out = keypoints;
  for (const auto& def : pitch.keypoints()) {
    if (def.family != KeypointFamily::line_line || out.contains(def.id)) continue;
    const auto a = by_class.find(def.classes[0]);
    const auto b = by_class.find(def.classes[1]);
    if (a == by_class.end() || b == by_class.end()) continue;
    try {
      const Vec2 p = intersect_lines(Line2::through(a->second->p1, a->second->p2),
                                     Line2::through(b->second->p1, b->second->p2), 1e-6);
      const double conf = std::clamp(std::min(a->second->confidence, b->second->confidence), 0.0, 1.0);
      if (p.allFinite()) out.insert({def.id, p, conf, KeypointSource::line_fusion});
    } catch (const Error&) {
      // Near-parallel observations: the id is skipped.
    }
  }
  return out;
}

std::optional<CalibrationOutcome> calibrate_detections(const Detections& detections, const VoterConfig& config,
                                                       const PitchTemplate& pitch) {
  const KeypointSet fused = fuse_lines(detections.keypoints, detections.lines, config, detections.image_size, pitch);
  return iterative_vote(fused, config, detections.image_size, pitch);
}

}  // namespace pitchcal
