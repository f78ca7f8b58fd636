#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pitchcal/camera.hpp"
#include "pitchcal/keypoints.hpp"
#include "pitchcal/pitch_model.hpp"

namespace pitchcal {

enum class SubsetLabel { all, line_line_only, ground_ransac, ground_all };

inline constexpr std::array<SubsetLabel, 4> kSubsetOrder = {SubsetLabel::all, SubsetLabel::line_line_only,
                                                            SubsetLabel::ground_ransac, SubsetLabel::ground_all};

std::string_view subset_name(SubsetLabel label);

struct VoterConfig {
  double rmse_preference_px = 5.0;
  double ransac_tol_px = 5.0;
  int ransac_max_iterations = 500;
  std::uint64_t ransac_seed = 0x5eed;
  std::vector<double> confidence_thresholds = {0.5, 0.3, 0.1};  // strictly descending, in [0, 1]
  int min_keypoints_for_no_fusion = 7;
  PlausibilityBounds bounds;

  // Throws Error when thresholds are not strictly descending or tolerances are not positive.
  void validate() const;
};

struct SubsetCandidate {
  SubsetLabel label = SubsetLabel::all;
  std::vector<int> ids;
  std::optional<CameraParams> params;  // present only for plausible calibrations
  double rmse_px = 0.0;                // on the subset's own points
  std::string failure;                 // reason when params is absent
};

struct CalibrationOutcome {
  CameraParams params;
  SubsetLabel subset = SubsetLabel::all;
  double rmse_px = 0.0;
  std::vector<int> used_ids;
  double threshold = 0.0;
};

// Calibrates the four subsets of the keypoints with confidence >= threshold, in kSubsetOrder.
std::vector<SubsetCandidate> vote_candidates(const KeypointSet& keypoints, double threshold, const VoterConfig& config,
                                             ImageSize image_size, const PitchTemplate& pitch = standard_pitch());

// The all-points candidate when its RMSE is below the preference bound, else the lowest-RMSE candidate.
std::optional<CalibrationOutcome> select_candidate(const std::vector<SubsetCandidate>& candidates, double threshold,
                                                   const VoterConfig& config);

std::optional<CalibrationOutcome> vote(const KeypointSet& keypoints, double threshold, const VoterConfig& config,
                                       ImageSize image_size, const PitchTemplate& pitch = standard_pitch());

// vote() at each threshold from high to low; the first success wins.
std::optional<CalibrationOutcome> iterative_vote(const KeypointSet& keypoints, const VoterConfig& config,
                                                 ImageSize image_size, const PitchTemplate& pitch = standard_pitch());

// Adds line-line keypoints from intersecting observed lines when too few keypoints lie in the frame.
// Existing keypoints are never changed.
KeypointSet fuse_lines(const KeypointSet& keypoints, const std::vector<LineObservation>& lines,
                       const VoterConfig& config, ImageSize image_size, const PitchTemplate& pitch = standard_pitch());

// Fusion, then the iterative voter.
std::optional<CalibrationOutcome> calibrate_detections(const Detections& detections, const VoterConfig& config,
                                                       const PitchTemplate& pitch = standard_pitch());

}  // namespace pitchcal
