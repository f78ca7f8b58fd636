#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pitchcal/camera.hpp"
#include "pitchcal/keypoints.hpp"
#include "pitchcal/pitch_model.hpp"

namespace pitchcal {

struct CameraRanges {
  double max_abs_x_m = 60.0;
  double min_abs_y_m = 25.0;  // |y| in [min_abs_y_m, max_abs_y_m], either side of the pitch
  double max_abs_y_m = 55.0;
  double min_z_m = 8.0;
  double max_z_m = 40.0;
  double min_focal_px = 800.0;
  double max_focal_px = 6000.0;
  // The look-at target is drawn on the pitch rectangle shrunk by this margin on each side.
  double target_margin_m = 0.0;
  double max_roll_rad = 0.0;
};

struct SyntheticScenario {
  CameraRanges camera;
  ImageSize image_size;
  double noise_sigma_px = 0.0;
  double dropout_prob = 0.0;  // per class, unless overridden
  std::map<std::string, double> class_dropout_prob;
  double outlier_prob = 0.0;  // per point
  double outlier_magnitude_px = 0.0;
  // Detector emulation.
  double keypoint_dropout_prob = 0.0;
  double min_confidence = 1.0;
  double max_confidence = 1.0;
  // Cameras are redrawn until at least this many keypoints project into the frame, including
  // four ground keypoints in general position (0 disables the check).
  int min_visible_keypoints = 0;
  std::uint64_t seed = 1;

  // Throws Error on invalid ranges or probabilities.
  void validate() const;
};

// Derived per-frame seed; frames of a batch are reproducible independently of processing order.
std::uint64_t frame_seed(std::uint64_t base_seed, std::uint64_t frame_index);

CameraParams sample_camera(const SyntheticScenario& scenario, std::mt19937_64& rng,
                           const PitchTemplate& pitch = standard_pitch());

// Ids of keypoints that project inside the frame.
std::vector<int> visible_keypoint_ids(const CameraParams& params, const PitchTemplate& pitch = standard_pitch());

Annotation render_annotation(const CameraParams& params, const SyntheticScenario& scenario, std::mt19937_64& rng,
                             const PitchTemplate& pitch = standard_pitch());

Detections render_detections(const CameraParams& params, const SyntheticScenario& scenario, std::mt19937_64& rng,
                             const PitchTemplate& pitch = standard_pitch());

struct SyntheticFrame {
  CameraParams camera;
  Annotation annotation;
  Detections detections;
};

// Camera, annotation and detections for frame `index`, each from its own derived stream.
SyntheticFrame make_frame(const SyntheticScenario& scenario, std::uint64_t index,
                          const PitchTemplate& pitch = standard_pitch());

}  // namespace pitchcal
