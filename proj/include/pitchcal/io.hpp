#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pitchcal/camera.hpp"
#include "pitchcal/evaluation.hpp"
#include "pitchcal/keypoints.hpp"
#include "pitchcal/pitch_model.hpp"
#include "pitchcal/synthetic.hpp"
#include "pitchcal/voter.hpp"

namespace pitchcal {

using Json = nlohmann::json;

// Everything a run can be configured with. Absent keys in a config file keep these defaults.
struct PipelineConfig {
  VoterConfig voter;
  SyntheticScenario scenario;
  PitchDimensions pitch;
  DeriveOptions derive;
  std::vector<double> thresholds = {5.0, 10.0, 20.0};
  ImageSize image_size;
  int synth_frames = 100;

  PipelineConfig() { scenario.min_visible_keypoints = 8; }

  // Throws Error when any section is inconsistent.
  void validate() const;
};

Json read_json(const std::filesystem::path& path);
// Writes the document with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& document);
void write_text(const std::filesystem::path& path, const std::string& text);

// Annotation files hold normalized [0, 1] coordinates per class and may embed "image_size": [w, h],
// which takes precedence over `image_size`. Unknown classes are dropped and out-of-range points kept,
// each with a warning.
Annotation annotation_from_json(const Json& document, ImageSize image_size, std::vector<std::string>* warnings = nullptr,
                                const PitchTemplate& pitch = standard_pitch());
Annotation read_annotation(const std::filesystem::path& path, ImageSize image_size = {},
                           std::vector<std::string>* warnings = nullptr, const PitchTemplate& pitch = standard_pitch());
Json annotation_to_json(const Annotation& annotation);
void write_annotation(const std::filesystem::path& path, const Annotation& annotation);

// Detector-input files hold pixel coordinates.
Detections detections_from_json(const Json& document, ImageSize image_size, std::vector<std::string>* warnings = nullptr,
                                const PitchTemplate& pitch = standard_pitch());
Detections read_detections(const std::filesystem::path& path, ImageSize image_size = {},
                           std::vector<std::string>* warnings = nullptr, const PitchTemplate& pitch = standard_pitch());
Json detections_to_json(const Detections& detections);
void write_detections(const std::filesystem::path& path, const Detections& detections);

Json camera_to_json(const CameraParams& params, double rmse_px);
// Throws IoError when a field is missing or the rotation is not orthonormal.
CameraParams camera_from_json(const Json& document);

Json report_to_json(const std::vector<EvalReport>& reports);

Json config_to_json(const PipelineConfig& config);
// Unknown keys are rejected so that typos do not silently fall back to defaults.
PipelineConfig config_from_json(const Json& document);
PipelineConfig read_config(const std::filesystem::path& path);

}  // namespace pitchcal
