#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pitchcal/evaluation.hpp"
#include "pitchcal/io.hpp"
#include "pitchcal/keypoints.hpp"
#include "pitchcal/synthetic.hpp"
#include "pitchcal/voter.hpp"

namespace pitchcal {

// Frame-level kernels come in two flavors with identical results: a plain loop (the reference) and an
// OpenMP frame-parallel loop.
enum class Execution { serial, parallel };

struct FrameResult {
  std::optional<CalibrationOutcome> outcome;
  std::string error;  // set when the frame threw; outcome is then absent
};

std::vector<FrameResult> calibrate_frames(const std::vector<Detections>& frames, const VoterConfig& config,
                                          const PitchTemplate& pitch, Execution execution, int jobs = 0);

std::vector<KeypointSet> derive_frames(const std::vector<Annotation>& frames, const DeriveOptions& options,
                                       const PitchTemplate& pitch, Execution execution, int jobs = 0);

std::vector<SyntheticFrame> synthesize_frames(const SyntheticScenario& scenario, int count, const PitchTemplate& pitch,
                                              Execution execution, int jobs = 0);

// Per-frame evaluation, merged in frame order so that the floating-point sums do not depend on scheduling.
Evaluator evaluate_frames(const std::vector<std::optional<CameraParams>>& cameras,
                          const std::vector<Annotation>& annotations, const std::vector<double>& thresholds,
                          const PitchTemplate& pitch, Execution execution, int jobs = 0);

enum class RunMode { derive, calibrate, evaluate, synth, tune };

std::string_view mode_name(RunMode mode);

struct RunManifest {
  std::filesystem::path input_dir;   // unused by synth
  std::filesystem::path output_dir;
  RunMode mode = RunMode::calibrate;
  PipelineConfig config;
  int jobs = 0;  // 0: OpenMP default, 1: serial reference
  std::optional<std::uint64_t> seed;  // overrides the synthetic and RANSAC seeds

  // Throws Error when a mode-specific field is missing.
  void validate() const;
};

struct FrameRecord {
  std::string name;
  std::string status;  // "ok", "no_output" or "error"
  std::string message;
  std::optional<CalibrationOutcome> outcome;
};

struct BatchSummary {
  RunMode mode = RunMode::calibrate;
  std::vector<FrameRecord> records;
  std::vector<EvalReport> reports;  // present when ground truth was available
  std::optional<std::vector<double>> tuned_thresholds;
};

// Runs one mode over a directory. Per-frame failures become error records; unreadable inputs or
// unwritable outputs throw IoError.
//
// Directory layout: frames are grouped by the file-name stem before the first '.';
//   <stem>.annotation.json (or <stem>.json)  ground-truth annotation
//   <stem>.detections.json                  detector output
//   <stem>.camera.json                      calibration result (written by calibrate, read by evaluate)
//   <stem>.keypoints.json                   derived keypoints (written by derive)
//   <stem>.gt_camera.json                   synthetic ground-truth camera
//   <stem>.overlay.svg                      rendered template over the frame
// plus summary.json, and report.json when annotations were present.
BatchSummary run_batch(const RunManifest& manifest);

}  // namespace pitchcal
