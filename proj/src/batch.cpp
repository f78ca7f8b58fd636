#include "pitchcal/batch.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <exception>
#include <map>
#include <set>

#include "pitchcal/errors.hpp"
#include "pitchcal/overlay.hpp"

namespace pitchcal {

namespace fs = std::filesystem;

namespace {

// Runs f(i) for every frame. Exceptions are captured per frame and the lowest-index one is rethrown,
// so both flavors fail identically.
template <class F>
void for_frames(int n, Execution execution, int jobs, F&& f) {
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
  const auto guarded = [&](int i) {
    try {
      f(i);
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  };
  if (execution == Execution::serial) {
    for (int i = 0; i < n; ++i) guarded(i);
  } else {
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < n; ++i) guarded(i);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Execution execution_for(int jobs) { return jobs == 1 ? Execution::serial : Execution::parallel; }

const std::set<std::string> kReservedStems = {"summary", "report", "tuned_config", "config"};

struct FrameFiles {
  std::optional<fs::path> annotation;
  std::optional<fs::path> detections;
  std::optional<fs::path> camera;
};

std::map<std::string, FrameFiles> scan_input(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("input directory not readable: " + dir.string());
  std::map<std::string, FrameFiles> frames;
  fs::directory_iterator it(dir, ec);
  if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
  for (const auto& entry : it) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const auto dot = name.find('.');
    if (dot == std::string::npos || dot == 0) continue;
    const std::string stem = name.substr(0, dot);
    const std::string suffix = name.substr(dot);
    if (kReservedStems.count(stem)) continue;
    if (suffix == ".annotation.json" || suffix == ".json") {
      frames[stem].annotation = entry.path();
    } else if (suffix == ".detections.json") {
      frames[stem].detections = entry.path();
    } else if (suffix == ".camera.json") {
      frames[stem].camera = entry.path();
    }
  }
  return frames;
}

void ensure_output(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("output directory not writable: " + dir.string());
}

Json record_to_json(const FrameRecord& r) {
  Json j = {{"frame", r.name}, {"status", r.status}};
  if (!r.message.empty()) j["message"] = r.message;
  if (r.outcome) {
    j["subset"] = std::string(subset_name(r.outcome->subset));
    j["rmse_px"] = r.outcome->rmse_px;
    j["threshold"] = r.outcome->threshold;
    j["used_ids"] = r.outcome->used_ids;
  }
  return j;
}

void write_summary(const fs::path& dir, const BatchSummary& s) {
  int ok = 0, none = 0, err = 0;
  Json records = Json::array();
  for (const auto& r : s.records) {
    ok += r.status == "ok";
    none += r.status == "no_output";
    err += r.status == "error";
    records.push_back(record_to_json(r));
  }
  Json doc = {{"mode", std::string(mode_name(s.mode))},
              {"frames", s.records.size()},
              {"ok", ok},
              {"no_output", none},
              {"errors", err},
              {"records", records}};
  if (s.tuned_thresholds) doc["tuned_thresholds"] = *s.tuned_thresholds;
  write_json(dir / "summary.json", doc);
}

std::string frame_label(std::uint64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05llu", static_cast<unsigned long long>(i));
  return buf;
}

// Loaded inputs of the frames that have an annotation and/or detections.
struct LoadedFrames {
  std::vector<std::string> names;
  std::vector<std::optional<Annotation>> annotations;
  std::vector<std::optional<Detections>> detections;
  std::vector<std::string> errors;  // empty when the frame loaded
};

LoadedFrames load_frames(const std::map<std::string, FrameFiles>& files, ImageSize image_size,
                         const PitchTemplate& pitch, bool want_detections) {
  LoadedFrames out;
  for (const auto& [name, f] : files) {
    if (!f.annotation && !(want_detections && f.detections)) continue;
    out.names.push_back(name);
    out.annotations.emplace_back();
    out.detections.emplace_back();
    out.errors.emplace_back();
    try {
      if (f.annotation) out.annotations.back() = read_annotation(*f.annotation, image_size, nullptr, pitch);
      if (want_detections && f.detections)
        out.detections.back() = read_detections(*f.detections, image_size, nullptr, pitch);
    } catch (const Error& e) {
      out.errors.back() = e.what();
    }
  }
  return out;
}

// derive_frames with per-frame isolation: a failing frame yields its error message instead.
std::vector<std::pair<std::optional<KeypointSet>, std::string>> derive_isolated(const std::vector<Annotation>& anns,
                                                                                const DeriveOptions& options,
                                                                                const PitchTemplate& pitch,
                                                                                Execution execution, int jobs) {
  std::vector<std::pair<std::optional<KeypointSet>, std::string>> out(anns.size());
  for_frames(static_cast<int>(anns.size()), execution, jobs, [&](int i) {
    auto& r = out[static_cast<size_t>(i)];
    try {
      r.first = derive_keypoints(anns[static_cast<size_t>(i)], options, pitch);
    } catch (const std::exception& e) {
      r.second = e.what();
    }
  });
  return out;
}

bool any_annotation(const LoadedFrames& frames) {
  return std::any_of(frames.annotations.begin(), frames.annotations.end(), [](const auto& a) { return a.has_value(); });
}

// Evaluation inputs: frames with a readable annotation take part; load failures count as frames without output.
std::vector<EvalReport> evaluate_loaded(const LoadedFrames& frames,
                                        const std::vector<std::optional<CameraParams>>& cameras,
                                        const PipelineConfig& config, const PitchTemplate& pitch,
                                        Execution execution, int jobs) {
  std::vector<std::optional<CameraParams>> cams;
  std::vector<Annotation> anns;
  for (size_t i = 0; i < frames.names.size(); ++i) {
    if (frames.annotations[i]) {
      cams.push_back(cameras[i]);
      anns.push_back(*frames.annotations[i]);
    } else if (!frames.errors[i].empty()) {
      cams.emplace_back();
      anns.emplace_back();
    }
  }
  return evaluate_frames(cams, anns, config.thresholds, pitch, execution, jobs).reports();
}

// Detector input for calibration: the detections file, else keypoints derived from the annotation.
std::vector<std::optional<Detections>> calibration_inputs(const LoadedFrames& frames, const PipelineConfig& config,
                                                          const PitchTemplate& pitch, Execution execution, int jobs) {
  std::vector<std::optional<Detections>> inputs(frames.names.size());
  std::vector<size_t> to_derive;
  std::vector<Annotation> anns;
  for (size_t i = 0; i < frames.names.size(); ++i) {
    if (!frames.errors[i].empty()) continue;
    if (frames.detections[i]) {
      inputs[i] = frames.detections[i];
    } else if (frames.annotations[i]) {
      to_derive.push_back(i);
      anns.push_back(*frames.annotations[i]);
    }
  }
  const auto derived = derive_isolated(anns, config.derive, pitch, execution, jobs);
  for (size_t k = 0; k < to_derive.size(); ++k) {
    if (!derived[k].first) continue;
    Detections d;
    d.image_size = anns[k].image_size;
    d.keypoints = *derived[k].first;
    inputs[to_derive[k]] = std::move(d);
  }
  return inputs;
}

BatchSummary run_synth(const RunManifest& m, const PipelineConfig& config, const PitchTemplate& pitch) {
  BatchSummary s;
  s.mode = m.mode;
  const auto frames = synthesize_frames(config.scenario, config.synth_frames, pitch, execution_for(m.jobs), m.jobs);
  for (size_t i = 0; i < frames.size(); ++i) {
    const std::string name = frame_label(i);
    write_annotation(m.output_dir / (name + ".annotation.json"), frames[i].annotation);
    write_detections(m.output_dir / (name + ".detections.json"), frames[i].detections);
    write_json(m.output_dir / (name + ".gt_camera.json"), camera_to_json(frames[i].camera, 0.0));
    s.records.push_back({name, "ok", "", std::nullopt});
  }
  return s;
}

BatchSummary run_derive(const RunManifest& m, const PipelineConfig& config, const PitchTemplate& pitch) {
  BatchSummary s;
  s.mode = m.mode;
  const LoadedFrames frames = load_frames(scan_input(m.input_dir), config.image_size, pitch, false);
  std::vector<size_t> idx;
  std::vector<Annotation> anns;
  for (size_t i = 0; i < frames.names.size(); ++i) {
    if (frames.errors[i].empty()) {
      idx.push_back(i);
      anns.push_back(*frames.annotations[i]);
    }
  }
  const auto derived = derive_isolated(anns, config.derive, pitch, execution_for(m.jobs), m.jobs);
  std::vector<std::optional<KeypointSet>> by_frame(frames.names.size());
  std::vector<std::string> errors = frames.errors;
  for (size_t k = 0; k < idx.size(); ++k) {
    by_frame[idx[k]] = derived[k].first;
    errors[idx[k]] = derived[k].second;
  }

  for (size_t i = 0; i < frames.names.size(); ++i) {
    const std::string& name = frames.names[i];
    if (!by_frame[i]) {
      s.records.push_back({name, "error", errors[i], std::nullopt});
      continue;
    }
    Detections d;
    d.image_size = frames.annotations[i]->image_size;
    d.keypoints = *by_frame[i];
    write_detections(m.output_dir / (name + ".keypoints.json"), d);
    s.records.push_back({name, d.keypoints.empty() ? "no_output" : "ok", "", std::nullopt});
  }
  return s;
}

BatchSummary run_calibrate(const RunManifest& m, const PipelineConfig& config, const PitchTemplate& pitch) {
  BatchSummary s;
  s.mode = m.mode;
  const Execution execution = execution_for(m.jobs);
  const LoadedFrames frames = load_frames(scan_input(m.input_dir), config.image_size, pitch, true);
  const auto inputs = calibration_inputs(frames, config, pitch, execution, m.jobs);

  std::vector<size_t> idx;
  std::vector<Detections> dets;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i]) {
      idx.push_back(i);
      dets.push_back(*inputs[i]);
    }
  }
  const auto results = calibrate_frames(dets, config.voter, pitch, execution, m.jobs);
  std::vector<std::optional<FrameResult>> by_frame(frames.names.size());
  for (size_t k = 0; k < idx.size(); ++k) by_frame[idx[k]] = results[k];

  std::vector<std::optional<CameraParams>> cameras(frames.names.size());
  for (size_t i = 0; i < frames.names.size(); ++i) {
    const std::string& name = frames.names[i];
    const fs::path camera_path = m.output_dir / (name + ".camera.json");
    if (!by_frame[i] || !by_frame[i]->error.empty()) {
      const std::string msg = by_frame[i] ? by_frame[i]->error : frames.errors[i];
      write_json(camera_path, {{"no_output", true}, {"reason", msg}});
      s.records.push_back({name, "error", msg, std::nullopt});
      continue;
    }
    const auto& outcome = by_frame[i]->outcome;
    if (!outcome) {
      write_json(camera_path, {{"no_output", true}, {"reason", "no plausible calibration"}});
      s.records.push_back({name, "no_output", "no plausible calibration", std::nullopt});
      continue;
    }
    cameras[i] = outcome->params;
    write_json(camera_path, camera_to_json(outcome->params, outcome->rmse_px));
    OverlayOptions overlay;
    overlay.keypoints = &inputs[i]->keypoints;
    write_text(m.output_dir / (name + ".overlay.svg"), render_overlay(outcome->params, pitch, overlay));
    s.records.push_back({name, "ok", "", outcome});
  }
  if (any_annotation(frames)) s.reports = evaluate_loaded(frames, cameras, config, pitch, execution, m.jobs);
  return s;
}

BatchSummary run_evaluate(const RunManifest& m, const PipelineConfig& config, const PitchTemplate& pitch) {
  BatchSummary s;
  s.mode = m.mode;
  const auto files = scan_input(m.input_dir);
  const LoadedFrames frames = load_frames(files, config.image_size, pitch, false);
  if (!any_annotation(frames)) throw IoError("evaluate mode needs annotation files in " + m.input_dir.string());

  std::vector<std::optional<CameraParams>> cameras(frames.names.size());
  for (size_t i = 0; i < frames.names.size(); ++i) {
    const std::string& name = frames.names[i];
    if (!frames.errors[i].empty()) {
      s.records.push_back({name, "error", frames.errors[i], std::nullopt});
      continue;
    }
    const auto& cam_path = files.at(name).camera;
    if (!cam_path) {
      s.records.push_back({name, "no_output", "no camera file", std::nullopt});
      continue;
    }
    try {
      const Json doc = read_json(*cam_path);
      if (doc.is_object() && doc.value("no_output", false)) {
        s.records.push_back({name, "no_output", doc.value("reason", std::string()), std::nullopt});
        continue;
      }
      cameras[i] = camera_from_json(doc);
      s.records.push_back({name, "ok", "", std::nullopt});
    } catch (const Error& e) {
      s.records.push_back({name, "error", e.what(), std::nullopt});
    }
  }
  s.reports = evaluate_loaded(frames, cameras, config, pitch, execution_for(m.jobs), m.jobs);
  return s;
}

// Grid search over strictly descending threshold triples. A vote at each grid value is computed once per
// frame; the iterative voter for a triple is then the first success in that triple's order.
BatchSummary run_tune(const RunManifest& m, const PipelineConfig& config, const PitchTemplate& pitch) {
  static const std::vector<double> kGrid = {0.9, 0.7, 0.5, 0.3, 0.1};
  BatchSummary s;
  s.mode = m.mode;
  const Execution execution = execution_for(m.jobs);
  const LoadedFrames frames = load_frames(scan_input(m.input_dir), config.image_size, pitch, true);
  if (!any_annotation(frames)) throw IoError("tune mode needs annotation files in " + m.input_dir.string());
  const auto inputs = calibration_inputs(frames, config, pitch, execution, m.jobs);

  const int n = static_cast<int>(frames.names.size());
  std::vector<std::vector<std::optional<CalibrationOutcome>>> votes(static_cast<size_t>(n));
  for_frames(n, execution, m.jobs, [&](int i) {
    auto& row = votes[static_cast<size_t>(i)];
    row.resize(kGrid.size());
    const auto& in = inputs[static_cast<size_t>(i)];
    if (!in) return;
    try {
      const KeypointSet fused = fuse_lines(in->keypoints, in->lines, config.voter, in->image_size, pitch);
      for (size_t g = 0; g < kGrid.size(); ++g) row[g] = vote(fused, kGrid[g], config.voter, in->image_size, pitch);
    } catch (const Error&) {
      // Counts as no output at every threshold.
    }
  });

  double best_score = -1.0;
  std::vector<size_t> best;
  std::vector<EvalReport> best_reports;
  for (size_t a = 0; a < kGrid.size(); ++a)
    for (size_t b = a + 1; b < kGrid.size(); ++b)
      for (size_t c = b + 1; c < kGrid.size(); ++c) {
        std::vector<std::optional<CameraParams>> cameras(static_cast<size_t>(n));
        for (size_t i = 0; i < cameras.size(); ++i)
          for (size_t g : {a, b, c})
            if (votes[i][g]) {
              cameras[i] = votes[i][g]->params;
              break;
            }
        auto reports = evaluate_loaded(frames, cameras, config, pitch, execution, m.jobs);
        if (reports.front().score > best_score) {
          best_score = reports.front().score;
          best = {a, b, c};
          best_reports = std::move(reports);
        }
      }

  PipelineConfig tuned = config;
  tuned.voter.confidence_thresholds = {kGrid[best[0]], kGrid[best[1]], kGrid[best[2]]};
  write_json(m.output_dir / "tuned_config.json", config_to_json(tuned));
  s.tuned_thresholds = tuned.voter.confidence_thresholds;
  s.reports = std::move(best_reports);
  for (size_t i = 0; i < frames.names.size(); ++i) {
    std::optional<CalibrationOutcome> chosen;
    for (size_t g : best)
      if (votes[i][g]) {
        chosen = votes[i][g];
        break;
      }
    if (!frames.errors[i].empty())
      s.records.push_back({frames.names[i], "error", frames.errors[i], std::nullopt});
    else
      s.records.push_back({frames.names[i], chosen ? "ok" : "no_output", "", chosen});
  }
  return s;
}

}  // namespace

std::vector<FrameResult> calibrate_frames(const std::vector<Detections>& frames, const VoterConfig& config,
                                          const PitchTemplate& pitch, Execution execution, int jobs) {
  config.validate();
  std::vector<FrameResult> out(frames.size());
  for_frames(static_cast<int>(frames.size()), execution, jobs, [&](int i) {
    auto& r = out[static_cast<size_t>(i)];
    try {
      r.outcome = calibrate_detections(frames[static_cast<size_t>(i)], config, pitch);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });
  return out;
}

std::vector<KeypointSet> derive_frames(const std::vector<Annotation>& frames, const DeriveOptions& options,
                                       const PitchTemplate& pitch, Execution execution, int jobs) {
  std::vector<KeypointSet> out(frames.size());
  for_frames(static_cast<int>(frames.size()), execution, jobs, [&](int i) {
    out[static_cast<size_t>(i)] = derive_keypoints(frames[static_cast<size_t>(i)], options, pitch);
  });
  return out;
}

std::vector<SyntheticFrame> synthesize_frames(const SyntheticScenario& scenario, int count, const PitchTemplate& pitch,
                                              Execution execution, int jobs) {
  scenario.validate();
  if (count < 0) throw Error("frame count must be non-negative");
  std::vector<SyntheticFrame> out(static_cast<size_t>(count));
  for_frames(count, execution, jobs, [&](int i) {
    out[static_cast<size_t>(i)] = make_frame(scenario, static_cast<std::uint64_t>(i), pitch);
  });
  return out;
}

Evaluator evaluate_frames(const std::vector<std::optional<CameraParams>>& cameras,
                          const std::vector<Annotation>& annotations, const std::vector<double>& thresholds,
                          const PitchTemplate& pitch, Execution execution, int jobs) {
  if (cameras.size() != annotations.size()) throw Error("camera and annotation counts differ");
  std::vector<Evaluator> per_frame(cameras.size(), Evaluator(thresholds, kPredictionStepM, pitch));
  for_frames(static_cast<int>(cameras.size()), execution, jobs, [&](int i) {
    const auto k = static_cast<size_t>(i);
    per_frame[k].add_frame(cameras[k], annotations[k]);
  });
  Evaluator total(thresholds, kPredictionStepM, pitch);
  for (const auto& e : per_frame) total.merge(e);
  return total;
}

std::string_view mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::derive: return "derive";
    case RunMode::calibrate: return "calibrate";
    case RunMode::evaluate: return "evaluate";
    case RunMode::synth: return "synth";
    case RunMode::tune: return "tune";
  }
  return "unknown";
}

void RunManifest::validate() const {
  if (output_dir.empty()) throw Error(std::string(mode_name(mode)) + " mode needs an output directory");
  if (mode != RunMode::synth && input_dir.empty())
    throw Error(std::string(mode_name(mode)) + " mode needs an input directory");
  if (jobs < 0) throw Error("jobs must be non-negative");
  config.validate();
}

BatchSummary run_batch(const RunManifest& manifest) {
  manifest.validate();
  PipelineConfig config = manifest.config;
  if (manifest.seed) {
    config.scenario.seed = *manifest.seed;
    config.voter.ransac_seed = *manifest.seed;
  }
  const PitchTemplate pitch(config.pitch);
  ensure_output(manifest.output_dir);

  BatchSummary s;
  switch (manifest.mode) {
    case RunMode::synth: s = run_synth(manifest, config, pitch); break;
    case RunMode::derive: s = run_derive(manifest, config, pitch); break;
    case RunMode::calibrate: s = run_calibrate(manifest, config, pitch); break;
    case RunMode::evaluate: s = run_evaluate(manifest, config, pitch); break;
    case RunMode::tune: s = run_tune(manifest, config, pitch); break;
  }
  write_summary(manifest.output_dir, s);
  if (!s.reports.empty()) write_json(manifest.output_dir / "report.json", report_to_json(s.reports));
  return s;
}

}  // namespace pitchcal
