#include "pitchcal/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "pitchcal/errors.hpp"

namespace pitchcal {

namespace fs = std::filesystem;

namespace {

constexpr double kRotationTolerance = 1e-6;

double number(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw IoError(where + ": missing field \"" + key + "\"");
  if (!it->is_number()) throw IoError(where + ": field \"" + key + "\" is not a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw IoError(where + ": field \"" + key + "\" is not finite");
  return v;
}

ImageSize image_size_from(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw IoError(where + ": image_size must be [width, height]");
  ImageSize s{j[0].get<int>(), j[1].get<int>()};
  if (s.width <= 0 || s.height <= 0) throw IoError(where + ": image_size must be positive");
  return s;
}

Json image_size_to(ImageSize s) { return Json::array({s.width, s.height}); }

void warn(std::vector<std::string>* warnings, std::string message) {
  if (warnings != nullptr) warnings->push_back(std::move(message));
}

// Reads a config object key by key and rejects keys nobody asked for.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error("config: " + path_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const Json::exception& e) {
      throw Error("config: " + path_ + "." + key + ": " + e.what());
    }
  }

  void get_size(const char* key, ImageSize& out) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = image_size_from(*it, "config: " + path_ + "." + key);
    } catch (const IoError& e) {
      throw Error(e.what());
    }
  }

  const Json* sub(const char* key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw Error("config: unknown key " + path_ + "." + k);
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace

void PipelineConfig::validate() const {
  voter.validate();
  scenario.validate();
  if (thresholds.empty()) throw Error("at least one evaluation threshold is required");
  for (double t : thresholds)
    if (!(t > 0) || !std::isfinite(t)) throw Error("evaluation thresholds must be positive");
  if (image_size.width <= 0 || image_size.height <= 0) throw Error("image size must be positive");
  if (synth_frames < 0) throw Error("synthetic frame count must be non-negative");
  const PitchDimensions& d = pitch;
  for (double v : {d.length, d.width, d.goal_width, d.crossbar_height, d.penalty_area_length, d.penalty_area_width,
                   d.goal_area_length, d.goal_area_width, d.circle_radius, d.penalty_spot_distance})
    if (!(v > 0) || !std::isfinite(v)) throw Error("template dimensions must be positive");
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const Json& document) { write_text(path, document.dump(2) + "\n"); }

Annotation annotation_from_json(const Json& document, ImageSize image_size, std::vector<std::string>* warnings,
                                const PitchTemplate& pitch) {
  if (!document.is_object()) throw IoError("annotation must be a JSON object");
  Annotation out;
  out.image_size = image_size;
  if (const auto it = document.find("image_size"); it != document.end())
    out.image_size = image_size_from(*it, "annotation");
  const double w = out.image_size.width;
  const double h = out.image_size.height;

  for (const auto& [name, points] : document.items()) {
    if (name == "image_size") continue;
    if (pitch.find_marking(name) == nullptr) {
      warn(warnings, "unknown class \"" + name + "\" ignored");
      continue;
    }
    if (!points.is_array()) throw IoError("annotation class \"" + name + "\" must be an array of points");
    std::vector<Vec2> pixels;
    for (const auto& p : points) {
      if (!p.is_object()) throw IoError("annotation class \"" + name + "\": point must be an object");
      const double x = number(p, "x", "annotation class \"" + name + "\"");
      const double y = number(p, "y", "annotation class \"" + name + "\"");
      if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) {
        std::ostringstream msg;
        msg << "class \"" << name << "\": point (" << x << ", " << y << ") outside [0, 1]";
        warn(warnings, msg.str());
      }
      pixels.emplace_back(x * w, y * h);
    }
    out.classes.emplace(name, std::move(pixels));
  }
  return out;
}

Annotation read_annotation(const fs::path& path, ImageSize image_size, std::vector<std::string>* warnings,
                           const PitchTemplate& pitch) {
  const Json doc = read_json(path);
  try {
    return annotation_from_json(doc, image_size, warnings, pitch);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Json annotation_to_json(const Annotation& annotation) {
  Json doc = Json::object();
  doc["image_size"] = image_size_to(annotation.image_size);
  const double w = annotation.image_size.width;
  const double h = annotation.image_size.height;
  for (const auto& [name, points] : annotation.classes) {
    Json arr = Json::array();
    for (const auto& p : points) arr.push_back({{"x", p.x() / w}, {"y", p.y() / h}});
    doc[name] = std::move(arr);
  }
  return doc;
}

void write_annotation(const fs::path& path, const Annotation& annotation) {
  write_json(path, annotation_to_json(annotation));
}

Detections detections_from_json(const Json& document, ImageSize image_size, std::vector<std::string>* warnings,
                                const PitchTemplate& pitch) {
  if (!document.is_object()) throw IoError("detections must be a JSON object");
  Detections out;
  out.image_size = image_size;
  if (const auto it = document.find("image_size"); it != document.end())
    out.image_size = image_size_from(*it, "detections");

  if (const auto it = document.find("keypoints"); it != document.end()) {
    if (!it->is_array()) throw IoError("detections: keypoints must be an array");
    for (const auto& k : *it) {
      if (!k.is_object() || !k.contains("id") || !k["id"].is_number_integer())
        throw IoError("detections: keypoint needs an integer id");
      const int id = k["id"].get<int>();
      const Vec2 p(number(k, "x", "keypoint"), number(k, "y", "keypoint"));
      const double conf = k.contains("confidence") ? number(k, "confidence", "keypoint") : 1.0;
      if (id < 0 || id >= static_cast<int>(pitch.keypoints().size())) {
        warn(warnings, "keypoint id " + std::to_string(id) + " outside the template ignored");
        continue;
      }
      if (!(conf >= 0.0 && conf <= 1.0)) throw IoError("detections: confidence outside [0, 1]");
      if (!out.keypoints.insert({id, p, conf, KeypointSource::detector}))
        warn(warnings, "duplicate keypoint id " + std::to_string(id) + " ignored");
    }
  }

  if (const auto it = document.find("lines"); it != document.end()) {
    if (!it->is_array()) throw IoError("detections: lines must be an array");
    for (const auto& l : *it) {
      if (!l.is_object() || !l.contains("class") || !l["class"].is_string())
        throw IoError("detections: line needs a class name");
      LineObservation obs;
      obs.class_name = l["class"].get<std::string>();
      obs.p1 = Vec2(number(l, "x1", "line"), number(l, "y1", "line"));
      obs.p2 = Vec2(number(l, "x2", "line"), number(l, "y2", "line"));
      obs.confidence = l.contains("confidence") ? number(l, "confidence", "line") : 1.0;
      if (pitch.find_marking(obs.class_name) == nullptr) {
        warn(warnings, "unknown line class \"" + obs.class_name + "\" ignored");
        continue;
      }
      out.lines.push_back(std::move(obs));
    }
  }
  return out;
}

Detections read_detections(const fs::path& path, ImageSize image_size, std::vector<std::string>* warnings,
                           const PitchTemplate& pitch) {
  const Json doc = read_json(path);
  try {
    return detections_from_json(doc, image_size, warnings, pitch);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Json detections_to_json(const Detections& detections) {
  Json kps = Json::array();
  for (const auto& [id, k] : detections.keypoints)
    kps.push_back({{"id", id}, {"x", k.position.x()}, {"y", k.position.y()}, {"confidence", k.confidence}});
  Json lines = Json::array();
  for (const auto& l : detections.lines)
    lines.push_back({{"class", l.class_name},
                     {"x1", l.p1.x()},
                     {"y1", l.p1.y()},
                     {"x2", l.p2.x()},
                     {"y2", l.p2.y()},
                     {"confidence", l.confidence}});
  return {{"image_size", image_size_to(detections.image_size)}, {"keypoints", kps}, {"lines", lines}};
}

void write_detections(const fs::path& path, const Detections& detections) {
  write_json(path, detections_to_json(detections));
}

Json camera_to_json(const CameraParams& params, double rmse_px) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({params.rotation(r, 0), params.rotation(r, 1), params.rotation(r, 2)});
  return {{"focal_px", params.focal},
          {"principal_point", {params.principal_point.x(), params.principal_point.y()}},
          {"rotation", rot},
          {"position_m", {params.position.x(), params.position.y(), params.position.z()}},
          {"image_size", image_size_to(params.image_size)},
          {"rmse_px", rmse_px}};
}

CameraParams camera_from_json(const Json& document) {
  if (!document.is_object()) throw IoError("camera must be a JSON object");
  CameraParams p;
  p.focal = number(document, "focal_px", "camera");
  const auto field = [&](const char* key, size_t n) -> const Json& {
    const auto it = document.find(key);
    if (it == document.end() || !it->is_array() || it->size() != n)
      throw IoError(std::string("camera: ") + key + " must be an array of " + std::to_string(n));
    return *it;
  };
  const auto num = [](const Json& j) {
    if (!j.is_number()) throw IoError("camera: non-numeric entry");
    return j.get<double>();
  };
  const Json& pp = field("principal_point", 2);
  p.principal_point = Vec2(num(pp[0]), num(pp[1]));
  const Json& rot = field("rotation", 3);
  for (int r = 0; r < 3; ++r) {
    if (!rot[r].is_array() || rot[r].size() != 3) throw IoError("camera: rotation must be 3x3");
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = num(rot[r][c]);
  }
  const Json& pos = field("position_m", 3);
  p.position = Vec3(num(pos[0]), num(pos[1]), num(pos[2]));
  p.image_size = image_size_from(field("image_size", 2), "camera");
  if (!((p.rotation.transpose() * p.rotation - Mat3::Identity()).norm() < kRotationTolerance) ||
      !(std::abs(p.rotation.determinant() - 1.0) < kRotationTolerance))
    throw IoError("camera: rotation is not a proper rotation");
  return p;
}

Json report_to_json(const std::vector<EvalReport>& reports) {
  Json doc = Json::object();
  if (!reports.empty()) {
    const EvalReport& first = reports.front();
    doc["frames"] = first.frames;
    doc["frames_with_camera"] = first.frames_with_camera;
    doc["cr"] = first.completeness_ratio;
    doc["l2_px"] = first.l2_px ? Json(*first.l2_px) : Json(nullptr);
  }
  Json per_t = Json::array();
  for (const auto& r : reports) {
    Json classes = Json::object();
    for (const auto& [name, c] : r.per_class) classes[name] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
    per_t.push_back({{"t", r.threshold_px},
                     {"acc", r.acc_at_t ? Json(*r.acc_at_t) : Json(nullptr)},
                     {"cr", r.completeness_ratio},
                     {"score", r.score},
                     {"tp", r.total.tp},
                     {"fp", r.total.fp},
                     {"fn", r.total.fn},
                     {"per_class", classes}});
  }
  doc["thresholds"] = per_t;
  return doc;
}

Json config_to_json(const PipelineConfig& c) {
  const VoterConfig& v = c.voter;
  const SyntheticScenario& s = c.scenario;
  const CameraRanges& r = s.camera;
  const PitchDimensions& d = c.pitch;
  return {
      {"image_size", image_size_to(c.image_size)},
      {"voter",
       {{"rmse_preference_px", v.rmse_preference_px},
        {"ransac_tol_px", v.ransac_tol_px},
        {"ransac_max_iterations", v.ransac_max_iterations},
        {"ransac_seed", v.ransac_seed},
        {"confidence_thresholds", v.confidence_thresholds},
        {"min_keypoints_for_no_fusion", v.min_keypoints_for_no_fusion},
        {"plausibility",
         {{"max_height_m", v.bounds.max_height_m},
          {"max_abs_xy_m", v.bounds.max_abs_xy_m},
          {"min_focal_px", v.bounds.min_focal_px},
          {"max_focal_px", v.bounds.max_focal_px}}}}},
      {"synthetic",
       {{"frames", c.synth_frames},
        {"seed", s.seed},
        {"image_size", image_size_to(s.image_size)},
        {"noise_sigma_px", s.noise_sigma_px},
        {"dropout_prob", s.dropout_prob},
        {"class_dropout_prob", s.class_dropout_prob},
        {"outlier_prob", s.outlier_prob},
        {"outlier_magnitude_px", s.outlier_magnitude_px},
        {"keypoint_dropout_prob", s.keypoint_dropout_prob},
        {"min_confidence", s.min_confidence},
        {"max_confidence", s.max_confidence},
        {"min_visible_keypoints", s.min_visible_keypoints},
        {"camera",
         {{"max_abs_x_m", r.max_abs_x_m},
          {"min_abs_y_m", r.min_abs_y_m},
          {"max_abs_y_m", r.max_abs_y_m},
          {"min_z_m", r.min_z_m},
          {"max_z_m", r.max_z_m},
          {"min_focal_px", r.min_focal_px},
          {"max_focal_px", r.max_focal_px},
          {"target_margin_m", r.target_margin_m},
          {"max_roll_rad", r.max_roll_rad}}}}},
      {"template",
       {{"length", d.length},
        {"width", d.width},
        {"goal_width", d.goal_width},
        {"crossbar_height", d.crossbar_height},
        {"penalty_area_length", d.penalty_area_length},
        {"penalty_area_width", d.penalty_area_width},
        {"goal_area_length", d.goal_area_length},
        {"goal_area_width", d.goal_area_width},
        {"circle_radius", d.circle_radius},
        {"penalty_spot_distance", d.penalty_spot_distance}}},
      {"derive",
       {{"line_line", c.derive.line_line},
        {"line_conic", c.derive.line_conic},
        {"tangent", c.derive.tangent},
        {"extra", c.derive.extra},
        {"remap", c.derive.remap}}},
      {"evaluation", {{"thresholds", c.thresholds}}},
  };
}

PipelineConfig config_from_json(const Json& document) {
  PipelineConfig c;
  Section root(document, "config");
  root.get_size("image_size", c.image_size);
  c.scenario.image_size = c.image_size;

  if (const Json* j = root.sub("voter")) {
    Section v(*j, root.child("voter"));
    v.get("rmse_preference_px", c.voter.rmse_preference_px);
    v.get("ransac_tol_px", c.voter.ransac_tol_px);
    v.get("ransac_max_iterations", c.voter.ransac_max_iterations);
    v.get("ransac_seed", c.voter.ransac_seed);
    v.get("confidence_thresholds", c.voter.confidence_thresholds);
    v.get("min_keypoints_for_no_fusion", c.voter.min_keypoints_for_no_fusion);
    if (const Json* b = v.sub("plausibility")) {
      Section p(*b, v.child("plausibility"));
      p.get("max_height_m", c.voter.bounds.max_height_m);
      p.get("max_abs_xy_m", c.voter.bounds.max_abs_xy_m);
      p.get("min_focal_px", c.voter.bounds.min_focal_px);
      p.get("max_focal_px", c.voter.bounds.max_focal_px);
      p.finish();
    }
    v.finish();
  }

  if (const Json* j = root.sub("synthetic")) {
    SyntheticScenario& s = c.scenario;
    Section g(*j, root.child("synthetic"));
    g.get("frames", c.synth_frames);
    g.get("seed", s.seed);
    g.get_size("image_size", s.image_size);
    g.get("noise_sigma_px", s.noise_sigma_px);
    g.get("dropout_prob", s.dropout_prob);
    g.get("class_dropout_prob", s.class_dropout_prob);
    g.get("outlier_prob", s.outlier_prob);
    g.get("outlier_magnitude_px", s.outlier_magnitude_px);
    g.get("keypoint_dropout_prob", s.keypoint_dropout_prob);
    g.get("min_confidence", s.min_confidence);
    g.get("max_confidence", s.max_confidence);
    g.get("min_visible_keypoints", s.min_visible_keypoints);
    if (const Json* cj = g.sub("camera")) {
      CameraRanges& r = s.camera;
      Section cam(*cj, g.child("camera"));
      cam.get("max_abs_x_m", r.max_abs_x_m);
      cam.get("min_abs_y_m", r.min_abs_y_m);
      cam.get("max_abs_y_m", r.max_abs_y_m);
      cam.get("min_z_m", r.min_z_m);
      cam.get("max_z_m", r.max_z_m);
      cam.get("min_focal_px", r.min_focal_px);
      cam.get("max_focal_px", r.max_focal_px);
      cam.get("target_margin_m", r.target_margin_m);
      cam.get("max_roll_rad", r.max_roll_rad);
      cam.finish();
    }
    g.finish();
  }

  if (const Json* j = root.sub("template")) {
    PitchDimensions& d = c.pitch;
    Section t(*j, root.child("template"));
    t.get("length", d.length);
    t.get("width", d.width);
    t.get("goal_width", d.goal_width);
    t.get("crossbar_height", d.crossbar_height);
    t.get("penalty_area_length", d.penalty_area_length);
    t.get("penalty_area_width", d.penalty_area_width);
    t.get("goal_area_length", d.goal_area_length);
    t.get("goal_area_width", d.goal_area_width);
    t.get("circle_radius", d.circle_radius);
    t.get("penalty_spot_distance", d.penalty_spot_distance);
    t.finish();
  }

  if (const Json* j = root.sub("derive")) {
    Section d(*j, root.child("derive"));
    d.get("line_line", c.derive.line_line);
    d.get("line_conic", c.derive.line_conic);
    d.get("tangent", c.derive.tangent);
    d.get("extra", c.derive.extra);
    d.get("remap", c.derive.remap);
    d.finish();
  }

  if (const Json* j = root.sub("evaluation")) {
    Section e(*j, root.child("evaluation"));
    e.get("thresholds", c.thresholds);
    e.finish();
  }
  root.finish();
  c.validate();
  return c;
}

PipelineConfig read_config(const fs::path& path) {
  const Json doc = read_json(path);
  try {
    return config_from_json(doc);
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace pitchcal
