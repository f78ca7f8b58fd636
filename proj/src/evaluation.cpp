#include "pitchcal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pitchcal/errors.hpp"

namespace pitchcal {

namespace {

constexpr double kNearPlane = 1e-6;
// Angular resolution of the conic visibility scan.
constexpr double kConicScanStep = std::numbers::pi / 1800.0;

// The visibility constraints as affine functions of camera coordinates, each required >= 0.
std::array<Eigen::Vector3d, 5> frustum_planes(const CameraParams& p) {
  const double f = p.focal, cx = p.principal_point.x(), cy = p.principal_point.y();
  const double w = p.image_size.width, h = p.image_size.height;
  return {Eigen::Vector3d(0, 0, 1),         // depth (offset by the near plane separately)
          Eigen::Vector3d(f, 0, cx),        // u >= 0
          Eigen::Vector3d(-f, 0, w - cx),   // u <= w
          Eigen::Vector3d(0, f, cy),        // v >= 0
          Eigen::Vector3d(0, -f, h - cy)};  // v <= h
}

bool point_visible(const CameraParams& p, const std::array<Eigen::Vector3d, 5>& planes, const Vec3& world) {
  const Vec3 c = p.to_camera(world);
  if (!(c.z() > kNearPlane)) return false;
  for (size_t i = 1; i < planes.size(); ++i)
    if (planes[i].dot(c) < 0.0) return false;
  return true;
}

std::vector<Interval> segment_intervals(const CameraParams& p, const MarkingClass& m) {
  const Vec3 c0 = p.to_camera(m.a);
  const Vec3 dc = p.to_camera(m.b) - c0;
  double lo = 0.0, hi = 1.0;
  const auto planes = frustum_planes(p);
  for (size_t i = 0; i < planes.size(); ++i) {
    // alpha + beta * s >= 0
    const double alpha = planes[i].dot(c0) - (i == 0 ? kNearPlane : 0.0);
    const double beta = planes[i].dot(dc);
    if (beta == 0.0) {
      if (alpha < 0.0) return {};
      continue;
    }
    const double root = -alpha / beta;
    if (beta > 0.0)
      lo = std::max(lo, root);
    else
      hi = std::min(hi, root);
    if (!(lo < hi)) return {};
  }
  return {{lo, hi}};
}

std::vector<Interval> conic_intervals(const CameraParams& p, const MarkingClass& m) {
  const auto planes = frustum_planes(p);
  const auto visible = [&](double s) { return point_visible(p, planes, m.point_at(s)); };
  // Boundary between s_in (visible) and s_out (not visible).
  const auto boundary = [&](double s_in, double s_out) {
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (s_in + s_out);
      (visible(mid) ? s_in : s_out) = mid;
    }
    return s_in;
  };
  const double span = m.angle_end - m.angle_begin;
  const int n = std::max(8, static_cast<int>(std::ceil(span / kConicScanStep)));
  std::vector<Interval> out;
  bool prev = visible(0.0);
  double begin = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double s = static_cast<double>(i) / n;
    const double s_prev = static_cast<double>(i - 1) / n;
    const bool cur = visible(s);
    if (cur && !prev) begin = boundary(s, s_prev);
    if (!cur && prev) {
      const double end = boundary(s_prev, s);
      if (end > begin) out.push_back({begin, end});
    }
    prev = cur;
  }
  if (prev && begin < 1.0) out.push_back({begin, 1.0});
  return out;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double s = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
  return (p - (a + s * d)).norm();
}

}  // namespace

std::vector<Interval> visible_intervals(const CameraParams& params, const MarkingClass& marking) {
  return marking.is_conic() ? conic_intervals(params, marking) : segment_intervals(params, marking);
}

std::vector<Polyline> project_marking(const CameraParams& params, const MarkingClass& marking, double step_m) {
  if (!(step_m > 0.0)) throw Error("sample step must be positive");
  std::vector<Polyline> out;
  for (const Interval& iv : visible_intervals(params, marking)) {
    const double len = marking.length() * (iv.end - iv.begin);
    const int n = std::max(1, static_cast<int>(std::ceil(len / step_m - 1e-12)));
    Polyline line;
    line.reserve(static_cast<size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
      const double s = iv.begin + (iv.end - iv.begin) * static_cast<double>(i) / n;
      // Interval ends sit on the border up to rounding; snap them into the frame.
      if (const auto px = project(params, marking.point_at(s)))
        line.push_back(px->cwiseMax(Vec2::Zero()).cwiseMin(
            Vec2(params.image_size.width, params.image_size.height)));
    }
    if (line.size() >= 2) out.push_back(std::move(line));
  }
  return out;
}

PolylineSet project_markings(const CameraParams& params, const PitchTemplate& pitch, double step_m) {
  PolylineSet out;
  for (const auto& m : pitch.markings()) {
    auto pieces = project_marking(params, m, step_m);
    if (!pieces.empty()) out.emplace(m.name, std::move(pieces));
  }
  return out;
}

double point_to_polyline_distance(const Vec2& point, const std::vector<Polyline>& polylines) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& line : polylines) {
    if (line.size() == 1) best = std::min(best, (point - line[0]).norm());
    for (size_t i = 0; i + 1 < line.size(); ++i) best = std::min(best, point_segment_distance(point, line[i], line[i + 1]));
  }
  return best;
}

std::map<std::string, ClassCounts> segment_confusion(const PolylineSet& predicted, const Annotation& annotation,
                                                     double t) {
  if (!(t > 0.0)) throw Error("threshold must be positive");
  std::map<std::string, ClassCounts> out;
  for (const auto& [name, points] : annotation.classes) {
    if (points.empty()) continue;
    ClassCounts& c = out[name];
    const auto it = predicted.find(name);
    if (it == predicted.end()) {
      c.fn += 1;
      continue;
    }
    const bool all_within = std::all_of(points.begin(), points.end(), [&](const Vec2& p) {
      return point_to_polyline_distance(p, it->second) <= t;
    });
    (all_within ? c.tp : c.fp) += 1;
  }
  for (const auto& [name, lines] : predicted) {
    const auto* pts = annotation.find(name);
    if (pts == nullptr || pts->empty()) out[name].fp += 1;
  }
  return out;
}

ClassCounts total_counts(const std::map<std::string, ClassCounts>& per_class) {
  ClassCounts total;
  for (const auto& [name, c] : per_class) total += c;
  return total;
}

std::optional<double> acc_at_t(const ClassCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.fn < 0) throw Error("negative confusion counts");
  const int denom = c.tp + c.fn + c.fp;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(c.tp) / denom;
}

double score(double acc, double cr) {
  if (!(acc >= 0.0 && acc <= 1.0) || !(cr >= 0.0 && cr <= 1.0)) throw Error("score inputs must lie in [0, 1]");
  return acc * cr;
}

double l2_keypoints(const KeypointSet& gt, const KeypointSet& pred) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [id, k] : gt) {
    if (const Keypoint* p = pred.find(id)) {
      sum += (p->position - k.position).norm();
      ++n;
    }
  }
  if (n == 0) throw Error("no common keypoint ids");
  return sum / n;
}

Evaluator::Evaluator(std::vector<double> thresholds, double step_m, const PitchTemplate& pitch)
    : thresholds_(std::move(thresholds)), step_m_(step_m), pitch_(&pitch), counts_(thresholds_.size()) {
  if (thresholds_.empty()) throw Error("at least one evaluation threshold is required");
  for (double t : thresholds_)
    if (!(t > 0.0)) throw Error("evaluation thresholds must be positive");
}

void Evaluator::add_frame(const std::optional<CameraParams>& camera, const Annotation& annotation,
                          const KeypointSet* gt_keypoints, const KeypointSet* pred_keypoints) {
  ++frames_;
  if (camera) {
    ++frames_with_camera_;
    const PolylineSet predicted = project_markings(*camera, *pitch_, step_m_);
    for (size_t i = 0; i < thresholds_.size(); ++i)
      for (const auto& [name, c] : segment_confusion(predicted, annotation, thresholds_[i])) counts_[i][name] += c;
  }
  if (gt_keypoints != nullptr && pred_keypoints != nullptr) {
    for (const auto& [id, k] : *gt_keypoints) {
      if (const Keypoint* p = pred_keypoints->find(id)) {
        l2_sum_ += (p->position - k.position).norm();
        ++l2_count_;
      }
    }
  }
}

void Evaluator::merge(const Evaluator& other) {
  if (other.thresholds_ != thresholds_) throw Error("cannot merge evaluators with different thresholds");
  for (size_t i = 0; i < thresholds_.size(); ++i)
    for (const auto& [name, c] : other.counts_[i]) counts_[i][name] += c;
  frames_ += other.frames_;
  frames_with_camera_ += other.frames_with_camera_;
  l2_sum_ += other.l2_sum_;
  l2_count_ += other.l2_count_;
}

EvalReport Evaluator::report(double threshold) const {
  const auto it = std::find(thresholds_.begin(), thresholds_.end(), threshold);
  if (it == thresholds_.end()) throw Error("threshold was not configured for this evaluator");
  const auto& per_class = counts_[static_cast<size_t>(it - thresholds_.begin())];
  EvalReport r;
  r.threshold_px = threshold;
  r.per_class = per_class;
  r.total = total_counts(per_class);
  r.acc_at_t = pitchcal::acc_at_t(r.total);
  r.frames = frames_;
  r.frames_with_camera = frames_with_camera_;
  r.completeness_ratio = frames_ == 0 ? 0.0 : static_cast<double>(frames_with_camera_) / frames_;
  r.score = score(r.acc_at_t.value_or(0.0), r.completeness_ratio);
  if (l2_count_ > 0) r.l2_px = l2_sum_ / l2_count_;
  return r;
}

std::vector<EvalReport> Evaluator::reports() const {
  std::vector<EvalReport> out;
  for (double t : thresholds_) out.push_back(report(t));
  return out;
}

}  // namespace pitchcal
