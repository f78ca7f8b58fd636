#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pitchcal/camera.hpp"
#include "pitchcal/keypoints.hpp"
#include "pitchcal/pitch_model.hpp"

namespace pitchcal {

using Polyline = std::vector<Vec2>;
using PolylineSet = std::map<std::string, std::vector<Polyline>>;

// Sub-range [begin, end] of a marking's normalized parameter (MarkingClass::point_at).
struct Interval {
  double begin = 0.0;
  double end = 0.0;
};

// Parts of the marking that project in front of the camera and inside the frame, in parameter order.
// Segments are clipped exactly; conics are located by dense angular scanning plus bisection.
std::vector<Interval> visible_intervals(const CameraParams& params, const MarkingClass& marking);

// Image polylines of the visible parts; spacing <= step_m in the world, interval endpoints included.
std::vector<Polyline> project_marking(const CameraParams& params, const MarkingClass& marking, double step_m);

inline constexpr double kPredictionStepM = 0.25;

// Visible pieces per class; classes with no piece of >= 2 points are absent.
PolylineSet project_markings(const CameraParams& params, const PitchTemplate& pitch = standard_pitch(),
                             double step_m = kPredictionStepM);

struct ClassCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;

  ClassCounts& operator+=(const ClassCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ClassCounts&) const = default;
};

double point_to_polyline_distance(const Vec2& point, const std::vector<Polyline>& polylines);

// Per-class outcome: annotated classes are TP (every point within t, inclusive) / FP / FN;
// predicted classes without annotation are FP.
std::map<std::string, ClassCounts> segment_confusion(const PolylineSet& predicted, const Annotation& annotation,
                                                     double t);

ClassCounts total_counts(const std::map<std::string, ClassCounts>& per_class);

// TP / (TP + FN + FP); nullopt when all counts are zero.
std::optional<double> acc_at_t(const ClassCounts& counts);

// acc * cr; both must lie in [0, 1].
double score(double acc, double cr);

// Mean Euclidean distance over ids present in both sets; throws when there is none.
double l2_keypoints(const KeypointSet& gt, const KeypointSet& pred);

struct EvalReport {
  double threshold_px = 5.0;
  std::map<std::string, ClassCounts> per_class;
  ClassCounts total;
  std::optional<double> acc_at_t;
  double completeness_ratio = 0.0;
  double score = 0.0;  // acc_at_t (0 when undefined) * completeness_ratio
  std::optional<double> l2_px;
  int frames = 0;
  int frames_with_camera = 0;
};

// Accumulates per-frame results. Accuracy counts come from frames with a camera; every frame counts toward CR.
class Evaluator {
 public:
  explicit Evaluator(std::vector<double> thresholds = {5.0, 10.0, 20.0}, double step_m = kPredictionStepM,
                     const PitchTemplate& pitch = standard_pitch());

  void add_frame(const std::optional<CameraParams>& camera, const Annotation& annotation,
                 const KeypointSet* gt_keypoints = nullptr, const KeypointSet* pred_keypoints = nullptr);
  void merge(const Evaluator& other);

  const std::vector<double>& thresholds() const { return thresholds_; }
  EvalReport report(double threshold) const;
  std::vector<EvalReport> reports() const;

 private:
  std::vector<double> thresholds_;
  double step_m_;
  const PitchTemplate* pitch_;
  std::vector<std::map<std::string, ClassCounts>> counts_;  // parallel to thresholds_
  int frames_ = 0;
  int frames_with_camera_ = 0;
  double l2_sum_ = 0.0;
  int l2_count_ = 0;
};

}  // namespace pitchcal
