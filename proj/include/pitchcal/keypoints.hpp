#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pitchcal/camera.hpp"
#include "pitchcal/geometry.hpp"
#include "pitchcal/pitch_model.hpp"

namespace pitchcal {

// Observed marking points for one image, in pixels, keyed by marking class name.
struct Annotation {
  ImageSize image_size;
  std::map<std::string, std::vector<Vec2>> classes;

  // nullptr when the class is not annotated.
  const std::vector<Vec2>* find(const std::string& name) const;
};

enum class KeypointSource { annotation_derived, detector, line_fusion };

struct Keypoint {
  int id = 0;
  Vec2 position = Vec2::Zero();  // may lie outside the frame
  double confidence = 1.0;
  KeypointSource source = KeypointSource::annotation_derived;
};

// At most one keypoint per id, iterated in ascending id order.
class KeypointSet {
 public:
  using Storage = std::map<int, Keypoint>;

  // Returns false and keeps the existing entry when the id is already present.
  bool insert(const Keypoint& keypoint);
  void insert_or_assign(const Keypoint& keypoint);
  // Adds every keypoint of `other` whose id is not yet present.
  void merge(const KeypointSet& other);

  const Keypoint* find(int id) const;
  bool contains(int id) const { return points_.count(id) != 0; }
  size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  Storage::const_iterator begin() const { return points_.begin(); }
  Storage::const_iterator end() const { return points_.end(); }

  bool operator==(const KeypointSet& other) const;

 private:
  Storage points_;
};

// A detected line: class label and two extremity points.
struct LineObservation {
  std::string class_name;
  Vec2 p1 = Vec2::Zero();
  Vec2 p2 = Vec2::Zero();
  double confidence = 1.0;
};

// Detector-style output for one image.
struct Detections {
  ImageSize image_size;
  KeypointSet keypoints;
  std::vector<LineObservation> lines;
};

// 30 line-line intersections via two-step refined line fitting.
KeypointSet derive_line_line(const Annotation& annotation, const PitchTemplate& pitch = standard_pitch());

// Ellipse/line intersections. `known` keypoints (typically the line-line set) disambiguate the two solutions.
KeypointSet derive_line_conic(const Annotation& annotation, const KeypointSet& known,
                              const PitchTemplate& pitch = standard_pitch());

// Tangent contact points from anchor intersections to the fitted ellipses.
KeypointSet derive_tangent(const Annotation& annotation, const KeypointSet& anchors,
                           const PitchTemplate& pitch = standard_pitch());

// The 13 axis and quarter-turn points, projected through the ground homography of `base`.
KeypointSet derive_extra(const Annotation& annotation, const KeypointSet& base,
                         const PitchTemplate& pitch = standard_pitch());

// Relabels the keypoints so that the goal nearer to the camera is the left one. The relabeling is the
// half-turn of the pitch about its center, which keeps the implied camera a proper camera above the ground.
KeypointSet remap_left_right(const KeypointSet& keypoints, const Annotation& annotation,
                             const PitchTemplate& pitch = standard_pitch());

struct DeriveOptions {
  bool line_line = true;
  bool line_conic = true;
  bool tangent = true;
  bool extra = true;
  bool remap = false;
};

// Full derivation chain: line-line, line-conic, tangent, extras from the first valid homography, optional remap.
KeypointSet derive_keypoints(const Annotation& annotation, const DeriveOptions& options = {},
                             const PitchTemplate& pitch = standard_pitch());

// Ground-plane homography (world x, y -> image) from the ground keypoints; nullopt if fewer than 4 or degenerate.
std::optional<Homography> ground_homography(const KeypointSet& keypoints, const PitchTemplate& pitch = standard_pitch());

std::vector<Correspondence> to_correspondences(const KeypointSet& keypoints,
                                               const PitchTemplate& pitch = standard_pitch());

}  // namespace pitchcal
