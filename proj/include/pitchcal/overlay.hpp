#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "pitchcal/camera.hpp"
#include "pitchcal/keypoints.hpp"
#include "pitchcal/pitch_model.hpp"

namespace pitchcal {

struct OverlayOptions {
  // Image drawn under the markings, referenced by path or URL.
  std::optional<std::string> background_href;
  // Markers to draw; when absent, the template keypoints that project into the frame.
  const KeypointSet* keypoints = nullptr;
  double step_m = 0.25;
};

// Marker color per keypoint family: line-line red, line-conic blue, tangent purple, extra black.
std::string_view family_color(KeypointFamily family);

// SVG 1.1 document: one polyline element per visible marking piece, one circle per keypoint marker.
// Throws Error for implausible parameters.
std::string render_overlay(const CameraParams& params, const PitchTemplate& pitch = standard_pitch(),
                           const OverlayOptions& options = {});

}  // namespace pitchcal
