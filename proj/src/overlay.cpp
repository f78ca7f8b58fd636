#include "pitchcal/overlay.hpp"

#include <sstream>

#include "pitchcal/errors.hpp"
#include "pitchcal/evaluation.hpp"

namespace pitchcal {

namespace {

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string_view family_color(KeypointFamily family) {
  switch (family) {
    case KeypointFamily::line_line: return "red";
    case KeypointFamily::line_conic: return "blue";
    case KeypointFamily::tangent: return "purple";
    case KeypointFamily::extra: return "black";
  }
  return "gray";
}

std::string render_overlay(const CameraParams& params, const PitchTemplate& pitch, const OverlayOptions& options) {
  if (!is_plausible(params)) throw Error("refusing to render an implausible camera");
  const int w = params.image_size.width;
  const int h = params.image_size.height;

  std::ostringstream svg;
  svg.precision(3);
  svg << std::fixed;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" version=\"1.1\" "
      << "width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  if (options.background_href)
    svg << "  <image x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" xlink:href=\""
        << escape(*options.background_href) << "\"/>\n";

  svg << "  <g fill=\"none\" stroke=\"lime\" stroke-width=\"2\">\n";
  for (const auto& [name, pieces] : project_markings(params, pitch, options.step_m)) {
    for (const auto& piece : pieces) {
      svg << "    <polyline class=\"" << escape(name) << "\" points=\"";
      for (size_t i = 0; i < piece.size(); ++i) svg << (i ? " " : "") << piece[i].x() << ',' << piece[i].y();
      svg << "\"/>\n";
    }
  }
  svg << "  </g>\n";

  svg << "  <g stroke=\"white\" stroke-width=\"1\">\n";
  const auto marker = [&](int id, const Vec2& p) {
    const KeypointDef& def = pitch.keypoint(id);
    svg << "    <circle id=\"kp" << id << "\" cx=\"" << p.x() << "\" cy=\"" << p.y() << "\" r=\"4\" fill=\""
        << family_color(def.family) << "\"/>\n";
  };
  if (options.keypoints != nullptr) {
    for (const auto& [id, k] : *options.keypoints)
      if (params.image_size.contains(k.position)) marker(id, k.position);
  } else {
    for (const auto& def : pitch.keypoints()) {
      const auto p = project(params, def.world);
      if (p && params.image_size.contains(*p)) marker(def.id, *p);
    }
  }
  svg << "  </g>\n</svg>\n";
  return svg.str();
}

}  // namespace pitchcal
