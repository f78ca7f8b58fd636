#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pitchcal/geometry.hpp"
#include "pitchcal/pitch_model.hpp"

namespace pitchcal {

struct ImageSize {
  int width = 960;
  int height = 540;

  Vec2 center() const { return {width / 2.0, height / 2.0}; }
  bool contains(const Vec2& p) const { return p.x() >= 0 && p.y() >= 0 && p.x() <= width && p.y() <= height; }
  bool operator==(const ImageSize&) const = default;
};

// Pinhole camera, square pixels, principal point fixed at the frame center.
// rotation maps world to camera axes (x right, y down, z forward).
struct CameraParams {
  double focal = 1000.0;
  Vec2 principal_point = Vec2(480, 270);
  Mat3 rotation = Mat3::Identity();
  Vec3 position = Vec3::Zero();
  ImageSize image_size;

  static CameraParams look_at(const Vec3& eye, const Vec3& target, double focal, ImageSize size,
                              double roll = 0.0);

  Vec3 to_camera(const Vec3& world) const { return rotation * (world - position); }
  Eigen::Matrix<double, 3, 4> projection_matrix() const;
};

struct Correspondence {
  Vec3 world = Vec3::Zero();
  Vec2 image = Vec2::Zero();
  int id = -1;
  double confidence = 1.0;
};

inline constexpr double kMinDepth = 1e-9;

// nullopt when the point is on or behind the camera plane.
std::optional<Vec2> project(const CameraParams& params, const Vec3& world);

// Intersection of the pixel's viewing ray with z = 0; nullopt if the ray does not reach the ground.
std::optional<Vec3> back_project_to_ground(const CameraParams& params, const Vec2& pixel);

// RMS pixel error; +inf if any point is behind the camera.
double reprojection_rmse(const CameraParams& params, std::span<const Correspondence> correspondences);

struct PlausibilityBounds {
  double max_height_m = 100.0;
  double max_abs_xy_m = 250.0;
  double min_focal_px = 10.0;
  double max_focal_px = 20000.0;
};

bool is_plausible(const CameraParams& params, const PlausibilityBounds& bounds = {});

struct RefineOptions {
  int max_iterations = 200;
  double min_relative_step = 1e-10;
  double min_relative_decrease = 1e-12;
};

struct RefineResult {
  CameraParams params;
  double rmse_px = 0.0;
  int iterations = 0;
  bool ok = true;  // false: could not evaluate or improve from the initial guess
};

// Levenberg-Marquardt over focal, rotation (axis-angle increment) and camera center.
RefineResult refine_lm(const CameraParams& initial, std::span<const Correspondence> correspondences,
                       const RefineOptions& options = {});

// All correspondences on z = 0. Closed-form focal and pose from the ground homography, then refine_lm.
CameraParams calibrate_planar(std::span<const Correspondence> correspondences, ImageSize size);

// Non-coplanar correspondences: 3x4 DLT, RQ decomposition, then constrained refine_lm.
// Coplanar input falls back to planar calibration.
CameraParams calibrate_multiplane(std::span<const Correspondence> correspondences, ImageSize size);

// Dispatches to multiplane when any correspondence is off the ground plane.
CameraParams calibrate(std::span<const Correspondence> correspondences, ImageSize size);

// Rotation angle of R_a^T R_b in degrees.
double rotation_angle_deg(const Mat3& a, const Mat3& b);

}  // namespace pitchcal
