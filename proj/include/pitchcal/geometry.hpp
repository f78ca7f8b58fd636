#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "pitchcal/pitch_model.hpp"

namespace pitchcal {

using Mat3 = Eigen::Matrix3d;

// n.x * x + n.y * y + d = 0 with |n| = 1.
struct Line2 {
  Vec2 normal = Vec2(0, 1);
  double offset = 0.0;

  static Line2 through(const Vec2& p, const Vec2& q);
  double signed_distance(const Vec2& p) const { return normal.dot(p) + offset; }
  Vec2 direction() const { return Vec2(-normal.y(), normal.x()); }
  Eigen::Vector3d homogeneous() const { return {normal.x(), normal.y(), offset}; }
};

struct EllipseShape {
  Vec2 center = Vec2::Zero();
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double angle = 0.0;  // of the major axis, radians in (-pi/2, pi/2]
};

// A*x^2 + B*x*y + C*y^2 + D*x + E*y + F = 0, unit-norm coefficients, A + C > 0.
class Conic {
 public:
  using Coefficients = Eigen::Matrix<double, 6, 1>;

  Conic() = default;
  explicit Conic(const Coefficients& coefficients);
  // Conic through the 3x3 symmetric matrix form.
  static Conic from_matrix(const Mat3& m);
  static Conic from_ellipse(const EllipseShape& shape);

  const Coefficients& coefficients() const { return c_; }
  Mat3 matrix() const;
  double evaluate(const Vec2& p) const;
  bool is_ellipse() const { return c_[1] * c_[1] - 4.0 * c_[0] * c_[2] < 0.0; }
  // Requires is_ellipse().
  EllipseShape ellipse() const;

 private:
  Coefficients c_ = Coefficients::Zero();
};

// 3x3, normalized so the largest-magnitude entry is 1.
class Homography {
 public:
  Homography() = default;
  explicit Homography(const Mat3& m);

  const Mat3& matrix() const { return h_; }
  // Homogeneous image of p; w carries the side of the camera plane.
  Eigen::Vector3d map_homogeneous(const Vec2& p) const { return h_ * Eigen::Vector3d(p.x(), p.y(), 1.0); }
  Vec2 map(const Vec2& p) const;
  Homography inverse() const { return Homography(h_.inverse()); }

 private:
  Mat3 h_ = Mat3::Identity();
};

struct PointPair {
  Vec2 world;
  Vec2 image;
};

Line2 fit_line(std::span<const Vec2> points);

// Coarse intersection of the full fits, then refit on the points nearest to it.
Vec2 refine_intersection(std::span<const Vec2> points_a, std::span<const Vec2> points_b);

// Intersection of two lines; throws DegenerateInput when |sin(angle)| <= min_sin.
Vec2 intersect_lines(const Line2& a, const Line2& b, double min_sin = 1e-6);

Conic fit_ellipse(std::span<const Vec2> points);

std::vector<Vec2> intersect_line_conic(const Line2& line, const Conic& conic);

// Contact points of the two tangents through an external point (pole-polar).
std::array<Vec2, 2> tangent_points(const Vec2& external, const Conic& conic);

Homography estimate_homography(std::span<const PointPair> pairs);

struct RansacOptions {
  double tolerance_px = 5.0;
  int max_iterations = 500;
  double early_exit_ratio = 0.9;
  std::uint64_t seed = 0x5eed;
};

struct RansacResult {
  std::vector<size_t> inliers;  // ascending indices into the input
  Homography homography;
};

RansacResult ransac_homography_filter(std::span<const PointPair> pairs, const RansacOptions& options = {});

// Reprojection error |H * world - image|, +inf when mapped behind the line at infinity.
double transfer_error(const Homography& h, const PointPair& pair);

}  // namespace pitchcal
