#include "pitchcal/camera.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "pitchcal/errors.hpp"

namespace pitchcal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

Mat3 exp_so3(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

double sum_squared_error(const CameraParams& p, std::span<const Correspondence> corr) {
  double sum = 0.0;
  for (const auto& c : corr) {
    const auto px = project(p, c.world);
    if (!px) return kInf;
    sum += (*px - c.image).squaredNorm();
  }
  return sum;
}

// Orthonormal frame of the plane through the points: columns e1, e2, normal; plus origin.
struct PlaneFrame {
  Vec3 origin = Vec3::Zero();
  Mat3 basis = Mat3::Identity();
};

// Focal guesses tried when the closed form has no real solution (near-degenerate views).
constexpr std::array<double, 6> kFallbackFocals = {300.0, 700.0, 1500.0, 3000.0, 6000.0, 12000.0};

// Initial cameras from the plane homography, in the plane's own 2D coordinates, mapped back to world.
// One closed-form initialization, or several focal guesses when the closed form fails.
std::vector<CameraParams> planar_inits(std::span<const Correspondence> corr, ImageSize size, const PlaneFrame& frame) {
  if (corr.size() < 4) throw DegenerateInput("planar calibration needs at least 4 correspondences");
  std::vector<PointPair> pairs;
  pairs.reserve(corr.size());
  const Vec2 pp = size.center();
  for (const auto& c : corr) {
    const Vec3 local = frame.basis.transpose() * (c.world - frame.origin);
    pairs.push_back({local.head<2>(), c.image - pp});
  }
  const Mat3 h = estimate_homography(pairs).matrix();

  // Zhang constraints with K = diag(f, f, 1) on the principal-point-centered homography:
  //   orthogonality  (h11 h12 + h21 h22) w + h31 h32 = 0
  //   equal norm     (h11^2 + h21^2 - h12^2 - h22^2) w + h31^2 - h32^2 = 0,  w = 1 / f^2
  // solved jointly in the least-squares sense.
  const double a1 = h(0, 0) * h(0, 1) + h(1, 0) * h(1, 1);
  const double b1 = h(2, 0) * h(2, 1);
  const double a2 = h(0, 0) * h(0, 0) + h(1, 0) * h(1, 0) - h(0, 1) * h(0, 1) - h(1, 1) * h(1, 1);
  const double b2 = h(2, 0) * h(2, 0) - h(2, 1) * h(2, 1);
  const double w = -(a1 * b1 + a2 * b2) / (a1 * a1 + a2 * a2);

  const auto pose = [&](double f) {
    const Mat3 k_inv = Eigen::Vector3d(1.0 / f, 1.0 / f, 1.0).asDiagonal();
    const Mat3 m = k_inv * h;
    double lambda = 2.0 / (m.col(0).norm() + m.col(1).norm());
    // The pose sign puts the observed points in front of the camera.
    int in_front = 0;
    for (const auto& pr : pairs)
      in_front += (m.row(2).dot(Eigen::Vector3d(pr.world.x(), pr.world.y(), 1.0)) > 0) ? 1 : -1;
    if (in_front < 0) lambda = -lambda;

    Mat3 r;
    r.col(0) = lambda * m.col(0);
    r.col(1) = lambda * m.col(1);
    r.col(2) = r.col(0).cross(r.col(1));
    r = nearest_rotation(r);
    const Vec3 t = lambda * m.col(2);

    // Plane frame -> world: X = origin + B * local.
    CameraParams cam;
    cam.focal = f;
    cam.image_size = size;
    cam.principal_point = pp;
    cam.rotation = r * frame.basis.transpose();
    cam.position = frame.origin + frame.basis * (-r.transpose() * t);
    return cam;
  };

  if (w > 0.0 && std::isfinite(w)) return {pose(1.0 / std::sqrt(w))};
  std::vector<CameraParams> inits;
  for (double f : kFallbackFocals) inits.push_back(pose(f));
  return inits;
}

// Lowest-RMSE refinement over the initial guesses; nullopt when none could be refined.
std::optional<RefineResult> best_refinement(const std::vector<CameraParams>& inits,
                                            std::span<const Correspondence> corr) {
  std::optional<RefineResult> best;
  for (const auto& init : inits) {
    const RefineResult r = refine_lm(init, corr);
    if (r.ok && std::isfinite(r.rmse_px) && r.params.focal > 0 && (!best || r.rmse_px < best->rmse_px)) best = r;
  }
  return best;
}

// nullopt when the points span 3D; the plane frame otherwise.
std::optional<PlaneFrame> fit_plane(std::span<const Correspondence> corr) {
  Vec3 mean = Vec3::Zero();
  for (const auto& c : corr) mean += c.world;
  mean /= static_cast<double>(corr.size());
  Mat3 scatter = Mat3::Zero();
  for (const auto& c : corr) scatter += (c.world - mean) * (c.world - mean).transpose();
  Eigen::JacobiSVD<Mat3> svd(scatter, Eigen::ComputeFullU);
  const auto s = svd.singularValues();
  if (s[2] > 1e-12 * std::max(s[0], 1e-300)) return std::nullopt;
  PlaneFrame frame;
  frame.origin = mean;
  frame.basis = svd.matrixU();
  if (frame.basis.determinant() < 0) frame.basis.col(2) = -frame.basis.col(2);
  return frame;
}

Mat3 normalization_2d(std::span<const Correspondence> corr) {
  Vec2 mean = Vec2::Zero();
  for (const auto& c : corr) mean += c.image;
  mean /= static_cast<double>(corr.size());
  double dist = 0.0;
  for (const auto& c : corr) dist += (c.image - mean).norm();
  dist /= static_cast<double>(corr.size());
  if (!(dist > 1e-12)) throw DegenerateInput("image points coincide");
  const double s = std::sqrt(2.0) / dist;
  Mat3 t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

Eigen::Matrix4d normalization_3d(std::span<const Correspondence> corr) {
  Vec3 mean = Vec3::Zero();
  for (const auto& c : corr) mean += c.world;
  mean /= static_cast<double>(corr.size());
  double dist = 0.0;
  for (const auto& c : corr) dist += (c.world - mean).norm();
  dist /= static_cast<double>(corr.size());
  if (!(dist > 1e-12)) throw DegenerateInput("world points coincide");
  const double s = std::sqrt(3.0) / dist;
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity() * s;
  t(3, 3) = 1.0;
  t.block<3, 1>(0, 3) = -s * mean;
  return t;
}

// Initial camera from the 3x4 DLT, decomposed as P = K [R | -R C].
CameraParams multiplane_dlt_init(std::span<const Correspondence> corr, ImageSize size) {
  const Mat3 ti = normalization_2d(corr);
  const Eigen::Matrix4d tw = normalization_3d(corr);
  const auto n = static_cast<Eigen::Index>(corr.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = corr[static_cast<size_t>(i)];
    const Eigen::Vector4d x = tw * c.world.homogeneous();
    const Eigen::Vector3d m = ti * c.image.homogeneous();
    const Vec2 u = m.head<2>() / m.z();
    a.block<1, 4>(2 * i, 0) = x.transpose();
    a.block<1, 4>(2 * i, 8) = -u.x() * x.transpose();
    a.block<1, 4>(2 * i + 1, 4) = x.transpose();
    a.block<1, 4>(2 * i + 1, 8) = -u.y() * x.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv[10] > 1e-10 * sv[0])) throw DegenerateInput("rank-deficient projection DLT");
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> pn;
  pn << p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11];
  Eigen::Matrix<double, 3, 4> proj = ti.inverse() * pn * tw;

  Mat3 m = proj.leftCols<3>();
  if (m.determinant() < 0) {
    proj = -proj;
    m = -m;
  }
  if (!(std::abs(m.determinant()) > 0)) throw DegenerateInput("singular projection");
  // RQ through QR of the inverse: M^-1 = Q U  =>  M = U^-1 Q^T.
  Eigen::HouseholderQR<Mat3> qr(m.inverse());
  const Mat3 q = qr.householderQ();
  const Mat3 u = qr.matrixQR().triangularView<Eigen::Upper>();
  Mat3 k = u.inverse();
  Mat3 r = q.transpose();
  const Mat3 fix = Eigen::Vector3d(k(0, 0) < 0 ? -1 : 1, k(1, 1) < 0 ? -1 : 1, k(2, 2) < 0 ? -1 : 1).asDiagonal();
  k = k * fix;
  r = fix * r;
  CameraParams cam;
  cam.image_size = size;
  cam.principal_point = size.center();
  cam.focal = 0.5 * (k(0, 0) + k(1, 1)) / k(2, 2);
  cam.rotation = nearest_rotation(r);
  cam.position = -m.inverse() * proj.col(3);
  return cam;
}

}  // namespace

CameraParams CameraParams::look_at(const Vec3& eye, const Vec3& target, double focal, ImageSize size, double roll) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(Vec3::UnitZ());
  if (x.norm() < 1e-9) x = Vec3::UnitX();
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = z;
  CameraParams cam;
  cam.rotation = Eigen::AngleAxisd(roll, Vec3::UnitZ()).toRotationMatrix() * r;
  cam.position = eye;
  cam.focal = focal;
  cam.image_size = size;
  cam.principal_point = size.center();
  return cam;
}

Eigen::Matrix<double, 3, 4> CameraParams::projection_matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = k(1, 1) = focal;
  k(0, 2) = principal_point.x();
  k(1, 2) = principal_point.y();
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = rotation;
  rt.col(3) = -rotation * position;
  return k * rt;
}

std::optional<Vec2> project(const CameraParams& params, const Vec3& world) {
  const Vec3 c = params.to_camera(world);
  if (!(c.z() > kMinDepth)) return std::nullopt;
  return Vec2(params.focal * c.x() / c.z() + params.principal_point.x(),
              params.focal * c.y() / c.z() + params.principal_point.y());
}

std::optional<Vec3> back_project_to_ground(const CameraParams& params, const Vec2& pixel) {
  const Vec3 ray_cam((pixel.x() - params.principal_point.x()) / params.focal,
                     (pixel.y() - params.principal_point.y()) / params.focal, 1.0);
  const Vec3 ray = params.rotation.transpose() * ray_cam;
  if (!(std::abs(ray.z()) > 1e-15)) return std::nullopt;
  const double s = -params.position.z() / ray.z();
  if (!(s > 0)) return std::nullopt;
  return params.position + s * ray;
}

double reprojection_rmse(const CameraParams& params, std::span<const Correspondence> correspondences) {
  if (correspondences.empty()) throw DegenerateInput("RMSE of an empty correspondence set");
  const double sse = sum_squared_error(params, correspondences);
  return std::sqrt(sse / static_cast<double>(correspondences.size()));
}

bool is_plausible(const CameraParams& p, const PlausibilityBounds& b) {
  const Vec3& c = p.position;
  return c.allFinite() && std::isfinite(p.focal) && c.z() > 0.0 && c.z() <= b.max_height_m &&
         std::abs(c.x()) <= b.max_abs_xy_m && std::abs(c.y()) <= b.max_abs_xy_m && p.focal >= b.min_focal_px &&
         p.focal <= b.max_focal_px;
}

RefineResult refine_lm(const CameraParams& initial, std::span<const Correspondence> corr, const RefineOptions& opt) {
  if (corr.size() < 4) throw DegenerateInput("refinement needs at least 4 correspondences");
  RefineResult result;
  result.params = initial;
  double cost = sum_squared_error(initial, corr);
  const auto n = static_cast<double>(corr.size());
  if (!std::isfinite(cost)) {
    result.ok = false;
    result.rmse_px = kInf;
    return result;
  }

  const auto rows = static_cast<Eigen::Index>(2 * corr.size());
  Eigen::MatrixXd jac(rows, 7);
  Eigen::VectorXd res(rows);
  double damping = 1e-3;
  CameraParams current = initial;

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    result.iterations = iter + 1;
    for (size_t i = 0; i < corr.size(); ++i) {
      const Vec3 xc = current.to_camera(corr[i].world);
      const double iz = 1.0 / xc.z();
      const Vec2 proj(current.focal * xc.x() * iz + current.principal_point.x(),
                      current.focal * xc.y() * iz + current.principal_point.y());
      const auto r = static_cast<Eigen::Index>(2 * i);
      res.segment<2>(r) = proj - corr[i].image;
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << current.focal * iz, 0, -current.focal * xc.x() * iz * iz, 0, current.focal * iz,
          -current.focal * xc.y() * iz * iz;
      jac(r, 0) = xc.x() * iz;
      jac(r + 1, 0) = xc.y() * iz;
      // Left-multiplied rotation increment: d(xc) / d(omega) = -[xc]x ; d(xc) / d(C) = -R.
      jac.block<2, 3>(r, 1) = dproj * (-skew(xc));
      jac.block<2, 3>(r, 4) = dproj * (-current.rotation);
    }
    const Eigen::Matrix<double, 7, 7> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 7, 1> grad = jac.transpose() * res;

    bool accepted = false;
    bool stop = false;
    while (!accepted) {
      Eigen::Matrix<double, 7, 7> a = jtj;
      for (int d = 0; d < 7; ++d) a(d, d) += damping * std::max(jtj(d, d), 1e-12);
      const Eigen::Matrix<double, 7, 1> step = -a.ldlt().solve(grad);
      if (!step.allFinite()) {
        stop = true;
        break;
      }
      const double scale = std::abs(current.focal) + current.position.norm() + 1.0;
      if (step.norm() < opt.min_relative_step * scale) {
        stop = true;
        break;
      }
      CameraParams trial = current;
      trial.focal += step[0];
      trial.rotation = nearest_rotation(exp_so3(step.segment<3>(1)) * current.rotation);
      trial.position += step.segment<3>(4);
      const double trial_cost = trial.focal > 0 ? sum_squared_error(trial, corr) : kInf;
      if (trial_cost < cost) {
        const double decrease = (cost - trial_cost) / std::max(cost, 1e-300);
        current = trial;
        cost = trial_cost;
        damping = std::max(damping * 0.1, 1e-12);
        accepted = true;
        if (decrease < opt.min_relative_decrease) stop = true;
      } else {
        damping *= 10.0;
        if (damping > 1e16) {
          stop = true;
          break;
        }
      }
    }
    if (stop) break;
  }
  result.params = current;
  result.rmse_px = std::sqrt(cost / n);
  return result;
}

CameraParams calibrate_planar(std::span<const Correspondence> correspondences, ImageSize size) {
  if (correspondences.size() < 4) throw DegenerateInput("planar calibration needs at least 4 correspondences");
  for (const auto& c : correspondences)
    if (c.world.z() != 0.0) throw DegenerateInput("planar calibration expects ground-plane points");
  const auto best = best_refinement(planar_inits(correspondences, size, PlaneFrame{}), correspondences);
  if (!best) throw EstimationFailure("planar refinement failed");
  return best->params;
}

CameraParams calibrate_multiplane(std::span<const Correspondence> correspondences, ImageSize size) {
  if (correspondences.size() < 6) throw DegenerateInput("multiplane calibration needs at least 6 correspondences");
  if (const auto plane = fit_plane(correspondences)) {
    bool ground = true;
    for (const auto& c : correspondences) ground &= c.world.z() == 0.0;
    if (ground) return calibrate_planar(correspondences, size);
    const auto best = best_refinement(planar_inits(correspondences, size, *plane), correspondences);
    if (!best) throw EstimationFailure("planar refinement failed");
    return best->params;
  }

  std::optional<RefineResult> best;
  const auto consider = [&](const CameraParams& init) {
    const RefineResult r = refine_lm(init, correspondences);
    if (r.ok && std::isfinite(r.rmse_px) && (!best || r.rmse_px < best->rmse_px)) best = r;
  };
  std::string dlt_error;
  try {
    consider(multiplane_dlt_init(correspondences, size));
  } catch (const Error& e) {
    dlt_error = e.what();
  }
  // A poorly conditioned DLT (few off-plane points) is retried from the ground-plane pose.
  std::vector<Correspondence> ground;
  for (const auto& c : correspondences)
    if (c.world.z() == 0.0) ground.push_back(c);
  if (ground.size() >= 4 && (!best || !is_plausible(best->params) || best->rmse_px > 1.0)) {
    try {
      for (const auto& init : planar_inits(ground, size, PlaneFrame{})) consider(init);
    } catch (const Error&) {
    }
  }
  if (!best) throw EstimationFailure("multiplane calibration failed" + (dlt_error.empty() ? "" : ": " + dlt_error));
  return best->params;
}

CameraParams calibrate(std::span<const Correspondence> correspondences, ImageSize size) {
  const bool off_ground = std::any_of(correspondences.begin(), correspondences.end(),
                                      [](const Correspondence& c) { return c.world.z() != 0.0; });
  return off_ground ? calibrate_multiplane(correspondences, size) : calibrate_planar(correspondences, size);
}

double rotation_angle_deg(const Mat3& a, const Mat3& b) {
  const Mat3 d = a.transpose() * b;
  const double c = std::clamp((d.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace pitchcal
