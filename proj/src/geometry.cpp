#include "pitchcal/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "pitchcal/errors.hpp"

namespace pitchcal {

namespace {

using Vec3h = Eigen::Vector3d;

// Similarity taking the points to zero mean and mean distance sqrt(2).
Mat3 hartley_normalization(std::span<const Vec2> points) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  double dist = 0.0;
  for (const auto& p : points) dist += (p - mean).norm();
  dist /= static_cast<double>(points.size());
  if (!(dist > 1e-12)) throw DegenerateInput("points coincide");
  const double s = std::sqrt(2.0) / dist;
  Mat3 t;
  t << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return t;
}

Vec2 apply(const Mat3& t, const Vec2& p) {
  const Vec3h v = t * Vec3h(p.x(), p.y(), 1.0);
  return v.head<2>() / v.z();
}

// Twice the signed triangle area.
double cross3(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 u = b - a, v = c - a;
  return u.x() * v.y() - u.y() * v.x();
}

bool has_collinear_triple(std::span<const Vec2> pts, double tol) {
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j)
      for (size_t k = j + 1; k < pts.size(); ++k)
        if (std::abs(cross3(pts[i], pts[j], pts[k])) <= tol) return true;
  return false;
}

Conic::Coefficients normalized(Conic::Coefficients c) {
  const double n = c.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateInput("conic coefficients vanish");
  c /= n;
  if (c[0] + c[2] < 0.0) c = -c;
  return c;
}

}  // namespace

Line2 Line2::through(const Vec2& p, const Vec2& q) {
  const Vec2 d = q - p;
  const double len = d.norm();
  if (!(len > 1e-12)) throw DegenerateInput("line through coincident points");
  Line2 line;
  line.normal = Vec2(-d.y(), d.x()) / len;
  line.offset = -line.normal.dot(p);
  return line;
}

Conic::Conic(const Coefficients& coefficients) : c_(normalized(coefficients)) {}

Conic Conic::from_matrix(const Mat3& m) {
  Coefficients c;
  c << m(0, 0), m(0, 1) + m(1, 0), m(1, 1), m(0, 2) + m(2, 0), m(1, 2) + m(2, 1), m(2, 2);
  return Conic(c);
}

Conic Conic::from_ellipse(const EllipseShape& e) {
  const double ca = std::cos(e.angle), sa = std::sin(e.angle);
  Eigen::Matrix2d rot;
  rot << ca, -sa, sa, ca;
  const Eigen::Matrix2d quad =
      rot * Eigen::Vector2d(1.0 / (e.semi_major * e.semi_major), 1.0 / (e.semi_minor * e.semi_minor)).asDiagonal() *
      rot.transpose();
  Mat3 m = Mat3::Zero();
  m.topLeftCorner<2, 2>() = quad;
  const Vec2 lin = -quad * e.center;
  m(0, 2) = m(2, 0) = lin.x();
  m(1, 2) = m(2, 1) = lin.y();
  m(2, 2) = e.center.dot(quad * e.center) - 1.0;
  return from_matrix(m);
}

Mat3 Conic::matrix() const {
  Mat3 m;
  m << c_[0], c_[1] / 2, c_[3] / 2, c_[1] / 2, c_[2], c_[4] / 2, c_[3] / 2, c_[4] / 2, c_[5];
  return m;
}

double Conic::evaluate(const Vec2& p) const {
  const double x = p.x(), y = p.y();
  return c_[0] * x * x + c_[1] * x * y + c_[2] * y * y + c_[3] * x + c_[4] * y + c_[5];
}

EllipseShape Conic::ellipse() const {
  if (!is_ellipse()) throw DegenerateInput("conic is not an ellipse");
  const double a = c_[0], b = c_[1], c = c_[2];
  Eigen::Matrix2d grad;
  grad << 2 * a, b, b, 2 * c;
  EllipseShape e;
  e.center = grad.inverse() * Vec2(-c_[3], -c_[4]);
  const double f0 = evaluate(e.center);
  Eigen::Matrix2d quad;
  quad << a, b / 2, b / 2, c;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(quad);
  const Vec2 lambda = es.eigenvalues();  // ascending
  if (!(f0 < 0.0)) throw DegenerateInput("imaginary ellipse");
  e.semi_major = std::sqrt(-f0 / lambda[0]);
  e.semi_minor = std::sqrt(-f0 / lambda[1]);
  const Vec2 major = es.eigenvectors().col(0);
  e.angle = std::atan2(major.y(), major.x());
  if (e.angle <= -M_PI / 2) e.angle += M_PI;
  if (e.angle > M_PI / 2) e.angle -= M_PI;
  return e;
}

Homography::Homography(const Mat3& m) {
  Eigen::Index r = 0, c = 0;
  m.cwiseAbs().maxCoeff(&r, &c);
  const double pivot = m(r, c);
  if (!(std::abs(pivot) > 0.0) || !m.allFinite()) throw DegenerateInput("homography has no finite entries");
  h_ = m / pivot;
  if (!(std::abs(h_.determinant()) > 1e-12)) throw DegenerateInput("singular homography");
}

Vec2 Homography::map(const Vec2& p) const {
  const Vec3h v = map_homogeneous(p);
  return v.head<2>() / v.z();
}

Line2 fit_line(std::span<const Vec2> points) {
  if (points.size() < 2) throw DegenerateInput("line fit needs at least 2 points");
  Vec2 mean = Vec2::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  double spread = 0.0;
  for (const auto& p : points) {
    const Vec2 d = p - mean;
    scatter += d * d.transpose();
    spread = std::max(spread, d.norm());
  }
  if (!(spread > 1e-9)) throw DegenerateInput("line fit points coincide");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(scatter);
  Line2 line;
  line.normal = es.eigenvectors().col(0).normalized();
  line.offset = -line.normal.dot(mean);
  return line;
}

Vec2 intersect_lines(const Line2& a, const Line2& b, double min_sin) {
  const double det = a.normal.x() * b.normal.y() - a.normal.y() * b.normal.x();
  if (!(std::abs(det) > min_sin)) throw DegenerateInput("lines are parallel");
  const double x = (a.normal.y() * b.offset - b.normal.y() * a.offset) / det;
  const double y = (b.normal.x() * a.offset - a.normal.x() * b.offset) / det;
  return {x, y};
}

Vec2 refine_intersection(std::span<const Vec2> points_a, std::span<const Vec2> points_b) {
  constexpr size_t kNearest = 4;
  const Vec2 coarse = intersect_lines(fit_line(points_a), fit_line(points_b));

  const auto refit = [&](std::span<const Vec2> pts) {
    if (pts.size() <= 2) return fit_line(pts);
    std::vector<Vec2> sorted(pts.begin(), pts.end());
    const size_t k = std::min(kNearest, sorted.size());
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(),
                      [&](const Vec2& p, const Vec2& q) {
                        return (p - coarse).squaredNorm() < (q - coarse).squaredNorm();
                      });
    sorted.resize(k);
    return fit_line(sorted);
  };
  return intersect_lines(refit(points_a), refit(points_b));
}

Conic fit_ellipse(std::span<const Vec2> points) {
  if (points.size() < 5) throw DegenerateInput("ellipse fit needs at least 5 points");
  const Mat3 t = hartley_normalization(points);
  std::vector<Vec2> pts;
  pts.reserve(points.size());
  for (const auto& p : points) pts.push_back(apply(t, p));
  {
    const Line2 l = fit_line(pts);
    double worst = 0.0;
    for (const auto& p : pts) worst = std::max(worst, std::abs(l.signed_distance(p)));
    if (worst < 1e-9) throw DegenerateInput("ellipse fit points are collinear");
  }

  // Halir-Flusser: split the design matrix into quadratic and linear blocks.
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd d1(n, 3), d2(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = pts[static_cast<size_t>(i)].x(), y = pts[static_cast<size_t>(i)].y();
    d1.row(i) << x * x, x * y, y * y;
    d2.row(i) << x, y, 1.0;
  }
  const Mat3 s1 = d1.transpose() * d1;
  const Mat3 s2 = d1.transpose() * d2;
  const Mat3 s3 = d2.transpose() * d2;
  const Eigen::FullPivLU<Mat3> lu(s3);
  if (!lu.isInvertible()) throw DegenerateInput("ellipse fit scatter matrix is singular");
  const Mat3 reduce = -lu.inverse() * s2.transpose();
  const Mat3 m = s1 + s2 * reduce;
  // Premultiply by the inverse of the 4ac - b^2 constraint matrix.
  Mat3 cm;
  cm.row(0) = m.row(2) / 2.0;
  cm.row(1) = -m.row(1);
  cm.row(2) = m.row(0) / 2.0;

  Eigen::EigenSolver<Mat3> es(cm);
  int best = -1;
  double best_cond = 0.0;
  Eigen::Vector3d a1 = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d v = es.eigenvectors().col(i).real().normalized();
    const double cond = 4.0 * v[0] * v[2] - v[1] * v[1];
    if (cond > best_cond) {
      best_cond = cond;
      best = i;
      a1 = v;
    }
  }
  if (best < 0) throw EstimationFailure("ellipse fit produced no elliptic solution");
  const Eigen::Vector3d a2 = reduce * a1;

  Conic::Coefficients c;
  c << a1, a2;
  const Conic local(c);
  // Back to input coordinates: Q = T^T Q' T.
  const Conic result = Conic::from_matrix(t.transpose() * local.matrix() * t);
  if (!result.is_ellipse()) throw EstimationFailure("ellipse fit produced a non-ellipse");
  return result;
}

std::vector<Vec2> intersect_line_conic(const Line2& line, const Conic& conic) {
  const Mat3 q = conic.matrix();
  const Vec2 base = -line.offset * line.normal;
  const Vec3h p0(base.x(), base.y(), 1.0);
  const Vec2 dir2 = line.direction();
  const Vec3h dir(dir2.x(), dir2.y(), 0.0);
  const double a = dir.dot(q * dir);
  const double b = 2.0 * p0.dot(q * dir);
  const double c = p0.dot(q * p0);
  if (!(std::abs(a) > 0.0)) {
    if (!(std::abs(b) > 0.0)) return {};
    return {base - c / b * dir2};
  }
  const double disc = b * b - 4.0 * a * c;
  const double scale = b * b + std::abs(4.0 * a * c);
  if (std::abs(disc) <= 1e-9 * scale) return {base + (-b / (2.0 * a)) * dir2};
  if (disc < 0.0) return {};
  const double root = std::sqrt(disc);
  const double qv = -0.5 * (b + std::copysign(root, b));
  double s1 = qv / a;
  double s2 = qv != 0.0 ? c / qv : -s1;
  if (s1 > s2) std::swap(s1, s2);
  return {base + s1 * dir2, base + s2 * dir2};
}

std::array<Vec2, 2> tangent_points(const Vec2& external, const Conic& conic) {
  if (!conic.is_ellipse()) throw DegenerateInput("tangent points need an ellipse");
  const auto& c = conic.coefficients();
  const double x = external.x(), y = external.y();
  const double magnitude = std::abs(c[0] * x * x) + std::abs(c[1] * x * y) + std::abs(c[2] * y * y) +
                           std::abs(c[3] * x) + std::abs(c[4] * y) + std::abs(c[5]);
  if (!(conic.evaluate(external) > 1e-12 * magnitude)) throw DegenerateInput("point is not outside the conic");
  const Vec3h polar = conic.matrix() * Vec3h(x, y, 1.0);
  const double n = polar.head<2>().norm();
  Line2 line;
  line.normal = polar.head<2>() / n;
  line.offset = polar.z() / n;
  const auto pts = intersect_line_conic(line, conic);
  if (pts.size() != 2) throw DegenerateInput("polar line does not cut the conic twice");
  return {pts[0], pts[1]};
}

Homography estimate_homography(std::span<const PointPair> pairs) {
  if (pairs.size() < 4) throw DegenerateInput("homography needs at least 4 pairs");
  std::vector<Vec2> world, image;
  world.reserve(pairs.size());
  image.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (!p.world.allFinite() || !p.image.allFinite()) throw DegenerateInput("non-finite correspondence");
    world.push_back(p.world);
    image.push_back(p.image);
  }
  const Mat3 tw = hartley_normalization(world);
  const Mat3 ti = hartley_normalization(image);
  for (auto& p : world) p = apply(tw, p);
  for (auto& p : image) p = apply(ti, p);
  if (pairs.size() == 4 && (has_collinear_triple(world, 1e-9) || has_collinear_triple(image, 1e-9)))
    throw DegenerateInput("minimal homography sample has three collinear points");

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2& w = world[static_cast<size_t>(i)];
    const Vec2& m = image[static_cast<size_t>(i)];
    a.row(2 * i) << w.x(), w.y(), 1, 0, 0, 0, -m.x() * w.x(), -m.x() * w.y(), -m.x();
    a.row(2 * i + 1) << 0, 0, 0, w.x(), w.y(), 1, -m.y() * w.x(), -m.y() * w.y(), -m.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // Eight independent constraints are needed: the 8th singular value must not vanish.
  if (sv.size() >= 8 && !(sv[7] > 1e-10 * sv[0])) throw DegenerateInput("rank-deficient homography configuration");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  return Homography(ti.inverse() * hn * tw);
}

double transfer_error(const Homography& h, const PointPair& pair) {
  const Vec3h v = h.map_homogeneous(pair.world);
  if (!(std::abs(v.z()) > 1e-15)) return std::numeric_limits<double>::infinity();
  return (v.head<2>() / v.z() - pair.image).norm();
}

RansacResult ransac_homography_filter(std::span<const PointPair> pairs, const RansacOptions& options) {
  const size_t n = pairs.size();
  if (n < 4) throw DegenerateInput("RANSAC needs at least 4 pairs");

  // Canonical order makes the sampled subsets independent of input order.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  const auto key = [&](size_t i) {
    const auto& p = pairs[i];
    return std::array<double, 4>{p.world.x(), p.world.y(), p.image.x(), p.image.y()};
  };
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return key(a) < key(b); });

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<size_t> pick(0, n - 1);

  std::vector<size_t> best_inliers;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<size_t> inliers;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    std::array<size_t, 4> sample{};
    for (size_t k = 0; k < 4; ++k) {
      size_t candidate;
      do {
        candidate = order[pick(rng)];
      } while (std::find(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(k), candidate) !=
               sample.begin() + static_cast<std::ptrdiff_t>(k));
      sample[k] = candidate;
    }
    std::array<PointPair, 4> minimal{pairs[sample[0]], pairs[sample[1]], pairs[sample[2]], pairs[sample[3]]};
    Homography model;
    try {
      model = estimate_homography(minimal);
    } catch (const DegenerateInput&) {
      continue;
    }
    inliers.clear();
    double cost = 0.0;
    for (size_t i : order) {
      const double e = transfer_error(model, pairs[i]);
      if (e <= options.tolerance_px) {
        inliers.push_back(i);
        cost += e * e;
      }
    }
    if (inliers.size() > best_inliers.size() || (inliers.size() == best_inliers.size() && cost < best_cost)) {
      best_inliers = inliers;
      best_cost = cost;
    }
    if (static_cast<double>(best_inliers.size()) >= options.early_exit_ratio * static_cast<double>(n)) break;
  }
  if (best_inliers.size() < 4) throw EstimationFailure("RANSAC found no model with 4 inliers");
  std::sort(best_inliers.begin(), best_inliers.end());

  std::vector<PointPair> support;
  support.reserve(best_inliers.size());
  for (size_t i : best_inliers) support.push_back(pairs[i]);
  RansacResult result;
  try {
    result.homography = estimate_homography(support);
  } catch (const DegenerateInput& e) {
    throw EstimationFailure(std::string("RANSAC refit failed: ") + e.what());
  }
  result.inliers = std::move(best_inliers);
  return result;
}

}  // namespace pitchcal
