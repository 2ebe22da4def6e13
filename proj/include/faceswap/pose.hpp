#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "faceswap/error.hpp"

namespace faceswap {

/// Pinhole camera with square pixels and zero skew.
struct CameraIntrinsics {
  double focal = 1.0;
  Eigen::Vector2d principal_point = Eigen::Vector2d::Zero();
  int width = 0;
  int height = 0;

  /// focal = 1.5 * max(width, height), principal point at the image center.
  static CameraIntrinsics default_for(int width, int height) {
    require(width > 0 && height > 0, "image size must be positive");
    CameraIntrinsics cam;
    cam.width = width;
    cam.height = height;
    cam.focal = 1.5 * static_cast<double>(std::max(width, height));
    cam.principal_point = {0.5 * (width - 1), 0.5 * (height - 1)};
    return cam;
  }

  void validate() const {
    require(focal > 0.0 && std::isfinite(focal), "focal length must be positive");
    require(width > 0 && height > 0, "image size must be positive");
    require(principal_point.x() >= 0.0 && principal_point.x() <= width &&
                principal_point.y() >= 0.0 && principal_point.y() <= height,
            "principal point must lie inside the image");
  }
};

/// Rigid transform from model coordinates to the camera frame
/// (x right, y down, z forward).
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate(double tol = 1e-9) const {
    require(rotation.allFinite() && translation.allFinite(), "pose contains non-finite values");
    require((rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol,
            "rotation is not orthonormal");
    require(std::abs(rotation.determinant() - 1.0) <= tol, "rotation determinant is not +1");
  }
};

inline Eigen::Vector3d to_rodrigues(const Eigen::Matrix3d& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

inline Eigen::Matrix3d from_rodrigues(const Eigen::Vector3d& v) {
  const double angle = v.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

/// Geodesic distance on SO(3), radians.
inline double rotation_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return Eigen::AngleAxisd(a.transpose() * b).angle();
}

struct Projection {
  Eigen::Matrix2Xd points;
  Eigen::VectorXd depth;
};

inline Projection project(const Eigen::Matrix3Xd& points, const Pose& pose,
                          const CameraIntrinsics& cam) {
  Projection out;
  out.points.resize(2, points.cols());
  out.depth.resize(points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const Eigen::Vector3d xc = pose.rotation * points.col(i) + pose.translation;
    if (!(xc.z() > 0.0)) throw BehindCameraError(static_cast<std::size_t>(i));
    out.points.col(i) = cam.focal * xc.head<2>() / xc.z() + cam.principal_point;
    out.depth[i] = xc.z();
  }
  return out;
}

inline double reprojection_rms(const Eigen::Matrix2Xd& p2d, const Eigen::Matrix3Xd& p3d,
                               const Pose& pose, const CameraIntrinsics& cam) {
  const auto proj = project(p3d, pose, cam);
  return std::sqrt((proj.points - p2d).colwise().squaredNorm().mean());
}

struct PoseOptions {
  int refine_iterations = 10;
  double planar_ratio = 1e-6;
};

namespace epnp_detail {

inline double rms_or_inf(const Eigen::Matrix2Xd& p2d, const Eigen::Matrix3Xd& p3d, const Pose& pose,
                         const CameraIntrinsics& cam) {
  if (!pose.rotation.allFinite() || !pose.translation.allFinite())
    return std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < p3d.cols(); ++i)
    if (!((pose.rotation * p3d.col(i) + pose.translation).z() > 0.0))
      return std::numeric_limits<double>::infinity();
  return reprojection_rms(p2d, p3d, pose, cam);
}

/// Rigid alignment (no scale) mapping world points onto camera points.
inline Pose align_rigid(const Eigen::Matrix3Xd& world, const Eigen::Matrix3Xd& camera) {
  const Eigen::Vector3d cw = world.rowwise().mean();
  const Eigen::Vector3d cc = camera.rowwise().mean();
  const Eigen::Matrix3d h = (camera.colwise() - cc) * (world.colwise() - cw).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  Pose pose;
  pose.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  pose.translation = cc - pose.rotation * cw;
  return pose;
}

struct Problem {
  int controls = 4;
  Eigen::Matrix3Xd world_controls;  // 3 x C
  Eigen::MatrixXd alphas;           // n x C
  std::vector<Eigen::MatrixXd> null_vectors;  // each 3 x C, smallest eigenvalue first
  std::vector<std::pair<int, int>> pairs;
  Eigen::VectorXd rho;              // squared world control distances per pair
};

inline Eigen::Vector3d pair_diff(const Eigen::MatrixXd& v, std::pair<int, int> p) {
  return v.col(p.first) - v.col(p.second);
}

/// Linearized estimate of the first `count` betas, using products
/// beta_a * beta_b for the listed (a, b) index pairs.
inline Eigen::VectorXd linearized_betas(const Problem& pb, int count,
                                        const std::vector<std::pair<int, int>>& products) {
  const auto rows = static_cast<Eigen::Index>(pb.pairs.size());
  Eigen::MatrixXd l(rows, static_cast<Eigen::Index>(products.size()));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < products.size(); ++k) {
      const auto [a, b] = products[k];
      const Eigen::Vector3d da = pair_diff(pb.null_vectors[a], pb.pairs[r]);
      const Eigen::Vector3d db = pair_diff(pb.null_vectors[b], pb.pairs[r]);
      l(r, static_cast<Eigen::Index>(k)) = (a == b ? 1.0 : 2.0) * da.dot(db);
    }
  }
  const Eigen::VectorXd prod = l.completeOrthogonalDecomposition().solve(pb.rho);
  // products[0] is (0, 0); the remaining betas come from (0, a) terms, or
  // from (a, a) when no (0, a) term is present.
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pb.null_vectors.size()));
  const double b00 = prod[0];
  beta[0] = std::sqrt(std::abs(b00));
  const double sign = b00 < 0 ? -1.0 : 1.0;
  for (int a = 1; a < count; ++a) {
    for (std::size_t k = 0; k < products.size(); ++k) {
      if (products[k] == std::make_pair(0, a) && beta[0] > 0.0) {
        beta[a] = sign * prod[static_cast<Eigen::Index>(k)] / beta[0];
        break;
      }
      if (products[k] == std::make_pair(a, a)) {
        beta[a] = std::sqrt(std::abs(prod[static_cast<Eigen::Index>(k)]));
      }
    }
  }
  if (b00 < 0) beta *= -1.0;
  return beta;
}

inline void refine_betas(const Problem& pb, Eigen::VectorXd& beta, int iterations = 10) {
  const auto nb = beta.size();
  const auto rows = static_cast<Eigen::Index>(pb.pairs.size());
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd jac(rows, nb);
    Eigen::VectorXd res(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      Eigen::Vector3d d = Eigen::Vector3d::Zero();
      for (Eigen::Index k = 0; k < nb; ++k) d += beta[k] * pair_diff(pb.null_vectors[k], pb.pairs[r]);
      res[r] = d.squaredNorm() - pb.rho[r];
      for (Eigen::Index k = 0; k < nb; ++k)
        jac(r, k) = 2.0 * d.dot(pair_diff(pb.null_vectors[k], pb.pairs[r]));
    }
    const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-res);
    if (!step.allFinite()) break;
    beta += step;
    if (step.norm() <= 1e-14 * (1.0 + beta.norm())) break;
  }
}

inline Pose pose_from_betas(const Problem& pb, const Eigen::VectorXd& beta,
                            const Eigen::Matrix3Xd& p3d) {
  Eigen::MatrixXd ctrl = Eigen::MatrixXd::Zero(3, pb.controls);
  for (Eigen::Index k = 0; k < beta.size(); ++k) ctrl += beta[k] * pb.null_vectors[k];
  Eigen::Matrix3Xd cam_pts = ctrl * pb.alphas.transpose();
  if (cam_pts.row(2).mean() < 0.0) cam_pts *= -1.0;
  return align_rigid(p3d, cam_pts);
}

inline void refine_pose(const Eigen::Matrix2Xd& p2d, const Eigen::Matrix3Xd& p3d,
                        const CameraIntrinsics& cam, Pose& pose, int iterations) {
  double err = rms_or_inf(p2d, p3d, pose, cam);
  for (int it = 0; it < iterations && std::isfinite(err); ++it) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (Eigen::Index i = 0; i < p3d.cols(); ++i) {
      const Eigen::Vector3d rx = pose.rotation * p3d.col(i);
      const Eigen::Vector3d xc = rx + pose.translation;
      const double iz = 1.0 / xc.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << cam.focal * iz, 0.0, -cam.focal * xc.x() * iz * iz,
               0.0, cam.focal * iz, -cam.focal * xc.y() * iz * iz;
      Eigen::Matrix3d skew;
      skew << 0.0, -rx.z(), rx.y(), rx.z(), 0.0, -rx.x(), -rx.y(), rx.x(), 0.0;
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = -dproj * skew;
      j.rightCols<3>() = dproj;
      const Eigen::Vector2d r =
          cam.focal * xc.head<2>() * iz + cam.principal_point - p2d.col(i);
      jtj.noalias() += j.transpose() * j;
      jtr.noalias() += j.transpose() * r;
    }
    const Eigen::Matrix<double, 6, 1> step = jtj.ldlt().solve(-jtr);
    if (!step.allFinite()) break;
    Pose next = pose;
    next.rotation = from_rodrigues(step.head<3>()) * pose.rotation;
    next.translation += step.tail<3>();
    const double next_err = rms_or_inf(p2d, p3d, next, cam);
    if (!(next_err <= err)) break;
    pose = next;
    err = next_err;
    if (step.norm() < 1e-15) break;
  }
  // Re-project onto SO(3) to scrub accumulated drift.
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(pose.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  pose.rotation = svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace epnp_detail

/// Recovers the model-to-camera transform from 2D-3D correspondences with
/// EPnP (4 control points, 3 for planar data), then polishes it with
/// Gauss-Newton on the reprojection error.
inline Pose estimate_pose(const Eigen::Matrix2Xd& p2d, const Eigen::Matrix3Xd& p3d,
                          const CameraIntrinsics& cam, const PoseOptions& opts = {}) {
  using namespace epnp_detail;
  require(p2d.cols() == p3d.cols(), "2D and 3D point counts differ");
  require(p2d.allFinite() && p3d.allFinite(), "correspondences contain non-finite values");
  const auto n = p3d.cols();
  if (n < 6)
    fail(ErrorCode::kInsufficientCorrespondences,
         "EPnP needs at least 6 correspondences, got " + std::to_string(n));

  const Eigen::Vector3d centroid = p3d.rowwise().mean();
  const Eigen::Matrix3Xd centered = p3d.colwise() - centroid;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> pca(centered * centered.transpose() /
                                                     static_cast<double>(n));
  // Ascending eigenvalues; singular values of the centered cloud scale with sqrt.
  const Eigen::Vector3d sv = pca.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  if (!(sv[2] > 0.0) || sv[1] < opts.planar_ratio * sv[2])
    fail(ErrorCode::kDegenerateConfiguration, "3D points are collinear or coincident");
  const bool planar = sv[0] < opts.planar_ratio * sv[2];

  Problem pb;
  pb.controls = planar ? 3 : 4;
  const int axes = pb.controls - 1;
  pb.world_controls.resize(3, pb.controls);
  pb.world_controls.col(0) = centroid;
  Eigen::MatrixXd basis(3, axes);
  for (int j = 0; j < axes; ++j) {
    basis.col(j) = sv[2 - j] * pca.eigenvectors().col(2 - j);
    pb.world_controls.col(j + 1) = centroid + basis.col(j);
  }
  const Eigen::MatrixXd coords = basis.completeOrthogonalDecomposition().solve(centered);  // axes x n
  pb.alphas.resize(n, pb.controls);
  pb.alphas.col(0) = Eigen::VectorXd::Ones(n) - coords.colwise().sum().transpose();
  pb.alphas.rightCols(axes) = coords.transpose();

  const int unknowns = 3 * pb.controls;
  Eigen::MatrixXd m(2 * n, unknowns);
  m.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double du = cam.principal_point.x() - p2d(0, i);
    const double dv = cam.principal_point.y() - p2d(1, i);
    for (int j = 0; j < pb.controls; ++j) {
      const double a = pb.alphas(i, j);
      m(2 * i, 3 * j) = a * cam.focal;
      m(2 * i, 3 * j + 2) = a * du;
      m(2 * i + 1, 3 * j + 1) = a * cam.focal;
      m(2 * i + 1, 3 * j + 2) = a * dv;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.transpose() * m);
  if (eig.info() != Eigen::Success)
    fail(ErrorCode::kDegenerateConfiguration, "eigen-decomposition of the EPnP system failed");
  const int betas = planar ? 3 : 4;
  for (int k = 0; k < betas; ++k) {
    pb.null_vectors.push_back(
        Eigen::Map<const Eigen::MatrixXd>(eig.eigenvectors().col(k).data(), 3, pb.controls));
  }
  for (int a = 0; a < pb.controls; ++a)
    for (int b = a + 1; b < pb.controls; ++b) pb.pairs.emplace_back(a, b);
  pb.rho.resize(static_cast<Eigen::Index>(pb.pairs.size()));
  for (std::size_t r = 0; r < pb.pairs.size(); ++r)
    pb.rho[static_cast<Eigen::Index>(r)] = pair_diff(pb.world_controls, pb.pairs[r]).squaredNorm();

  using Products = std::vector<std::pair<int, int>>;
  std::vector<std::pair<int, Products>> candidates = {
      {1, {{0, 0}}},
      {2, {{0, 0}, {0, 1}, {1, 1}}},
  };
  if (planar) {
    candidates.push_back({3, {{0, 0}, {0, 1}, {0, 2}}});
  } else {
    candidates.push_back({3, {{0, 0}, {0, 1}, {1, 1}, {0, 2}, {1, 2}, {2, 2}}});
    candidates.push_back({4, {{0, 0}, {0, 1}, {0, 2}, {0, 3}}});
  }

  Pose best;
  double best_err = std::numeric_limits<double>::infinity();
  for (const auto& [count, products] : candidates) {
    Eigen::VectorXd beta = linearized_betas(pb, count, products);
    refine_betas(pb, beta);
    const Pose pose = pose_from_betas(pb, beta, p3d);
    const double err = rms_or_inf(p2d, p3d, pose, cam);
    if (err < best_err) {
      best_err = err;
      best = pose;
    }
  }
  if (!std::isfinite(best_err))
    fail(ErrorCode::kDegenerateConfiguration, "no EPnP candidate places the points in front of the camera");
  refine_pose(p2d, p3d, cam, best, opts.refine_iterations);
  return best;
}

}  // namespace faceswap
