#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "faceswap/bvls.hpp"
#include "faceswap/error.hpp"
#include "faceswap/model.hpp"
#include "faceswap/pose.hpp"

namespace faceswap {

/// Positions (0-based, into the landmark list) that survive the
/// head-rotation visibility check.
struct VisibilityFilter {
  std::vector<std::uint32_t> visible_indices;
};

/// Keeps landmark i iff its vertex normal, rotated into the camera frame,
/// points toward the camera (negative z).
inline VisibilityFilter visible_landmarks(const LandmarkMapping& mapping, const Vertices& vertices,
                                          const Pose& pose) {
  require(vertices.normals.has_value(), "visibility check needs vertex normals");
  const auto& normals = *vertices.normals;
  require(normals.cols() == vertices.size(), "normal count must match vertex count");
  VisibilityFilter out;
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    const auto idx = mapping.vertex_indices[i];
    require(idx < static_cast<std::uint64_t>(vertices.size()), "landmark index out of range");
    const double nz = pose.rotation.row(2).dot(normals.col(idx));
    if (nz < 0.0) out.visible_indices.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

struct ExpressionFit {
  ExpressionCoeffs gamma;
  std::vector<std::uint32_t> visible;
  double residual = 0.0;  // squared, in the solver's (pixel-scaled) units
  bool regularized = false;
};

struct ExpressionOptions {
  double bound_sigmas = 3.0;
  double tikhonov = 1e-6;
};

/// Builds the linear system tying gamma to the visible landmarks under a
/// fixed pose. Each landmark contributes two rows of
///   f * X_c - (p - c) * Z_c = 0
/// (exact for the pinhole model), divided by the landmark's neutral depth so
/// residuals are in pixels.
inline BoundedLLSProblem expression_system(const MorphableModel& model, const ShapeCoeffs& alpha,
                                           const Pose& pose, const CameraIntrinsics& cam,
                                           const Eigen::Matrix2Xd& p2d, const LandmarkMapping& mapping,
                                           const std::vector<std::uint32_t>& visible,
                                           const ExpressionOptions& opts = {}) {
  require(alpha.alpha.size() == model.shape_dim(), "alpha length must equal model Ks");
  require(p2d.cols() == static_cast<Eigen::Index>(mapping.size()),
          "landmark count must match mapping size");
  const Eigen::VectorXd neutral = select_landmark_rows(model.mean_shape, mapping) +
                                  select_landmark_rows(model.shape_basis, mapping) * alpha.alpha;
  const Eigen::MatrixXd we = select_landmark_rows(model.expr_basis, mapping);
  const auto ke = model.expr_dim();

  const auto rows = static_cast<Eigen::Index>(2 * visible.size());
  BoundedLLSProblem pb;
  pb.design.resize(rows, ke);
  pb.rhs.resize(rows);
  Eigen::Index r = 0;
  for (auto i : visible) {
    const Eigen::Vector3d xc =
        pose.rotation * neutral.segment<3>(3 * static_cast<Eigen::Index>(i)) + pose.translation;
    if (!(xc.z() > 0.0)) throw BehindCameraError(i);
    const Eigen::Matrix<double, 3, Eigen::Dynamic> rw =
        pose.rotation * we.middleRows(3 * static_cast<Eigen::Index>(i), 3);
    for (int axis = 0; axis < 2; ++axis) {
      const double centered = p2d(axis, i) - cam.principal_point[axis];
      pb.design.row(r) = (cam.focal * rw.row(axis) - centered * rw.row(2)) / xc.z();
      pb.rhs[r] = (centered * xc.z() - cam.focal * xc[axis]) / xc.z();
      ++r;
    }
  }
  pb.lower = -opts.bound_sigmas * model.expr_sigma;
  pb.upper = opts.bound_sigmas * model.expr_sigma;
  return pb;
}

inline ExpressionFit fit_expression(const MorphableModel& model, const ShapeCoeffs& alpha,
                                    const Pose& pose, const CameraIntrinsics& cam,
                                    const Eigen::Matrix2Xd& p2d, const LandmarkMapping& mapping,
                                    const ExpressionOptions& opts = {}) {
  Vertices neutral = synthesize_shape(model, alpha, ExpressionCoeffs::zero(model));
  attach_normals(neutral, model.triangles);
  ExpressionFit fit;
  fit.visible = visible_landmarks(mapping, neutral, pose).visible_indices;
  if (fit.visible.empty()) fail(ErrorCode::kNoVisibleLandmarks, "every landmark is back-facing");

  BoundedLLSProblem pb = expression_system(model, alpha, pose, cam, p2d, mapping, fit.visible, opts);
  const auto ke = model.expr_dim();
  if (pb.design.rows() < ke) {
    // Underdetermined: add a small penalty on gamma / sigma.
    fit.regularized = true;
    const auto m = pb.design.rows();
    pb.design.conservativeResize(m + ke, Eigen::NoChange);
    pb.rhs.conservativeResize(m + ke);
    pb.design.bottomRows(ke) =
        (std::sqrt(opts.tikhonov) * model.expr_sigma.cwiseInverse()).asDiagonal().toDenseMatrix();
    pb.rhs.tail(ke).setZero();
  }
  fit.gamma.gamma = solve_bounded_lls(pb);
  fit.residual = pb.objective(fit.gamma.gamma);
  return fit;
}

}  // namespace faceswap
