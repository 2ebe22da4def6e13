#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "faceswap/error.hpp"

namespace faceswap {

using Triangle = std::array<std::uint32_t, 3>;

/// Linear 3D face model: mean shape plus identity and expression bases.
///
/// Coordinates are packed per vertex, so row 3*i+c of every basis holds
/// component c of vertex i.
struct MorphableModel {
  Eigen::VectorXd mean_shape;   // 3N
  Eigen::MatrixXd shape_basis;  // 3N x Ks
  Eigen::MatrixXd expr_basis;   // 3N x Ke
  Eigen::VectorXd expr_sigma;   // Ke, all positive
  std::vector<Triangle> triangles;
  std::string convention = "ibug68";

  Eigen::Index vertex_count() const { return mean_shape.size() / 3; }
  Eigen::Index shape_dim() const { return shape_basis.cols(); }
  Eigen::Index expr_dim() const { return expr_basis.cols(); }

  /// Throws invalid-argument when any structural invariant is broken.
  void validate() const {
    require(mean_shape.size() % 3 == 0 && mean_shape.size() > 0,
            "mean shape length must be a positive multiple of 3");
    const auto rows = mean_shape.size();
    require(shape_basis.rows() == rows, "shape basis row count mismatch");
    require(expr_basis.rows() == rows, "expression basis row count mismatch");
    require(shape_dim() >= 1 && expr_dim() >= 1, "basis dimensions must be >= 1");
    require(expr_sigma.size() == expr_dim(), "sigma length must equal Ke");
    for (Eigen::Index j = 0; j < expr_sigma.size(); ++j)
      require(expr_sigma[j] > 0.0, "expression sigma " + std::to_string(j) + " not positive");
    const auto n = static_cast<std::uint64_t>(vertex_count());
    for (std::size_t t = 0; t < triangles.size(); ++t)
      for (auto idx : triangles[t])
        require(idx < n, "triangle " + std::to_string(t) + " references vertex " +
                             std::to_string(idx) + " >= N");
  }

  friend bool operator==(const MorphableModel& a, const MorphableModel& b) {
    auto same = [](const auto& x, const auto& y) {
      return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
    };
    return same(a.mean_shape, b.mean_shape) && same(a.shape_basis, b.shape_basis) &&
           same(a.expr_basis, b.expr_basis) && same(a.expr_sigma, b.expr_sigma) &&
           a.triangles == b.triangles && a.convention == b.convention;
  }
};

struct ShapeCoeffs {
  Eigen::VectorXd alpha;

  static ShapeCoeffs zero(const MorphableModel& m) {
    return {Eigen::VectorXd::Zero(m.shape_dim())};
  }
};

struct ExpressionCoeffs {
  Eigen::VectorXd gamma;

  static ExpressionCoeffs zero(const MorphableModel& m) {
    return {Eigen::VectorXd::Zero(m.expr_dim())};
  }
};

/// Ordered landmark selector: landmark i is vertex vertex_indices[i].
struct LandmarkMapping {
  std::vector<std::uint32_t> vertex_indices;
  std::string convention = "ibug68";

  std::size_t size() const { return vertex_indices.size(); }

  void validate(Eigen::Index vertex_count) const {
    std::vector<std::uint32_t> sorted = vertex_indices;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "landmark mapping indices must be unique");
    for (std::size_t i = 0; i < vertex_indices.size(); ++i)
      require(vertex_indices[i] < static_cast<std::uint64_t>(vertex_count),
              "landmark " + std::to_string(i) + " maps to vertex " +
                  std::to_string(vertex_indices[i]) + " >= N");
  }
};

struct Vertices {
  Eigen::Matrix3Xd coords;
  std::optional<Eigen::Matrix3Xd> normals;

  Eigen::Index size() const { return coords.cols(); }
};

/// coords = mean + W_S * alpha + W_E * gamma.
inline Vertices synthesize_shape(const MorphableModel& model, const ShapeCoeffs& alpha,
                                 const ExpressionCoeffs& gamma) {
  require(alpha.alpha.size() == model.shape_dim(),
          "alpha has length " + std::to_string(alpha.alpha.size()) + ", model Ks is " +
              std::to_string(model.shape_dim()));
  require(gamma.gamma.size() == model.expr_dim(),
          "gamma has length " + std::to_string(gamma.gamma.size()) + ", model Ke is " +
              std::to_string(model.expr_dim()));
  Eigen::VectorXd flat = model.mean_shape;
  flat.noalias() += model.shape_basis * alpha.alpha;
  flat.noalias() += model.expr_basis * gamma.gamma;
  Vertices out;
  out.coords = Eigen::Map<const Eigen::Matrix3Xd>(flat.data(), 3, model.vertex_count());
  return out;
}

inline Eigen::Matrix3Xd select_landmarks(const Eigen::Matrix3Xd& coords,
                                         const LandmarkMapping& mapping) {
  Eigen::Matrix3Xd out(3, static_cast<Eigen::Index>(mapping.size()));
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    const auto idx = mapping.vertex_indices[i];
    require(idx < static_cast<std::uint64_t>(coords.cols()),
            "landmark " + std::to_string(i) + " index " + std::to_string(idx) +
                " out of range for " + std::to_string(coords.cols()) + " vertices");
    out.col(static_cast<Eigen::Index>(i)) = coords.col(idx);
  }
  return out;
}

inline Eigen::Matrix3Xd select_landmarks(const Vertices& vertices,
                                         const LandmarkMapping& mapping) {
  return select_landmarks(vertices.coords, mapping);
}

/// f(W): the 3L rows of a packed basis (or mean vector) belonging to the
/// landmark vertices, in mapping order.
template <typename Derived>
Eigen::Matrix<double, Eigen::Dynamic, Derived::ColsAtCompileTime> select_landmark_rows(
    const Eigen::MatrixBase<Derived>& packed, const LandmarkMapping& mapping) {
  Eigen::Matrix<double, Eigen::Dynamic, Derived::ColsAtCompileTime> out(
      3 * static_cast<Eigen::Index>(mapping.size()), packed.cols());
  const auto n = packed.rows() / 3;
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    const auto idx = mapping.vertex_indices[i];
    require(idx < static_cast<std::uint64_t>(n), "landmark index out of range");
    out.middleRows(3 * static_cast<Eigen::Index>(i), 3) =
        packed.middleRows(3 * static_cast<Eigen::Index>(idx), 3);
  }
  return out;
}

/// Area-weighted vertex normals. Triangles are wound so that
/// (b - a) x (c - a) points out of the surface.
inline Eigen::Matrix3Xd compute_vertex_normals(const Eigen::Matrix3Xd& coords,
                                               const std::vector<Triangle>& triangles) {
  Eigen::Matrix3Xd normals = Eigen::Matrix3Xd::Zero(3, coords.cols());
  for (const auto& t : triangles) {
    const Eigen::Vector3d a = coords.col(t[0]);
    const Eigen::Vector3d b = coords.col(t[1]);
    const Eigen::Vector3d c = coords.col(t[2]);
    const Eigen::Vector3d n = (b - a).cross(c - a);
    for (auto idx : t) normals.col(idx) += n;
  }
  for (Eigen::Index i = 0; i < normals.cols(); ++i) {
    const double len = normals.col(i).norm();
    if (len > 0.0) normals.col(i) /= len;
  }
  return normals;
}

inline void attach_normals(Vertices& v, const std::vector<Triangle>& triangles) {
  v.normals = compute_vertex_normals(v.coords, triangles);
}

}  // namespace faceswap
