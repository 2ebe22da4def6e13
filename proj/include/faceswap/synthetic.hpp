#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "faceswap/model.hpp"

namespace faceswap {

// Synthetic stand-in for a licensed face model. The mean shape is the front
// part of an ellipsoid with a nose bump, meshed as a (u, v) grid.
namespace synthetic_detail {

struct Grid {
  Eigen::Index cols = 0;
  Eigen::Index rows = 0;  // including a trailing partial row
};

inline Grid grid_for(Eigen::Index n) {
  Grid g;
  g.cols = static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(n))));
  g.rows = (n + g.cols - 1) / g.cols;
  return g;
}

inline Eigen::Vector2d grid_uv(Eigen::Index i, const Grid& g) {
  const auto r = i / g.cols;
  const auto c = i % g.cols;
  return {-1.0 + 2.0 * static_cast<double>(c) / static_cast<double>(g.cols - 1),
          -1.0 + 2.0 * static_cast<double>(r) / static_cast<double>(g.rows - 1)};
}

inline Eigen::Vector3d surface_point(const Eigen::Vector2d& uv) {
  constexpr double kAzimuth = 80.0 * std::numbers::pi / 180.0;
  constexpr double kElevation = 65.0 * std::numbers::pi / 180.0;
  constexpr double kA = 75.0, kB = 100.0, kC = 70.0;
  const double theta = uv.x() * kAzimuth;
  const double phi = uv.y() * kElevation;
  Eigen::Vector3d p(kA * std::sin(theta) * std::cos(phi), kB * std::sin(phi),
                    -kC * std::cos(theta) * std::cos(phi));
  const double d2 = p.x() * p.x() + (p.y() - 10.0) * (p.y() - 10.0);
  p.z() -= 20.0 * std::exp(-d2 / (2.0 * 14.0 * 14.0));
  return p;
}

/// Rounds a direction to float-representable entries whose squared norm is
/// 1 to ~1e-13. The last entry is reserved as a small slack term absorbing
/// the rounding residual of all other entries.
inline Eigen::VectorXd float_unit_column(Eigen::VectorXd v) {
  const auto n = v.size();
  constexpr double kSlack = 1e-3;
  v[n - 1] = 0.0;
  v *= std::sqrt(1.0 - kSlack * kSlack) / v.norm();
  long double sum = 0.0L;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    v[i] = static_cast<double>(static_cast<float>(v[i]));
    sum += static_cast<long double>(v[i]) * v[i];
  }
  v[n - 1] = static_cast<double>(static_cast<float>(std::sqrt(static_cast<double>(1.0L - sum))));
  return v;
}

inline Eigen::VectorXd smooth_field(const std::vector<Eigen::Vector2d>& uv, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, uv.size() - 1);
  std::uniform_real_distribution<double> width(0.25, 0.6);
  std::normal_distribution<double> amp(0.0, 1.0);
  Eigen::VectorXd field = Eigen::VectorXd::Zero(3 * static_cast<Eigen::Index>(uv.size()));
  for (int bump = 0; bump < 5; ++bump) {
    const Eigen::Vector2d center = uv[pick(rng)];
    const double w = width(rng);
    const Eigen::Vector3d a(amp(rng), amp(rng), amp(rng));
    for (std::size_t i = 0; i < uv.size(); ++i) {
      const double k = std::exp(-(uv[i] - center).squaredNorm() / (2.0 * w * w));
      field.segment<3>(3 * static_cast<Eigen::Index>(i)) += k * a;
    }
  }
  return field;
}

/// 68-point layout in grid (u, v) space, following the usual ordering:
/// jaw 0-16, brows 17-26, nose 27-35, eyes 36-47, mouth 48-67.
inline std::vector<Eigen::Vector2d> ibug68_template() {
  constexpr double pi = std::numbers::pi;
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 17; ++i) {
    const double s = pi * i / 16.0;
    pts.emplace_back(-0.95 * std::cos(s), -0.1 + 1.05 * std::sin(s));
  }
  for (int side = -1; side <= 1; side += 2) {
    for (int i = 0; i < 5; ++i) {
      const double t = i / 4.0;
      const double u = side < 0 ? -0.7 + 0.55 * t : 0.15 + 0.55 * t;
      const double arch = 0.08 * std::sin(pi * t);
      pts.emplace_back(u, -0.48 - arch);
    }
  }
  for (int i = 0; i < 4; ++i) pts.emplace_back(0.0, -0.3 + 0.11 * i);
  for (int i = 0; i < 5; ++i) pts.emplace_back(-0.2 + 0.1 * i, 0.15 + 0.03 * std::sin(pi * i / 4.0));
  for (int side = -1; side <= 1; side += 2) {
    for (int i = 0; i < 6; ++i) {
      const double a = pi + 2.0 * pi * i / 6.0;
      pts.emplace_back(0.4 * side + 0.16 * std::cos(a), -0.3 + 0.07 * std::sin(a));
    }
  }
  for (int i = 0; i < 12; ++i) {
    const double a = pi + 2.0 * pi * i / 12.0;
    pts.emplace_back(0.35 * std::cos(a), 0.45 + 0.13 * std::sin(a));
  }
  for (int i = 0; i < 8; ++i) {
    const double a = pi + 2.0 * pi * i / 8.0;
    pts.emplace_back(0.24 * std::cos(a), 0.45 + 0.05 * std::sin(a));
  }
  return pts;
}

}  // namespace synthetic_detail

/// Landmark mapping matching generate_synthetic_model for the same N.
/// Each template point is assigned the nearest not-yet-used grid vertex.
inline LandmarkMapping synthetic_landmark_mapping(Eigen::Index vertex_count) {
  require(vertex_count >= 68, "synthetic model needs N >= 68 for the 68-point mapping");
  const auto grid = synthetic_detail::grid_for(vertex_count);
  std::vector<bool> used(static_cast<std::size_t>(vertex_count), false);
  LandmarkMapping mapping;
  for (const auto& target : synthetic_detail::ibug68_template()) {
    Eigen::Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < vertex_count; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      const double d = (synthetic_detail::grid_uv(i, grid) - target).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    mapping.vertex_indices.push_back(static_cast<std::uint32_t>(best));
  }
  return mapping;
}

/// Deterministic synthetic model. All stored values are exactly
/// representable as 32-bit floats, so they survive the model file format
/// unchanged; basis columns have unit norm.
inline MorphableModel generate_synthetic_model(std::uint64_t seed, Eigen::Index vertex_count,
                                               Eigen::Index shape_dim, Eigen::Index expr_dim) {
  require(vertex_count >= 68, "synthetic model needs N >= 68");
  require(shape_dim >= 1 && expr_dim >= 1, "Ks and Ke must be >= 1");
  using namespace synthetic_detail;
  const auto grid = grid_for(vertex_count);
  std::mt19937_64 rng(seed);

  MorphableModel m;
  std::vector<Eigen::Vector2d> uv(static_cast<std::size_t>(vertex_count));
  Eigen::Matrix3Xd positions(3, vertex_count);
  for (Eigen::Index i = 0; i < vertex_count; ++i) {
    uv[static_cast<std::size_t>(i)] = grid_uv(i, grid);
    positions.col(i) = surface_point(uv[static_cast<std::size_t>(i)]);
  }
  m.mean_shape = positions.reshaped().cast<float>().cast<double>();

  m.shape_basis.resize(3 * vertex_count, shape_dim);
  for (Eigen::Index k = 0; k < shape_dim; ++k)
    m.shape_basis.col(k) = float_unit_column(smooth_field(uv, rng));
  m.expr_basis.resize(3 * vertex_count, expr_dim);
  for (Eigen::Index k = 0; k < expr_dim; ++k)
    m.expr_basis.col(k) = float_unit_column(smooth_field(uv, rng));

  std::uniform_real_distribution<double> sigma(15.0, 40.0);
  m.expr_sigma.resize(expr_dim);
  for (Eigen::Index k = 0; k < expr_dim; ++k)
    m.expr_sigma[k] = static_cast<double>(static_cast<float>(sigma(rng)));

  auto idx = [&](Eigen::Index r, Eigen::Index c) -> Eigen::Index {
    if (c >= grid.cols) return -1;
    const auto i = r * grid.cols + c;
    return i < vertex_count ? i : -1;
  };
  for (Eigen::Index r = 0; r + 1 < grid.rows; ++r) {
    for (Eigen::Index c = 0; c + 1 < grid.cols; ++c) {
      const auto a = idx(r, c), b = idx(r + 1, c), d = idx(r, c + 1), e = idx(r + 1, c + 1);
      if (a >= 0 && b >= 0 && d >= 0)
        m.triangles.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                               static_cast<std::uint32_t>(d)});
      if (d >= 0 && b >= 0 && e >= 0)
        m.triangles.push_back({static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(b),
                               static_cast<std::uint32_t>(e)});
    }
  }
  m.convention = "ibug68";
  return m;
}

}  // namespace faceswap
