#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "faceswap/error.hpp"
#include "faceswap/image.hpp"
#include "faceswap/model.hpp"
#include "faceswap/pose.hpp"
#include "faceswap/png_io.hpp"

namespace faceswap {

/// Per-vertex RGB in [0, 255] (unrounded) plus a flag telling whether the
/// vertex received a color at all.
struct VertexColors {
  Eigen::Matrix3Xd colors;
  std::vector<std::uint8_t> sampled;

  Eigen::Index size() const { return colors.cols(); }
  std::size_t sampled_count() const {
    return static_cast<std::size_t>(std::count(sampled.begin(), sampled.end(), 1));
  }
};

/// Bilinear lookup with pixel centers at integer coordinates. The caller
/// guarantees 0 <= x <= width-1 and 0 <= y <= height-1.
inline Eigen::Vector3d bilinear(const Image& image, double x, double y) {
  const int x0 = std::min(static_cast<int>(std::floor(x)), image.width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(y)), image.height - 1);
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = x - x0, fy = y - y0;
  Eigen::Vector3d out;
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - fx) * image.at(x0, y0, c) + fx * image.at(x1, y0, c);
    const double bottom = (1.0 - fx) * image.at(x0, y1, c) + fx * image.at(x1, y1, c);
    out[c] = (1.0 - fy) * top + fy * bottom;
  }
  return out;
}

/// A vertex is sampled when it faces the camera (normal against the
/// viewing ray), projects inside the image and lands on a mask-positive
/// pixel (nearest pixel center).
inline VertexColors sample_vertex_colors(const Image& image, const Vertices& vertices, const Pose& pose,
                                         const CameraIntrinsics& cam, const Mask& mask) {
  require(vertices.normals.has_value(), "color sampling needs vertex normals");
  require_same_size(image.width, image.height, mask.width, mask.height, "sample_vertex_colors");
  pose.validate();
  VertexColors out;
  out.colors = Eigen::Matrix3Xd::Zero(3, vertices.size());
  out.sampled.assign(static_cast<std::size_t>(vertices.size()), 0);
  for (Eigen::Index i = 0; i < vertices.size(); ++i) {
    const Eigen::Vector3d xc = pose.rotation * vertices.coords.col(i) + pose.translation;
    if (!(xc.z() > 0.0)) continue;
    const Eigen::Vector3d n = pose.rotation * vertices.normals->col(i);
    if (!(n.dot(xc) < 0.0)) continue;
    const double u = cam.focal * xc.x() / xc.z() + cam.principal_point.x();
    const double v = cam.focal * xc.y() / xc.z() + cam.principal_point.y();
    if (!(u >= 0.0 && v >= 0.0 && u <= image.width - 1 && v <= image.height - 1)) continue;
    const int px = static_cast<int>(std::lround(u)), py = static_cast<int>(std::lround(v));
    if (!mask.at(px, py)) continue;
    out.colors.col(i) = bilinear(image, u, v);
    out.sampled[static_cast<std::size_t>(i)] = 1;
  }
  return out;
}

/// Shared topology makes the transfer an index-wise copy.
inline VertexColors transfer_colors(const VertexColors& source, Eigen::Index target_vertex_count) {
  require(source.size() == target_vertex_count,
          "source has " + std::to_string(source.size()) + " vertices, target has " +
              std::to_string(target_vertex_count));
  require(source.sampled.size() == static_cast<std::size_t>(source.size()), "sampled flag count mismatch");
  return source;
}

struct RenderedLayer {
  int width = 0;
  int height = 0;
  std::vector<double> color;  // 3 per pixel, meaningful where covered
  std::vector<std::uint8_t> coverage;
  std::vector<double> depth;  // +inf where not covered

  RenderedLayer() = default;
  RenderedLayer(int w, int h)
      : width(w),
        height(h),
        color(static_cast<std::size_t>(w) * h * 3, 0.0),
        coverage(static_cast<std::size_t>(w) * h, 0),
        depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool covered(int x, int y) const { return coverage[index(x, y)] != 0; }
  Mask coverage_mask() const {
    Mask m(width, height);
    m.labels = coverage;
    return m;
  }
};

namespace render_detail {

struct ScreenVertex {
  double x, y, inv_z;
};

inline bool lex_less(const ScreenVertex& a, const ScreenVertex& b) {
  return a.x < b.x || (a.x == b.x && a.y < b.y);
}

/// Edge function evaluated in a canonical vertex order so that two
/// triangles sharing an edge get exactly opposite values.
inline double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  if (lex_less(b, a)) return -((a.x - b.x) * (py - b.y) - (a.y - b.y) * (px - b.x));
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

/// With interior on the positive side and y pointing down.
inline bool top_left(const ScreenVertex& a, const ScreenVertex& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

}  // namespace render_detail

/// Rasterizes a mesh with per-vertex colors into a canvas of the camera's
/// size. Triangles whose projected signed area is >= 0 are back-facing and
/// culled; triangles touching an unsampled vertex or a vertex behind the
/// camera are skipped. Depth test keeps the nearest fragment (first drawn
/// on exact ties). Pixels outside seg are never covered.
inline RenderedLayer render_mesh(const Eigen::Matrix3Xd& coords, const VertexColors& colors,
                                 const std::vector<Triangle>& triangles, const Pose& pose,
                                 const CameraIntrinsics& cam, const Mask& seg) {
  using render_detail::ScreenVertex;
  cam.validate();
  pose.validate();
  require(colors.size() == coords.cols(), "color count must match vertex count");
  require_same_size(cam.width, cam.height, seg.width, seg.height, "render_mesh");
  RenderedLayer layer(cam.width, cam.height);

  std::vector<ScreenVertex> sv(static_cast<std::size_t>(coords.cols()));
  std::vector<std::uint8_t> usable(sv.size(), 0);
  for (Eigen::Index i = 0; i < coords.cols(); ++i) {
    const Eigen::Vector3d xc = pose.rotation * coords.col(i) + pose.translation;
    if (!(xc.z() > 0.0)) continue;
    sv[static_cast<std::size_t>(i)] = {cam.focal * xc.x() / xc.z() + cam.principal_point.x(),
                                       cam.focal * xc.y() / xc.z() + cam.principal_point.y(), 1.0 / xc.z()};
    usable[static_cast<std::size_t>(i)] = colors.sampled[static_cast<std::size_t>(i)];
  }

  for (const auto& tri : triangles) {
    for (auto idx : tri) require(idx < sv.size(), "triangle references a missing vertex");
    if (!usable[tri[0]] || !usable[tri[1]] || !usable[tri[2]]) continue;
    std::array<std::uint32_t, 3> t = tri;
    const auto& a0 = sv[t[0]];
    const auto& b0 = sv[t[1]];
    const auto& c0 = sv[t[2]];
    const double area = (b0.x - a0.x) * (c0.y - a0.y) - (b0.y - a0.y) * (c0.x - a0.x);
    if (!(area < 0.0)) continue;  // back-facing or degenerate
    std::swap(t[1], t[2]);        // positive orientation for the edge tests
    const ScreenVertex& a = sv[t[0]];
    const ScreenVertex& b = sv[t[1]];
    const ScreenVertex& c = sv[t[2]];
    const double total = -area;

    const int x_lo = std::max(0, static_cast<int>(std::ceil(std::min({a.x, b.x, c.x}))));
    const int x_hi = std::min(cam.width - 1, static_cast<int>(std::floor(std::max({a.x, b.x, c.x}))));
    const int y_lo = std::max(0, static_cast<int>(std::ceil(std::min({a.y, b.y, c.y}))));
    const int y_hi = std::min(cam.height - 1, static_cast<int>(std::floor(std::max({a.y, b.y, c.y}))));
    const bool tl_a = render_detail::top_left(b, c);
    const bool tl_b = render_detail::top_left(c, a);
    const bool tl_c = render_detail::top_left(a, b);
    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        const double wa = render_detail::edge(b, c, x, y);
        const double wb = render_detail::edge(c, a, x, y);
        const double wc = render_detail::edge(a, b, x, y);
        if (wa < 0.0 || wb < 0.0 || wc < 0.0) continue;
        if ((wa == 0.0 && !tl_a) || (wb == 0.0 && !tl_b) || (wc == 0.0 && !tl_c)) continue;
        if (!seg.at(x, y)) continue;
        const double la = wa / total, lb = wb / total, lc = wc / total;
        const double depth = 1.0 / (la * a.inv_z + lb * b.inv_z + lc * c.inv_z);
        const auto p = layer.index(x, y);
        if (!(depth < layer.depth[p])) continue;
        layer.depth[p] = depth;
        layer.coverage[p] = 1;
        for (int ch = 0; ch < 3; ++ch)
          layer.color[3 * p + ch] = la * colors.colors(ch, t[0]) + lb * colors.colors(ch, t[1]) +
                                    lc * colors.colors(ch, t[2]);
      }
    }
  }
  return layer;
}

/// Covered pixels take the rounded layer color, the rest keep the target.
inline Image paste(const RenderedLayer& layer, const Image& target) {
  require_same_size(layer.width, layer.height, target.width, target.height, "paste");
  Image out = target;
  for (std::size_t p = 0; p < layer.coverage.size(); ++p)
    if (layer.coverage[p])
      for (int c = 0; c < 3; ++c) out.data[3 * p + c] = quantize(layer.color[3 * p + c]);
  return out;
}

/// Depth buffer as a 16-bit PNG, covered pixels mapped linearly from
/// [min, max] to [1, 65535] and uncovered ones to 0; the range goes to JSON.
inline std::pair<std::string, nlohmann::json> encode_depth_png(const RenderedLayer& layer) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t p = 0; p < layer.depth.size(); ++p)
    if (layer.coverage[p]) {
      lo = std::min(lo, layer.depth[p]);
      hi = std::max(hi, layer.depth[p]);
    }
  std::vector<std::uint16_t> values(layer.depth.size(), 0);
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t p = 0; p < layer.depth.size(); ++p)
    if (layer.coverage[p])
      values[p] = static_cast<std::uint16_t>(1 + std::lround((layer.depth[p] - lo) / span * 65534.0));
  nlohmann::json meta = {{"min", lo <= hi ? lo : 0.0}, {"max", lo <= hi ? hi : 0.0}};
  return {encode_png16(layer.width, layer.height, values), meta};
}

}  // namespace faceswap
