#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "faceswap/error.hpp"
#include "faceswap/image.hpp"
#include "faceswap/model.hpp"
#include "faceswap/pose.hpp"
#include "faceswap/render.hpp"

namespace faceswap {

inline double iou(const Mask& pred, const Mask& gt) {
  require_same_size(pred.width, pred.height, gt.width, gt.height, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const bool a = pred.labels[i] != 0, b = gt.labels[i] != 0;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double global_accuracy(const Mask& pred, const Mask& gt) {
  require_same_size(pred.width, pred.height, gt.width, gt.height, "global_accuracy");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) agree += (pred.labels[i] != 0) == (gt.labels[i] != 0);
  return static_cast<double>(agree) / static_cast<double>(pred.labels.size());
}

/// Fraction of ground-truth face pixels labeled face.
inline double ave_face_recall(const Mask& pred, const Mask& gt) {
  require_same_size(pred.width, pred.height, gt.width, gt.height, "ave_face_recall");
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    if (!gt.labels[i]) continue;
    ++total;
    hit += pred.labels[i] != 0;
  }
  if (total == 0) fail(ErrorCode::kUndefinedRecall, "ground-truth mask has no face pixels");
  return static_cast<double>(hit) / static_cast<double>(total);
}

struct SegmentationScores {
  double iou = 0.0;
  double global = 0.0;
  double ave_face = 0.0;
  std::size_t images = 0;
};

/// Unweighted per-image means, accumulated in input order.
inline SegmentationScores mean_scores(const std::vector<std::pair<Mask, Mask>>& pred_gt) {
  require(!pred_gt.empty(), "no images to score");
  SegmentationScores s;
  for (const auto& [pred, gt] : pred_gt) {
    s.iou += iou(pred, gt);
    s.global += global_accuracy(pred, gt);
    s.ave_face += ave_face_recall(pred, gt);
  }
  const double n = static_cast<double>(pred_gt.size());
  s.iou /= n;
  s.global /= n;
  s.ave_face /= n;
  s.images = pred_gt.size();
  return s;
}

/// Rigid object in model coordinates (e.g. sunglasses), painted flat.
struct MeshOccluder {
  Eigen::Matrix3Xd vertices;
  std::vector<Triangle> triangles;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();

  void validate() const {
    for (const auto& t : triangles)
      for (auto idx : t) require(idx < static_cast<std::uint64_t>(vertices.cols()), "occluder triangle index out of range");
  }
};

/// Alpha-matted image patch (e.g. a hand).
struct PatchOccluder {
  Image patch;
  std::vector<double> alpha;  // one per patch pixel, in [0, 1]

  void validate() const {
    require(alpha.size() == patch.pixel_count(), "alpha size must match patch");
    for (double a : alpha) require(a >= 0.0 && a <= 1.0, "alpha must lie in [0, 1]");
  }
};

struct Augmented {
  Image image;
  Mask mask;
};

/// Face surface the occluder is depth-tested against.
struct FaceSurface {
  Eigen::Matrix3Xd coords;
  std::vector<Triangle> triangles;
};

namespace segment_detail {

/// Renders both windings so the occluder shows from either side.
inline RenderedLayer flat_layer(const Eigen::Matrix3Xd& coords, const std::vector<Triangle>& tris,
                                const Eigen::Vector3d& color, const Pose& pose, const CameraIntrinsics& cam,
                                bool two_sided) {
  VertexColors vc;
  vc.colors = color.replicate(1, coords.cols());
  vc.sampled.assign(static_cast<std::size_t>(coords.cols()), 1);
  std::vector<Triangle> all = tris;
  if (two_sided)
    for (const auto& t : tris) all.push_back({t[0], t[2], t[1]});
  return render_mesh(coords, vc, all, pose, cam, Mask(cam.width, cam.height, true));
}

}  // namespace segment_detail

/// Pixels where the occluder is nearer than the face surface (or where
/// there is no face) are painted with the occluder color and dropped
/// from the mask.
inline Augmented augment_mesh_occlusion(const Image& image, const Mask& mask, const MeshOccluder& occ,
                                        const Pose& pose, const CameraIntrinsics& cam,
                                        const FaceSurface* face = nullptr) {
  require_same_size(image.width, image.height, mask.width, mask.height, "augment_mesh_occlusion");
  require_same_size(image.width, image.height, cam.width, cam.height, "augment_mesh_occlusion camera");
  occ.validate();
  const auto occ_layer = segment_detail::flat_layer(occ.vertices, occ.triangles, occ.color, pose, cam, true);
  RenderedLayer face_layer;
  if (face) face_layer = segment_detail::flat_layer(face->coords, face->triangles, Eigen::Vector3d::Zero(), pose, cam, false);
  Augmented out{image, mask};
  for (std::size_t p = 0; p < occ_layer.coverage.size(); ++p) {
    if (!occ_layer.coverage[p]) continue;
    if (face && face_layer.coverage[p] && !(occ_layer.depth[p] < face_layer.depth[p])) continue;
    out.mask.labels[p] = 0;
    for (int c = 0; c < 3; ++c) out.image.data[3 * p + c] = quantize(occ_layer.color[3 * p + c]);
  }
  return out;
}

/// Alpha-composites the patch with its top-left corner at position; the
/// part outside the image is clipped. Pixels with alpha > 0.5 leave the mask.
inline Augmented augment_hand_overlay(const Image& image, const Mask& mask, const PatchOccluder& hand,
                                      int pos_x, int pos_y) {
  require_same_size(image.width, image.height, mask.width, mask.height, "augment_hand_overlay");
  hand.validate();
  Augmented out{image, mask};
  for (int py = 0; py < hand.patch.height; ++py) {
    for (int px = 0; px < hand.patch.width; ++px) {
      const int x = pos_x + px, y = pos_y + py;
      if (!image.contains(x, y)) continue;
      const double a = hand.alpha[static_cast<std::size_t>(py) * hand.patch.width + px];
      if (a == 0.0) continue;
      for (int c = 0; c < 3; ++c)
        out.image.at(x, y, c) = quantize(a * hand.patch.at(px, py, c) + (1.0 - a) * image.at(x, y, c));
      if (a > 0.5) out.mask.at(x, y) = 0;
    }
  }
  return out;
}

/// Per-frame region proposals: 4-connected pixels whose RGB distance is at
/// most threshold are merged (single linkage). Lower thresholds give at
/// least as many regions. Ids are assigned in raster order of each
/// region's first pixel.
inline RegionMap propose_regions(const Image& image, double threshold = 24.0) {
  require(image.width > 0 && image.height > 0, "image must be non-empty");
  require(threshold >= 0.0, "threshold must be non-negative");
  const auto n = image.pixel_count();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  auto dist = [&](std::size_t p, std::size_t q) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(image.data[3 * p + c]) - image.data[3 * q + c];
      s += d * d;
    }
    return std::sqrt(s);
  };
  auto join = [&](std::size_t p, std::size_t q) {
    if (dist(p, q) > threshold) return;
    const auto a = find(p), b = find(q);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  const auto w = static_cast<std::size_t>(image.width);
  for (std::size_t p = 0; p < n; ++p) {
    if ((p % w) + 1 < w) join(p, p + 1);
    if (p + w < n) join(p, p + w);
  }
  RegionMap out;
  out.width = image.width;
  out.height = image.height;
  out.ids.resize(n);
  std::vector<std::uint32_t> label(n, UINT32_MAX);
  for (std::size_t p = 0; p < n; ++p) {
    const auto r = find(p);
    if (label[r] == UINT32_MAX) label[r] = out.count++;
    out.ids[p] = label[r];
  }
  return out;
}

/// Face iff the pixel's region is selected.
inline Mask assemble_mask(const RegionMap& regions, const std::set<std::uint32_t>& selected) {
  for (auto id : selected)
    require(id < regions.count, "region id " + std::to_string(id) + " does not exist (count " +
                                    std::to_string(regions.count) + ")");
  Mask out(regions.width, regions.height);
  for (std::size_t p = 0; p < regions.ids.size(); ++p) out.labels[p] = selected.count(regions.ids[p]) ? 1 : 0;
  return out;
}

/// Inverse of assemble_mask for masks that are unions of whole regions:
/// ids whose pixels are all face. Throws when a region is split.
inline std::set<std::uint32_t> selection_from_mask(const RegionMap& regions, const Mask& mask) {
  require_same_size(regions.width, regions.height, mask.width, mask.height, "selection_from_mask");
  std::vector<int> state(regions.count, -1);
  for (std::size_t p = 0; p < regions.ids.size(); ++p) {
    auto& s = state[regions.ids[p]];
    const int v = mask.labels[p] ? 1 : 0;
    if (s == -1) s = v;
    require(s == v, "mask splits region " + std::to_string(regions.ids[p]));
  }
  std::set<std::uint32_t> out;
  for (std::uint32_t r = 0; r < regions.count; ++r)
    if (state[r] == 1) out.insert(r);
  return out;
}

}  // namespace faceswap
