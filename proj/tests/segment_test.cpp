#include <random>

#include <gtest/gtest.h>

#include "faceswap/segment.hpp"
#include "faceswap/synthetic.hpp"
#include "test_util.hpp"

namespace fs = faceswap;

namespace {

fs::Mask random_mask(std::mt19937_64& rng, int w, int h, double p = 0.5) {
  std::bernoulli_distribution b(p);
  fs::Mask m(w, h);
  for (auto& v : m.labels) v = b(rng) ? 1 : 0;
  return m;
}

struct Counts {
  double both = 0, either = 0, agree = 0, gt = 0;
};

Counts count(const fs::Mask& a, const fs::Mask& b) {
  Counts c;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      const bool p = a.at(x, y), g = b.at(x, y);
      if (p && g) ++c.both;
      if (p || g) ++c.either;
      if (p == g) ++c.agree;
      if (g) ++c.gt;
    }
  return c;
}

fs::CameraIntrinsics unit_camera(int w, int h) {
  fs::CameraIntrinsics cam;
  cam.width = w;
  cam.height = h;
  cam.focal = 100.0;
  cam.principal_point = {0.0, 0.0};
  return cam;
}

fs::Pose at_depth(double z) {
  fs::Pose p;
  p.translation = {0, 0, z};
  return p;
}

// Axis-aligned quad in the plane z, two triangles.
void add_quad(fs::MeshOccluder& occ, double x0, double y0, double x1, double y1, double z) {
  const auto base = static_cast<std::uint32_t>(occ.vertices.cols());
  occ.vertices.conservativeResize(3, occ.vertices.cols() + 4);
  occ.vertices.rightCols(4) << x0, x1, x1, x0, y0, y0, y1, y1, z, z, z, z;
  occ.triangles.push_back({base, base + 1, base + 2});
  occ.triangles.push_back({base, base + 2, base + 3});
}

}  // namespace

TEST(Metrics, TrivialCases) {
  fs::Mask a(4, 4), b(4, 4);
  for (int x = 0; x < 4; ++x) {
    a.at(x, 0) = 1;
    a.at(x, 1) = 1;
    b.at(x, 1) = 1;
    b.at(x, 2) = 1;
  }
  EXPECT_EQ(fs::iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(fs::iou(a, b), 1.0 / 3.0);
  EXPECT_EQ(fs::iou(fs::Mask(4, 4), fs::Mask(4, 4)), 1.0);
  fs::Mask c(4, 4);
  c.at(0, 3) = 1;
  EXPECT_EQ(fs::iou(a, c), 0.0);
  fs::Mask not_a = a;
  for (auto& v : not_a.labels) v = !v;
  EXPECT_EQ(fs::global_accuracy(a, a), 1.0);
  EXPECT_EQ(fs::global_accuracy(not_a, a), 0.0);
  EXPECT_EQ(fs::ave_face_recall(fs::Mask(4, 4, true), a), 1.0);
  EXPECT_EQ(fs::ave_face_recall(c, a), 0.0);
  EXPECT_FS_ERROR(fs::ave_face_recall(a, fs::Mask(4, 4)), fs::ErrorCode::kUndefinedRecall);
  EXPECT_FS_ERROR(fs::iou(a, fs::Mask(4, 5)), fs::ErrorCode::kInvalidArgument);
}

TEST(Metrics, RecallOfHundredPixels) {
  fs::Mask gt(10, 10, true), pred(10, 10, true);
  for (int i = 0; i < 6; ++i) pred.at(i, 9) = 0;
  EXPECT_DOUBLE_EQ(fs::ave_face_recall(pred, gt), 0.94);
}

TEST(Metrics, MatchPixelCountsAndAreSymmetric) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_mask(rng, 32, 32, 0.3 + 0.004 * trial);
    const auto b = random_mask(rng, 32, 32, 0.6);
    const auto c = count(a, b);
    EXPECT_EQ(fs::iou(a, b), c.both / c.either);
    EXPECT_EQ(fs::global_accuracy(a, b), c.agree / 1024.0);
    EXPECT_EQ(fs::ave_face_recall(a, b), c.both / c.gt);
    EXPECT_EQ(fs::iou(a, b), fs::iou(b, a));
    EXPECT_EQ(fs::global_accuracy(a, b), fs::global_accuracy(b, a));
  }
}

TEST(Metrics, DatasetMeanIsUnweighted) {
  fs::Mask gt_small(2, 2), gt_big(10, 10, true);
  gt_small.at(0, 0) = 1;
  const auto s = fs::mean_scores({{fs::Mask(2, 2), gt_small}, {gt_big, gt_big}});
  EXPECT_DOUBLE_EQ(s.ave_face, 0.5);
  EXPECT_DOUBLE_EQ(s.iou, 0.5);
  EXPECT_EQ(s.images, 2u);
}

TEST(MeshOcclusion, BehindFaceLeavesMaskAlone) {
  fs::Image img(40, 40, 90);
  fs::Mask mask(40, 40, true);
  fs::MeshOccluder occ;
  add_quad(occ, 5, 5, 25, 25, 60);  // depth 160
  fs::FaceSurface face;
  fs::MeshOccluder face_quad;
  add_quad(face_quad, 0, 0, 40, 40, 0);  // depth 100
  face.coords = face_quad.vertices;
  face.triangles = face_quad.triangles;
  // Front-facing winding for the face surface.
  for (auto& t : face.triangles) std::swap(t[1], t[2]);
  const auto out = fs::augment_mesh_occlusion(img, mask, occ, at_depth(100), unit_camera(40, 40), &face);
  EXPECT_EQ(out.mask, mask);
  EXPECT_EQ(out.image, img);
}

TEST(MeshOcclusion, FullCoverEmptiesMask) {
  fs::Image img(30, 30, 90);
  fs::Mask mask(30, 30);
  for (int y = 5; y < 20; ++y)
    for (int x = 5; x < 20; ++x) mask.at(x, y) = 1;
  fs::MeshOccluder occ;
  add_quad(occ, -10, -10, 50, 50, -20);
  const auto out = fs::augment_mesh_occlusion(img, mask, occ, at_depth(100), unit_camera(30, 30));
  EXPECT_TRUE(out.mask.empty());
}

TEST(MeshOcclusion, SunglassesRemoveFootprintIntersectMask) {
  std::mt19937_64 rng(4);
  fs::Image img(60, 40, 120);
  const auto mask = random_mask(rng, 60, 40, 0.7);
  fs::MeshOccluder glasses;
  glasses.color = {10, 10, 10};
  add_quad(glasses, 8.3, 10.2, 26.7, 22.9, 0);
  add_quad(glasses, 32.1, 10.2, 50.4, 22.9, 0);
  const auto out = fs::augment_mesh_occlusion(img, mask, glasses, at_depth(100), unit_camera(60, 40));
  // Independent footprint: pixel centers inside either rectangle (none of
  // the chosen edges pass through a pixel center).
  auto in_lens = [](int x, int y) {
    return (y > 10.2 && y < 22.9) && ((x > 8.3 && x < 26.7) || (x > 32.1 && x < 50.4));
  };
  std::size_t expected_removed = 0;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 60; ++x) {
      if (mask.at(x, y) && in_lens(x, y)) ++expected_removed;
      EXPECT_EQ(out.mask.at(x, y), mask.at(x, y) && !in_lens(x, y));
      EXPECT_EQ(out.image.at(x, y, 0), in_lens(x, y) ? 10 : 120);
    }
  EXPECT_EQ(mask.count() - out.mask.count(), expected_removed);
}

TEST(HandOverlay, TransparentIsIdentityOpaqueClears) {
  std::mt19937_64 rng(5);
  fs::Image img(20, 20, 50);
  const auto mask = random_mask(rng, 20, 20);
  fs::PatchOccluder hand{fs::Image(30, 30, 200), std::vector<double>(900, 0.0)};
  auto out = fs::augment_hand_overlay(img, mask, hand, -5, -5);
  EXPECT_EQ(out.image, img);
  EXPECT_EQ(out.mask, mask);
  std::fill(hand.alpha.begin(), hand.alpha.end(), 1.0);
  out = fs::augment_hand_overlay(img, mask, hand, -5, -5);
  EXPECT_TRUE(out.mask.empty());
  EXPECT_EQ(out.image, fs::Image(20, 20, 200));
}

TEST(HandOverlay, CheckerRemovesOpaqueCellsOnly) {
  std::mt19937_64 rng(6);
  fs::Image img(32, 32, 0);
  const auto mask = random_mask(rng, 32, 32, 0.6);
  fs::PatchOccluder hand{fs::Image(16, 16, 255), std::vector<double>(256)};
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) hand.alpha[y * 16 + x] = ((x / 4 + y / 4) % 2) ? 0.75 : 0.5;
  const int px = 24, py = 10;  // partly off the right edge
  const auto out = fs::augment_hand_overlay(img, mask, hand, px, py);
  std::size_t removed = 0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (px + x < 32 && hand.alpha[y * 16 + x] > 0.5 && mask.at(px + x, py + y)) ++removed;
  EXPECT_EQ(mask.count() - out.mask.count(), removed);
  for (std::size_t i = 0; i < mask.labels.size(); ++i) EXPECT_LE(out.mask.labels[i], mask.labels[i]);
  EXPECT_EQ(out.image.at(24, 10, 0), fs::quantize(0.5 * 255));
}

TEST(Regions, UniformImageIsOneRegion) {
  const auto r = fs::propose_regions(fs::Image(17, 11, 33));
  EXPECT_EQ(r.count, 1u);
}

TEST(Regions, TwoHalvesGiveTwoRegions) {
  fs::Image img(20, 10, 30);
  for (int y = 0; y < 10; ++y)
    for (int x = 10; x < 20; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = 220;
  const auto r = fs::propose_regions(img);
  EXPECT_EQ(r.count, 2u);
  EXPECT_EQ(r.at(0, 0), 0u);
  EXPECT_EQ(r.at(19, 9), 1u);
  r.validate();
}

TEST(Regions, PartitionAndMonotoneInThreshold) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> d(0, 60);
  fs::Image img(24, 24);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(d(rng));
  std::uint32_t prev = 0;
  for (double t : {200.0, 80.0, 40.0, 20.0, 10.0, 0.0}) {
    const auto r = fs::propose_regions(img, t);
    r.validate();
    std::vector<std::size_t> sizes(r.count, 0);
    for (auto id : r.ids) ++sizes[id];
    std::size_t total = 0;
    for (auto s : sizes) total += s;
    EXPECT_EQ(total, 24u * 24u);
    EXPECT_GE(r.count, prev);
    prev = r.count;
  }
  EXPECT_EQ(fs::propose_regions(img, 20.0), fs::propose_regions(img, 20.0));
}

TEST(AssembleMask, SelectionSemantics) {
  fs::RegionMap r;
  r.width = 4;
  r.height = 2;
  r.count = 3;
  r.ids = {0, 0, 1, 1, 2, 2, 2, 1};
  EXPECT_EQ(fs::assemble_mask(r, {0, 1, 2}), fs::Mask(4, 2, true));
  EXPECT_EQ(fs::assemble_mask(r, {}), fs::Mask(4, 2));
  const auto m1 = fs::assemble_mask(r, {0});
  const auto m12 = fs::assemble_mask(r, {0, 2});
  const auto m2 = fs::assemble_mask(r, {2});
  for (std::size_t i = 0; i < m12.labels.size(); ++i) EXPECT_EQ(m12.labels[i], m1.labels[i] | m2.labels[i]);
  std::set<std::uint32_t> sel = {1};
  sel.insert(2);
  sel.erase(2);
  EXPECT_EQ(fs::assemble_mask(r, sel), fs::assemble_mask(r, {1}));
  EXPECT_EQ(fs::selection_from_mask(r, m12), (std::set<std::uint32_t>{0, 2}));
  EXPECT_FS_ERROR(fs::assemble_mask(r, {3}), fs::ErrorCode::kInvalidArgument);
}
