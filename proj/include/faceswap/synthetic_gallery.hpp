#pragma once

#include <cmath>
#include <numbers>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "faceswap/eval.hpp"
#include "faceswap/eval_io.hpp"
#include "faceswap/formats.hpp"
#include "faceswap/image.hpp"
#include "faceswap/model_io.hpp"
#include "faceswap/png_io.hpp"
#include "faceswap/pose.hpp"
#include "faceswap/render.hpp"
#include "faceswap/synthetic.hpp"

namespace faceswap {

/// One synthetic face: identity, expression, head pose and a smooth
/// per-vertex albedo.
struct SyntheticFace {
  ShapeCoeffs alpha;
  ExpressionCoeffs gamma;
  Pose pose;
  Eigen::Vector3d base_color;
  Eigen::Vector3d stripe;  // amplitude per channel
  double phase = 0.0;
};

struct RenderedFace {
  Image image;
  Mask mask;
  LandmarkSet landmarks;
};

/// Albedo as a function of mean-shape position, so every image of a
/// subject carries the same texture.
inline VertexColors synthetic_face_colors(const MorphableModel& model, const SyntheticFace& face) {
  const auto n = model.vertex_count();
  VertexColors out;
  out.colors.resize(3, n);
  out.sampled.assign(static_cast<std::size_t>(n), 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = model.mean_shape[3 * i], y = model.mean_shape[3 * i + 1];
    const double w = std::sin(x / 18.0 + face.phase) * std::cos(y / 25.0);
    for (int c = 0; c < 3; ++c)
      out.colors(c, i) = std::clamp(face.base_color[c] + face.stripe[c] * w, 0.0, 255.0);
  }
  return out;
}

inline Image synthetic_background(int width, int height, std::uint64_t seed) {
  std::mt19937_64 rng = eval_detail::seeded(seed, 7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = 40 + 120 * u(rng), b = 40 + 120 * u(rng), c = 40 + 120 * u(rng);
  const double fx = 0.02 + 0.05 * u(rng), fy = 0.02 + 0.05 * u(rng);
  Image img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double s = std::sin(fx * x) * std::cos(fy * y);
      img.at(x, y, 0) = quantize(a + 30 * s);
      img.at(x, y, 1) = quantize(b + 0.3 * y);
      img.at(x, y, 2) = quantize(c + 0.3 * x - 20 * s);
    }
  return img;
}

/// Renders the face over a background. The mask is the rendered coverage;
/// landmarks are the exact projections of the landmark vertices.
inline RenderedFace render_synthetic_face(const MorphableModel& model, const LandmarkMapping& mapping,
                                          const SyntheticFace& face, const CameraIntrinsics& cam,
                                          const Image& background) {
  const auto shape = synthesize_shape(model, face.alpha, face.gamma);
  const auto colors = synthetic_face_colors(model, face);
  const auto layer = render_mesh(shape.coords, colors, model.triangles, face.pose, cam,
                                 Mask(cam.width, cam.height, true));
  RenderedFace out;
  out.image = paste(layer, background);
  out.mask = layer.coverage_mask();
  out.landmarks.points = project(select_landmarks(shape, mapping), face.pose, cam).points;
  return out;
}

struct SyntheticGalleryOptions {
  std::uint64_t seed = 1;
  int subjects = 3;
  int images_per_subject = 2;
  int size = 160;
  Eigen::Index vertex_count = 2000;
  Eigen::Index shape_dim = 20;
  Eigen::Index expr_dim = 29;
  double max_yaw_degrees = 25.0;
};

struct SyntheticGallery {
  MorphableModel model;
  LandmarkMapping mapping;
  std::vector<std::string> refs;
  PairList pairs;
};

inline std::string synthetic_subject_name(int s) { return "S" + std::to_string(s + 1); }

/// Writes a small gallery: model.ffm, mapping.txt, pairs.csv and, per
/// image, `<subject>/<subject>_<k>.png` with landmarks, mask and alpha.
/// Pairs alternate between same-subject and cross-subject.
inline SyntheticGallery write_synthetic_gallery(const std::filesystem::path& root,
                                                const SyntheticGalleryOptions& opts = {}) {
  require(opts.subjects >= 2 && opts.images_per_subject >= 2, "gallery needs 2 subjects with 2 images");
  namespace stdfs = std::filesystem;
  SyntheticGallery g;
  g.model = generate_synthetic_model(opts.seed, opts.vertex_count, opts.shape_dim, opts.expr_dim);
  g.mapping = synthetic_landmark_mapping(opts.vertex_count);
  stdfs::create_directories(root);
  save_model(g.model, root / "model.ffm");
  save_mapping(g.mapping, root / "mapping.txt");

  auto rng = eval_detail::seeded(opts.seed, 11);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto cam = CameraIntrinsics::default_for(opts.size, opts.size);
  const double depth = 200.0 * cam.focal / (0.7 * opts.size);
  constexpr double kDeg = std::numbers::pi / 180.0;

  for (int s = 0; s < opts.subjects; ++s) {
    SyntheticFace face;
    face.alpha.alpha.resize(g.model.shape_dim());
    for (auto& a : face.alpha.alpha) a = static_cast<double>(static_cast<float>(60.0 * normal(rng)));
    face.base_color = {150 + 40 * u(rng), 110 + 30 * u(rng), 90 + 30 * u(rng)};
    face.stripe = {25 + 10 * u(rng), 20 + 10 * u(rng), 15 + 10 * u(rng)};
    face.phase = 3.0 * u(rng);
    const auto subject = synthetic_subject_name(s);
    stdfs::create_directories(root / subject);
    for (int k = 0; k < opts.images_per_subject; ++k) {
      face.gamma.gamma = (0.4 * Eigen::ArrayXd::NullaryExpr(g.model.expr_dim(), [&] { return u(rng); }) *
                          g.model.expr_sigma.array())
                             .matrix();
      face.pose.rotation = from_rodrigues(Eigen::Vector3d(0.15 * u(rng), opts.max_yaw_degrees * kDeg * u(rng),
                                                          0.1 * u(rng)));
      face.pose.translation = {4.0 * u(rng), 4.0 * u(rng), depth + 20.0 * u(rng)};
      const auto bg = synthetic_background(opts.size, opts.size, opts.seed * 1000 + s * 10 + k);
      auto r = render_synthetic_face(g.model, g.mapping, face, cam, bg);
      const auto ref = subject + "/" + subject + "_" + std::to_string(k + 1) + ".png";
      r.landmarks.image = ref;
      auto base = root / ref;
      save_png(r.image, base);
      save_png(r.mask, stdfs::path(base).replace_extension(".mask.png"));
      save_json(landmarks_to_json(r.landmarks), stdfs::path(base).replace_extension(".landmarks.json"));
      save_json(alpha_to_json(face.alpha), stdfs::path(base).replace_extension(".alpha.json"));
      g.refs.push_back(ref);
    }
  }

  // Same and cross-subject pairs alternate so every fold holds both classes.
  const int per = opts.images_per_subject;
  std::vector<PairEntry> same, cross;
  for (int s = 0; s < opts.subjects; ++s)
    for (int a = 0; a < per; ++a)
      for (int b = a + 1; b < per; ++b) same.push_back({g.refs[s * per + a], g.refs[s * per + b], true});
  for (std::size_t i = 0; i < same.size(); ++i) {
    const int s = static_cast<int>(i) % opts.subjects;
    const int t = (s + 1) % opts.subjects;
    const int k = static_cast<int>(i / opts.subjects) % per;
    cross.push_back({g.refs[s * per + (per - 1 - k)], g.refs[t * per + k], false});
  }
  for (std::size_t i = 0; i < same.size(); ++i) {
    g.pairs.entries.push_back(same[i]);
    g.pairs.entries.push_back(cross[i]);
  }
  g.pairs.set_even_folds(2);
  write_file_atomic(root / "pairs.csv", pairs_csv(g.pairs));
  return g;
}

}  // namespace faceswap
