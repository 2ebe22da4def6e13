#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "faceswap/error.hpp"
#include "faceswap/expression.hpp"
#include "faceswap/file_io.hpp"
#include "faceswap/model.hpp"
#include "faceswap/pose.hpp"

namespace faceswap {

/// 2D landmarks of one image, in landmark order.
struct LandmarkSet {
  std::string image;
  Eigen::Matrix2Xd points;
};

namespace formats_detail {

inline nlohmann::json parse(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseMalformedHeader, what + ": " + e.what());
  }
}

template <typename F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseMalformedHeader, what + ": " + e.what());
  }
}

inline Eigen::VectorXd vector_of(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace formats_detail

inline nlohmann::json landmarks_to_json(const LandmarkSet& l) {
  nlohmann::json pts = nlohmann::json::array();
  for (Eigen::Index i = 0; i < l.points.cols(); ++i) pts.push_back({l.points(0, i), l.points(1, i)});
  return {{"image", l.image}, {"points", pts}};
}

inline LandmarkSet landmarks_from_json(const nlohmann::json& j) {
  return formats_detail::guarded("landmarks", [&] {
    LandmarkSet l;
    l.image = j.value("image", std::string());
    const auto& pts = j.at("points");
    l.points.resize(2, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto p = pts[i].get<std::vector<double>>();
      require(p.size() == 2, "landmark " + std::to_string(i) + " must have 2 coordinates");
      l.points.col(static_cast<Eigen::Index>(i)) << p[0], p[1];
    }
    require(l.points.allFinite(), "landmarks must be finite");
    return l;
  });
}

inline LandmarkSet load_landmarks(const std::filesystem::path& path) {
  return landmarks_from_json(formats_detail::parse(read_text(path), path.string()));
}

inline nlohmann::json pose_to_json(const Pose& pose, const CameraIntrinsics& cam) {
  return {{"rodrigues", formats_detail::to_std(to_rodrigues(pose.rotation))},
          {"t", formats_detail::to_std(pose.translation)},
          {"focal", cam.focal},
          {"pp", {cam.principal_point.x(), cam.principal_point.y()}}};
}

/// Pose plus the focal length and principal point it was estimated with.
inline std::pair<Pose, CameraIntrinsics> pose_from_json(const nlohmann::json& j, int width = 0, int height = 0) {
  return formats_detail::guarded("pose", [&] {
    const auto r = formats_detail::vector_of(j.at("rodrigues"));
    const auto t = formats_detail::vector_of(j.at("t"));
    require(r.size() == 3 && t.size() == 3, "pose vectors must have 3 entries");
    Pose p;
    p.rotation = from_rodrigues(r);
    p.translation = t;
    CameraIntrinsics cam;
    cam.width = width;
    cam.height = height;
    cam.focal = j.at("focal").get<double>();
    const auto pp = formats_detail::vector_of(j.at("pp"));
    require(pp.size() == 2, "pp must have 2 entries");
    cam.principal_point = pp;
    return std::pair{p, cam};
  });
}

inline nlohmann::json alpha_to_json(const ShapeCoeffs& a) { return {{"alpha", formats_detail::to_std(a.alpha)}}; }

inline ShapeCoeffs alpha_from_json(const nlohmann::json& j) {
  return formats_detail::guarded("alpha", [&] { return ShapeCoeffs{formats_detail::vector_of(j.at("alpha"))}; });
}

inline ShapeCoeffs load_alpha(const std::filesystem::path& path) {
  return alpha_from_json(formats_detail::parse(read_text(path), path.string()));
}

inline nlohmann::json expression_to_json(const ExpressionFit& fit) {
  return {{"gamma", formats_detail::to_std(fit.gamma.gamma)}, {"visible", fit.visible}};
}

inline ExpressionFit expression_from_json(const nlohmann::json& j) {
  return formats_detail::guarded("expression", [&] {
    ExpressionFit f;
    f.gamma.gamma = formats_detail::vector_of(j.at("gamma"));
    f.visible = j.at("visible").get<std::vector<std::uint32_t>>();
    return f;
  });
}

inline void save_json(const nlohmann::json& j, const std::filesystem::path& path) {
  write_file_atomic(path, j.dump(2) + "\n");
}

inline nlohmann::json load_json(const std::filesystem::path& path) {
  return formats_detail::parse(read_text(path), path.string());
}

}  // namespace faceswap
