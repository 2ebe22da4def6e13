#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "faceswap/pose.hpp"
#include "faceswap/synthetic.hpp"
#include "test_util.hpp"

namespace fs = faceswap;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

fs::Pose make_pose(double yaw, double pitch, double roll, const Eigen::Vector3d& t) {
  fs::Pose p;
  p.rotation = (Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()) *
                Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
                Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()))
                   .toRotationMatrix();
  p.translation = t;
  return p;
}

// 3x4 homogeneous camera matrix K [R | t].
Eigen::Matrix2Xd homogeneous_oracle(const Eigen::Matrix3Xd& pts, const fs::Pose& pose,
                                    const fs::CameraIntrinsics& cam) {
  Eigen::Matrix3d k;
  k << cam.focal, 0, cam.principal_point.x(), 0, cam.focal, cam.principal_point.y(), 0, 0, 1;
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = pose.rotation;
  rt.col(3) = pose.translation;
  const Eigen::Matrix<double, 3, 4> p = k * rt;
  Eigen::Matrix2Xd out(2, pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const Eigen::Vector3d h = p * pts.col(i).homogeneous();
    out.col(i) = h.head<2>() / h.z();
  }
  return out;
}

Eigen::Matrix3Xd synthetic_landmarks() {
  const auto m = fs::generate_synthetic_model(1, 500, 10, 5);
  const Eigen::Matrix3Xd coords = Eigen::Map<const Eigen::Matrix3Xd>(m.mean_shape.data(), 3, 500);
  return fs::select_landmarks(coords, fs::synthetic_landmark_mapping(500));
}

}  // namespace

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const auto cam = fs::CameraIntrinsics::default_for(640, 480);
  Eigen::Matrix3Xd pts(3, 1);
  pts << 0, 0, 250;
  const auto proj = fs::project(pts, fs::Pose{}, cam);
  EXPECT_EQ(proj.points.col(0), cam.principal_point);
  EXPECT_EQ(proj.depth[0], 250.0);
}

TEST(Project, PureTranslationFollowsPinholeFormula) {
  const auto cam = fs::CameraIntrinsics::default_for(640, 480);
  fs::Pose pose;
  pose.translation = {0, 0, 400};
  Eigen::Matrix3Xd pts(3, 1);
  pts << 12, -7, 0;
  const auto proj = fs::project(pts, pose, cam);
  EXPECT_NEAR(proj.points(0, 0), cam.principal_point.x() + cam.focal * 12 / 400, 1e-12);
  EXPECT_NEAR(proj.points(1, 0), cam.principal_point.y() + cam.focal * -7 / 400, 1e-12);
}

TEST(Project, MatchesHomogeneousOracle) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ang(-1.2, 1.2), off(-50, 50), dep(300, 900), coord(-80, 80);
  const auto cam = fs::CameraIntrinsics::default_for(800, 600);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pose = make_pose(ang(rng), ang(rng), ang(rng), {off(rng), off(rng), dep(rng)});
    Eigen::Matrix3Xd pts(3, 20);
    for (auto& x : pts.reshaped()) x = coord(rng);
    const auto proj = fs::project(pts, pose, cam);
    EXPECT_LE((proj.points - homogeneous_oracle(pts, pose, cam)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Project, BehindCameraNamesThePoint) {
  const auto cam = fs::CameraIntrinsics::default_for(640, 480);
  Eigen::Matrix3Xd pts(3, 3);
  pts << 0, 0, 0, 0, 0, 0, 10, 20, -5;
  try {
    fs::project(pts, fs::Pose{}, cam);
    FAIL();
  } catch (const fs::BehindCameraError& e) {
    EXPECT_EQ(e.code(), fs::ErrorCode::kBehindCamera);
    EXPECT_EQ(e.index(), 2u);
  }
}

TEST(Project, EquivariantUnderPreRotation) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ang(-0.8, 0.8), coord(-60, 60);
  const auto cam = fs::CameraIntrinsics::default_for(640, 640);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pose = make_pose(ang(rng), ang(rng), ang(rng), {0, 0, 600});
    const Eigen::Matrix3d q = make_pose(ang(rng), ang(rng), ang(rng), {0, 0, 0}).rotation;
    Eigen::Matrix3Xd pts(3, 10);
    for (auto& x : pts.reshaped()) x = coord(rng);
    fs::Pose composed = pose;
    composed.rotation = pose.rotation * q;
    const auto a = fs::project(q * pts, pose, cam);
    const auto b = fs::project(pts, composed, cam);
    EXPECT_LE((a.points - b.points).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Rodrigues, RoundTrip) {
  const Eigen::Vector3d v(0.3, -0.2, 0.9);
  EXPECT_LE((fs::to_rodrigues(fs::from_rodrigues(v)) - v).norm(), 1e-12);
  EXPECT_EQ(fs::from_rodrigues(Eigen::Vector3d::Zero()), Eigen::Matrix3d::Identity());
}

TEST(EstimatePose, IdentityPoseRoundTrip) {
  const auto cam = fs::CameraIntrinsics::default_for(640, 480);
  const auto lm = synthetic_landmarks();
  fs::Pose truth;
  truth.translation = {0, 0, 500};
  const auto p2d = fs::project(lm, truth, cam).points;
  const auto est = fs::estimate_pose(p2d, lm, cam);
  EXPECT_LT(fs::reprojection_rms(p2d, lm, est, cam), 1e-3);
  EXPECT_LT(fs::rotation_distance(est.rotation, truth.rotation), 1e-4);
  EXPECT_NO_THROW(est.validate());
}

TEST(EstimatePose, NoiselessRandomPosesRecovered) {
  const auto cam = fs::CameraIntrinsics::default_for(640, 480);
  const auto lm = synthetic_landmarks();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> yaw(-75 * kDeg, 75 * kDeg), tilt(-25 * kDeg, 25 * kDeg),
      off(-40, 40), dep(400, 900);
  for (int trial = 0; trial < 50; ++trial) {
    const auto truth = make_pose(yaw(rng), tilt(rng), tilt(rng), {off(rng), off(rng), dep(rng)});
    const auto p2d = fs::project(lm, truth, cam).points;
    const auto est = fs::estimate_pose(p2d, lm, cam);
    EXPECT_LT(fs::rotation_distance(est.rotation, truth.rotation), 1e-4) << "trial " << trial;
    EXPECT_LT(fs::reprojection_rms(p2d, lm, est, cam), 1e-3) << "trial " << trial;
    EXPECT_NO_THROW(est.validate());
  }
}

TEST(EstimatePose, PlanarPointsUseReducedControlBasis) {
  const auto cam = fs::CameraIntrinsics::default_for(640, 480);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coord(-60, 60);
  Eigen::Matrix3Xd pts(3, 20);
  for (Eigen::Index i = 0; i < 20; ++i) pts.col(i) << coord(rng), coord(rng), 0.0;
  const auto truth = make_pose(0.4, -0.2, 0.1, {5, -3, 500});
  const auto p2d = fs::project(pts, truth, cam).points;
  const auto est = fs::estimate_pose(p2d, pts, cam);
  EXPECT_LT(fs::rotation_distance(est.rotation, truth.rotation), 1e-6);
  EXPECT_LT(fs::reprojection_rms(p2d, pts, est, cam), 1e-6);
}

TEST(EstimatePose, NoisyLandmarksStayAccurate) {
  const auto cam = fs::CameraIntrinsics::default_for(640, 480);
  const auto lm = synthetic_landmarks();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> yaw(-75 * kDeg, 75 * kDeg), off(-30, 30);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> errs;
  for (int trial = 0; trial < 100; ++trial) {
    const auto truth = make_pose(yaw(rng), 0.1, -0.05, {off(rng), off(rng), 500});
    Eigen::Matrix2Xd p2d = fs::project(lm, truth, cam).points;
    for (auto& x : p2d.reshaped()) x += noise(rng);
    errs.push_back(fs::rotation_distance(fs::estimate_pose(p2d, lm, cam).rotation, truth.rotation));
  }
  std::nth_element(errs.begin(), errs.begin() + 50, errs.end());
  EXPECT_LT(errs[50], 2.0 * kDeg);
}

TEST(EstimatePose, TooFewCorrespondences) {
  const auto cam = fs::CameraIntrinsics::default_for(640, 480);
  const Eigen::Matrix3Xd pts = synthetic_landmarks().leftCols(5);
  fs::Pose truth;
  truth.translation = {0, 0, 500};
  const auto p2d = fs::project(pts, truth, cam).points;
  EXPECT_FS_ERROR(fs::estimate_pose(p2d, pts, cam), fs::ErrorCode::kInsufficientCorrespondences);
}

TEST(EstimatePose, CollinearPointsAreDegenerate) {
  const auto cam = fs::CameraIntrinsics::default_for(640, 480);
  Eigen::Matrix3Xd pts(3, 8);
  for (Eigen::Index i = 0; i < 8; ++i) pts.col(i) << 10.0 * i, 5.0 * i, 0.0;
  fs::Pose truth;
  truth.translation = {0, 0, 500};
  const auto p2d = fs::project(pts, truth, cam).points;
  EXPECT_FS_ERROR(fs::estimate_pose(p2d, pts, cam), fs::ErrorCode::kDegenerateConfiguration);
}
