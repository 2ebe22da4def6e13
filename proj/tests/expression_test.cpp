#include <algorithm>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "faceswap/bvls.hpp"
#include "faceswap/expression.hpp"
#include "faceswap/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fs = faceswap;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

fs::BoundedLLSProblem random_problem(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> width(0.2, 2.0);
  fs::BoundedLLSProblem pb;
  pb.design.resize(rows, cols);
  for (auto& x : pb.design.reshaped()) x = nd(rng);
  pb.rhs.resize(rows);
  for (auto& x : pb.rhs) x = 3.0 * nd(rng);
  pb.lower.resize(cols);
  pb.upper.resize(cols);
  for (int j = 0; j < cols; ++j) {
    pb.lower[j] = -width(rng);
    pb.upper[j] = width(rng);
  }
  return pb;
}

bool inside(const fs::BoundedLLSProblem& pb, const Eigen::VectorXd& x) {
  return ((x - pb.lower).array() >= 0).all() && ((pb.upper - x).array() >= 0).all();
}

struct Scene {
  fs::MorphableModel model = fs::generate_synthetic_model(5, 500, 20, 29);
  fs::LandmarkMapping mapping = fs::synthetic_landmark_mapping(500);
  fs::CameraIntrinsics cam = fs::CameraIntrinsics::default_for(640, 480);

  Eigen::Matrix2Xd landmarks(const fs::ShapeCoeffs& a, const Eigen::VectorXd& gamma,
                             const fs::Pose& pose) const {
    const auto v = fs::synthesize_shape(model, a, {gamma});
    return fs::project(fs::select_landmarks(v, mapping), pose, cam).points;
  }
};

fs::Pose yawed(double yaw) {
  fs::Pose p;
  p.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
  p.translation = {0, 0, 500};
  return p;
}

}  // namespace

TEST(Bvls, OneDimensionalClamp) {
  fs::BoundedLLSProblem pb{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Constant(1, 10.0),
                           Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)};
  EXPECT_EQ(fs::solve_bounded_lls(pb)[0], 1.0);
}

TEST(Bvls, InteriorMinimizerMatchesPseudoinverse) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto pb = random_problem(rng, 20, 5);
    const Eigen::VectorXd x_ls = pb.design.completeOrthogonalDecomposition().pseudoInverse() * pb.rhs;
    pb.lower = x_ls.array() - 10.0;
    pb.upper = x_ls.array() + 10.0;
    EXPECT_LE((fs::solve_bounded_lls(pb) - x_ls).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Bvls, NeverWorseThanGridOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    const auto pb = random_problem(rng, 20, 5);
    const auto x = fs::solve_bounded_lls(pb);
    ASSERT_TRUE(inside(pb, x));
    const double grid = oracle::grid_min_objective(pb.design, pb.rhs, pb.lower, pb.upper);
    EXPECT_LE(pb.objective(x), grid + 1e-6) << "trial " << trial;
  }
}

TEST(Bvls, RecoversPlantedLatticeMinimizer) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = oracle::planted_lattice_problem(rng, 20, 5);
    fs::BoundedLLSProblem pb{p.a, p.b, p.lower, p.upper};
    const auto x = fs::solve_bounded_lls(pb);
    EXPECT_LE((x - p.solution).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
  }
}

TEST(Bvls, WideningBoundsNeverHurts) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto pb = random_problem(rng, 12, 6);
    const double narrow = pb.objective(fs::solve_bounded_lls(pb));
    pb.lower *= 1.7;
    pb.upper *= 1.7;
    EXPECT_LE(pb.objective(fs::solve_bounded_lls(pb)), narrow + 1e-12);
  }
}

TEST(Bvls, FeasibleForIllConditionedAndRankDeficient) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    auto pb = random_problem(rng, 8, 10);  // more unknowns than rows
    pb.design.col(3) = pb.design.col(1) * 1e-9 + pb.design.col(2);
    pb.design.col(7) = pb.design.col(0);
    const auto x = fs::solve_bounded_lls(pb);
    EXPECT_TRUE(inside(pb, x));
  }
}

TEST(Bvls, RejectsNonFiniteInput) {
  fs::BoundedLLSProblem pb{Eigen::MatrixXd::Constant(1, 1, std::nan("")), Eigen::VectorXd::Constant(1, 1.0),
                           Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)};
  EXPECT_FS_ERROR(fs::solve_bounded_lls(pb), fs::ErrorCode::kInvalidArgument);
  pb.design(0, 0) = 1.0;
  pb.rhs[0] = std::numeric_limits<double>::infinity();
  EXPECT_FS_ERROR(fs::solve_bounded_lls(pb), fs::ErrorCode::kInvalidArgument);
}

TEST(Visibility, FrontalPoseKeepsEveryLandmark) {
  const Scene s;
  auto v = fs::synthesize_shape(s.model, fs::ShapeCoeffs::zero(s.model), fs::ExpressionCoeffs::zero(s.model));
  fs::attach_normals(v, s.model.triangles);
  EXPECT_EQ(fs::visible_landmarks(s.mapping, v, yawed(0.0)).visible_indices.size(), 68u);
}

TEST(Visibility, FlippedNormalsHideEverything) {
  const Scene s;
  auto v = fs::synthesize_shape(s.model, fs::ShapeCoeffs::zero(s.model), fs::ExpressionCoeffs::zero(s.model));
  fs::attach_normals(v, s.model.triangles);
  *v.normals *= -1.0;
  EXPECT_TRUE(fs::visible_landmarks(s.mapping, v, yawed(0.0)).visible_indices.empty());
}

TEST(Visibility, NinetyDegreeYawDropsFarJaw) {
  const Scene s;
  auto v = fs::synthesize_shape(s.model, fs::ShapeCoeffs::zero(s.model), fs::ExpressionCoeffs::zero(s.model));
  fs::attach_normals(v, s.model.triangles);
  const auto pose = yawed(90 * kDeg);
  const auto kept = fs::visible_landmarks(s.mapping, v, pose).visible_indices;
  // Reference: rotate each normal explicitly and test the sign.
  const Eigen::AngleAxisd yaw(90 * kDeg, Eigen::Vector3d::UnitY());
  std::vector<std::uint32_t> expected;
  for (std::uint32_t i = 0; i < 68; ++i) {
    const Eigen::Vector3d n = yaw * v.normals->col(s.mapping.vertex_indices[i]);
    if (n.z() < 0) expected.push_back(i);
  }
  EXPECT_EQ(kept, expected);
  // Yawing by +90 deg about y turns the -x side of the face away from the
  // camera; the first jaw points sit on -x, the last ones on +x.
  auto has = [&](std::uint32_t i) { return std::find(kept.begin(), kept.end(), i) != kept.end(); };
  EXPECT_FALSE(has(0));
  EXPECT_FALSE(has(1));
  EXPECT_TRUE(has(16));
  EXPECT_LT(kept.size(), 68u);
}

TEST(Visibility, MissingNormalsIsInvalidArgument) {
  const Scene s;
  const auto v = fs::synthesize_shape(s.model, fs::ShapeCoeffs::zero(s.model), fs::ExpressionCoeffs::zero(s.model));
  EXPECT_FS_ERROR(fs::visible_landmarks(s.mapping, v, yawed(0)), fs::ErrorCode::kInvalidArgument);
}

TEST(FitExpression, RecoversInBoundGamma) {
  const Scene s;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-0.9, 0.9), yaw(-40 * kDeg, 40 * kDeg);
  std::normal_distribution<double> nd(0.0, 20.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd alpha(20), gamma(29);
    for (auto& x : alpha) x = nd(rng);
    for (Eigen::Index j = 0; j < 29; ++j) gamma[j] = 3.0 * s.model.expr_sigma[j] * u(rng);
    const auto pose = yawed(yaw(rng));
    const auto p2d = s.landmarks({alpha}, gamma, pose);
    const auto fit = fs::fit_expression(s.model, {alpha}, pose, s.cam, p2d, s.mapping);
    EXPECT_LT((fit.gamma.gamma - gamma).cwiseAbs().maxCoeff(), 1e-3) << "trial " << trial;
    EXPECT_TRUE(((fit.gamma.gamma.cwiseAbs() - 3.0 * s.model.expr_sigma).array() <= 0).all());
  }
}

TEST(FitExpression, NeutralLandmarksGiveZeroGamma) {
  const Scene s;
  const auto pose = yawed(0.3);
  const auto p2d = s.landmarks(fs::ShapeCoeffs::zero(s.model), Eigen::VectorXd::Zero(29), pose);
  const auto fit = fs::fit_expression(s.model, fs::ShapeCoeffs::zero(s.model), pose, s.cam, p2d, s.mapping);
  EXPECT_LT(fit.gamma.gamma.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FitExpression, OutOfBoundComponentIsClippedAndBeatsNaiveClamp) {
  const Scene s;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(29);
  gamma[4] = 5.0 * s.model.expr_sigma[4];
  gamma[9] = -1.0 * s.model.expr_sigma[9];
  const auto pose = yawed(0.2);
  const auto alpha = fs::ShapeCoeffs::zero(s.model);
  const auto p2d = s.landmarks(alpha, gamma, pose);
  const auto fit = fs::fit_expression(s.model, alpha, pose, s.cam, p2d, s.mapping);
  const Eigen::VectorXd bound = 3.0 * s.model.expr_sigma;
  EXPECT_LE(std::abs(fit.gamma.gamma[4]), bound[4]);
  EXPECT_TRUE(((fit.gamma.gamma.cwiseAbs() - bound).array() <= 0).all());

  const auto pb = fs::expression_system(s.model, alpha, pose, s.cam, p2d, s.mapping, fit.visible);
  const Eigen::VectorXd naive =
      (pb.design.completeOrthogonalDecomposition().solve(pb.rhs)).cwiseMax(-bound).cwiseMin(bound);
  EXPECT_LE(pb.objective(fit.gamma.gamma), pb.objective(naive) + 1e-12);
}

TEST(FitExpression, FewVisibleLandmarksAreRegularized) {
  const Scene s;
  // Keep only 5 landmarks: 10 rows for 29 unknowns.
  fs::LandmarkMapping few{std::vector<std::uint32_t>(s.mapping.vertex_indices.begin() + 27,
                                                     s.mapping.vertex_indices.begin() + 32)};
  const auto pose = yawed(0.0);
  const auto v = fs::synthesize_shape(s.model, fs::ShapeCoeffs::zero(s.model), fs::ExpressionCoeffs::zero(s.model));
  const auto p2d = fs::project(fs::select_landmarks(v, few), pose, s.cam).points;
  const auto fit = fs::fit_expression(s.model, fs::ShapeCoeffs::zero(s.model), pose, s.cam, p2d, few);
  EXPECT_TRUE(fit.regularized);
  EXPECT_LT(fit.gamma.gamma.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FitExpression, NoVisibleLandmarks) {
  const Scene s;
  const auto pose = yawed(0.0);
  fs::Pose back = pose;
  back.rotation = Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitY()).toRotationMatrix();
  back.translation = {0, 0, 500};
  const auto p2d = s.landmarks(fs::ShapeCoeffs::zero(s.model), Eigen::VectorXd::Zero(29), back);
  EXPECT_FS_ERROR(fs::fit_expression(s.model, fs::ShapeCoeffs::zero(s.model), back, s.cam, p2d, s.mapping),
                  fs::ErrorCode::kNoVisibleLandmarks);
}
