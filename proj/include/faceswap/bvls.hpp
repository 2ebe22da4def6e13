#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "faceswap/error.hpp"

namespace faceswap {

/// min ||A x - b||^2  subject to  lower <= x <= upper.
struct BoundedLLSProblem {
  Eigen::MatrixXd design;
  Eigen::VectorXd rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  void validate() const {
    require(design.rows() >= 1 && design.cols() >= 1, "design matrix must be non-empty");
    require(rhs.size() == design.rows(), "rhs length must equal design rows");
    require(lower.size() == design.cols() && upper.size() == design.cols(),
            "bounds length must equal design columns");
    require(design.allFinite() && rhs.allFinite(), "design/rhs contain NaN or Inf");
    require(lower.allFinite() && upper.allFinite(), "bounds contain NaN or Inf");
    for (Eigen::Index j = 0; j < lower.size(); ++j)
      require(lower[j] <= upper[j], "lower bound exceeds upper bound at " + std::to_string(j));
  }

  double objective(const Eigen::VectorXd& x) const { return (design * x - rhs).squaredNorm(); }
};

/// Bounded-variable least squares (Stark & Parker active set). Variables
/// sit at a bound or are free; each outer step frees the bound variable
/// whose gradient most violates the KKT conditions (lowest index on ties),
/// and the inner loop walks toward the free-set least-squares solution,
/// pinning any variable that reaches a bound. The returned x lies inside
/// the box exactly.
inline Eigen::VectorXd solve_bounded_lls(const BoundedLLSProblem& pb) {
  pb.validate();
  enum class State { kLower, kUpper, kFree };
  const auto& a = pb.design;
  const auto k = a.cols();

  Eigen::VectorXd x(k);
  std::vector<State> state(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    x[j] = std::clamp(0.0, pb.lower[j], pb.upper[j]);
    if (x[j] == pb.lower[j]) state[j] = State::kLower;
    else if (x[j] == pb.upper[j]) state[j] = State::kUpper;
    else state[j] = State::kFree;
  }

  const double scale = std::max(1.0, (a.transpose() * pb.rhs).cwiseAbs().maxCoeff() +
                                         a.cwiseAbs().maxCoeff() * a.cwiseAbs().maxCoeff());
  const double kkt_tol = 1e-13 * scale;

  // Returns the index released by this call if it was immediately
  // pinned again on the first inner step, otherwise -1.
  auto inner = [&](Eigen::Index released) -> Eigen::Index {
    bool first = true;
    for (int guard = 0; guard < 4 * static_cast<int>(k) + 8; ++guard) {
      std::vector<Eigen::Index> free;
      for (Eigen::Index j = 0; j < k; ++j)
        if (state[j] == State::kFree) free.push_back(j);
      if (free.empty()) return -1;
      Eigen::VectorXd r = pb.rhs;
      for (Eigen::Index j = 0; j < k; ++j)
        if (state[j] != State::kFree) r -= a.col(j) * x[j];
      Eigen::MatrixXd af(a.rows(), static_cast<Eigen::Index>(free.size()));
      for (std::size_t i = 0; i < free.size(); ++i) af.col(static_cast<Eigen::Index>(i)) = a.col(free[i]);
      const Eigen::VectorXd z = af.completeOrthogonalDecomposition().solve(r);

      bool inside = true;
      for (std::size_t i = 0; i < free.size(); ++i) {
        const auto j = free[i];
        if (!(z[static_cast<Eigen::Index>(i)] > pb.lower[j] && z[static_cast<Eigen::Index>(i)] < pb.upper[j])) {
          inside = false;
          break;
        }
      }
      if (inside) {
        for (std::size_t i = 0; i < free.size(); ++i) x[free[i]] = z[static_cast<Eigen::Index>(i)];
        return -1;
      }

      // Largest step toward z that keeps every free variable feasible.
      double step = 1.0;
      for (std::size_t i = 0; i < free.size(); ++i) {
        const auto j = free[i];
        const double zj = z[static_cast<Eigen::Index>(i)];
        if (zj <= pb.lower[j]) {
          const double denom = x[j] - zj;
          step = std::min(step, denom > 0.0 ? (x[j] - pb.lower[j]) / denom : 0.0);
        } else if (zj >= pb.upper[j]) {
          const double denom = zj - x[j];
          step = std::min(step, denom > 0.0 ? (pb.upper[j] - x[j]) / denom : 0.0);
        }
      }
      step = std::clamp(step, 0.0, 1.0);
      Eigen::Index pinned_released = -1;
      for (std::size_t i = 0; i < free.size(); ++i) {
        const auto j = free[i];
        const double zj = z[static_cast<Eigen::Index>(i)];
        x[j] += step * (zj - x[j]);
        const double span = 1e-14 * std::max({1.0, std::abs(pb.lower[j]), std::abs(pb.upper[j])});
        if (zj <= pb.lower[j] && x[j] <= pb.lower[j] + span) {
          x[j] = pb.lower[j];
          state[j] = State::kLower;
          if (first && j == released) pinned_released = j;
        } else if (zj >= pb.upper[j] && x[j] >= pb.upper[j] - span) {
          x[j] = pb.upper[j];
          state[j] = State::kUpper;
          if (first && j == released) pinned_released = j;
        }
      }
      if (pinned_released >= 0 && step == 0.0) return pinned_released;
      first = false;
    }
    return -1;
  };

  inner(-1);
  std::vector<bool> blocked(static_cast<std::size_t>(k), false);
  const int max_outer = 20 * static_cast<int>(k) + 50;
  for (int it = 0; it < max_outer; ++it) {
    const Eigen::VectorXd w = a.transpose() * (pb.rhs - a * x);
    Eigen::Index pick = -1;
    double best = kkt_tol;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (blocked[j] || pb.lower[j] == pb.upper[j]) continue;
      const double v = state[j] == State::kLower ? w[j] : state[j] == State::kUpper ? -w[j] : 0.0;
      if (v > best) {
        best = v;
        pick = j;
      }
    }
    if (pick < 0) break;
    state[pick] = State::kFree;
    const auto bounced = inner(pick);
    if (bounced >= 0) {
      blocked[bounced] = true;
    } else {
      std::fill(blocked.begin(), blocked.end(), false);
    }
  }
  for (Eigen::Index j = 0; j < k; ++j) x[j] = std::clamp(x[j], pb.lower[j], pb.upper[j]);
  return x;
}

}  // namespace faceswap
