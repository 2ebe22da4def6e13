#pragma once

// Brute-force reference computations shared by the unit and acceptance
// suites. Nothing here calls into the code paths being checked.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Minimum of ||A x - b||^2 over the lattice lower + k (upper - lower) / (steps - 1),
/// k = 0..steps-1 in every coordinate. Exhaustive; evaluated incrementally
/// through the quadratic form so 41^5 points stay cheap.
inline double grid_min_objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                 const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                 int steps = 41) {
  const auto k = static_cast<int>(a.cols());
  const Eigen::MatrixXd h = a.transpose() * a;
  const Eigen::VectorXd g = a.transpose() * b;
  const double c = b.squaredNorm();
  std::vector<std::vector<double>> values(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j)
    for (int s = 0; s < steps; ++s)
      values[j].push_back(lower[j] + s * (upper[j] - lower[j]) / (steps - 1));

  double best = std::numeric_limits<double>::infinity();
  std::vector<Eigen::VectorXd> partial(static_cast<std::size_t>(k + 1), Eigen::VectorXd::Zero(k));
  auto recurse = [&](auto&& self, int d, double v) -> void {
    const Eigen::VectorXd& s = partial[d];
    if (d == k - 1) {
      const double hd = h(d, d), lin = 2.0 * (s[d] - g[d]);
      for (double x : values[d]) best = std::min(best, v + x * (hd * x + lin) + c);
      return;
    }
    for (double x : values[d]) {
      partial[d + 1] = s + h.col(d) * x;
      self(self, d + 1, v + x * (h(d, d) * x + 2.0 * s[d] - 2.0 * g[d]));
    }
  };
  recurse(recurse, 0, 0.0);
  return best;
}

/// Box-constrained problem whose unique minimizer is a known lattice point
/// (some coordinates at bounds with KKT multipliers of the right sign,
/// the rest strictly inside).
struct PlantedProblem {
  Eigen::MatrixXd a;
  Eigen::VectorXd b, lower, upper, solution;
};

inline PlantedProblem planted_lattice_problem(std::mt19937_64& rng, int rows, int cols,
                                              int steps = 41) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> half_width(0.5, 3.0), mult(0.2, 2.0);
  std::uniform_int_distribution<int> which(0, 2), interior(1, steps - 2);
  PlantedProblem p;
  p.a.resize(rows, cols);
  for (auto& x : p.a.reshaped()) x = nd(rng);
  p.lower.resize(cols);
  p.upper.resize(cols);
  p.solution.resize(cols);
  Eigen::VectorXd w(cols);
  for (int j = 0; j < cols; ++j) {
    const double s = half_width(rng);
    p.lower[j] = -s;
    p.upper[j] = s;
    switch (which(rng)) {
      case 0: p.solution[j] = p.lower[j]; w[j] = -mult(rng); break;
      case 1: p.solution[j] = p.upper[j]; w[j] = mult(rng); break;
      default: {
        const int kk = interior(rng);
        p.solution[j] = p.lower[j] + kk * (p.upper[j] - p.lower[j]) / (steps - 1);
        w[j] = 0.0;
      }
    }
  }
  // Residual r with A^T r = w places the KKT multipliers.
  const Eigen::VectorXd r = p.a * (p.a.transpose() * p.a).ldlt().solve(w);
  p.b = p.a * p.solution + r;
  return p;
}

/// Brute-force verification statistics by sweeping thresholds and counting.
struct SweepResult {
  double eer100, acc_mean, nauc, nauc_fold_mean;
};

struct LabeledScore {
  double score;
  bool same;
};

inline double mann_whitney_auc(const std::vector<LabeledScore>& s) {
  double num = 0, pairs = 0;
  for (const auto& p : s)
    for (const auto& n : s) {
      if (!p.same || n.same) continue;
      pairs += 1;
      num += p.score > n.score ? 1.0 : p.score == n.score ? 0.5 : 0.0;
    }
  return num / pairs;
}

inline double sweep_eer(const std::vector<LabeledScore>& s) {
  std::vector<double> thr;
  for (const auto& l : s) thr.push_back(l.score);
  std::sort(thr.begin(), thr.end(), std::greater<>());
  thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
  thr.insert(thr.begin(), std::numeric_limits<double>::infinity());
  double prev_far = 0, prev_frr = 1;
  for (double t : thr) {
    double fa = 0, neg = 0, fr = 0, pos = 0;
    for (const auto& l : s) {
      if (l.same) {
        ++pos;
        fr += l.score < t;
      } else {
        ++neg;
        fa += l.score >= t;
      }
    }
    const double far = fa / neg, frr = fr / pos;
    if (far >= frr) {
      // Crossing between the previous and this operating point.
      const double d0 = prev_far - prev_frr, d1 = far - frr;
      const double lam = d1 == d0 ? 0.0 : -d0 / (d1 - d0);
      return prev_far + lam * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  return prev_far;
}

inline double sweep_best_threshold(const std::vector<LabeledScore>& train) {
  std::vector<double> v;
  for (const auto& l : train) v.push_back(l.score);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  std::vector<double> cand{-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i + 1 < v.size(); ++i) cand.push_back(0.5 * (v[i] + v[i + 1]));
  cand.push_back(std::numeric_limits<double>::infinity());
  double best = -1, best_t = 0;
  for (double t : cand) {
    double ok = 0;
    for (const auto& l : train) ok += (l.score >= t) == l.same;
    if (ok > best) {
      best = ok;
      best_t = t;
    }
  }
  return best_t;
}

inline SweepResult sweep_metrics(const std::vector<LabeledScore>& s, const std::vector<std::size_t>& folds) {
  SweepResult r{};
  r.eer100 = 100.0 * (1.0 - sweep_eer(s));
  r.nauc = 100.0 * mann_whitney_auc(s);
  double acc_sum = 0, nauc_sum = 0;
  int nauc_folds = 0;
  const auto k = folds.size() - 1;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<LabeledScore> train, test;
    for (std::size_t i = 0; i < s.size(); ++i) (i >= folds[f] && i < folds[f + 1] ? test : train).push_back(s[i]);
    const double t = sweep_best_threshold(train);
    double ok = 0;
    for (const auto& l : test) ok += (l.score >= t) == l.same;
    acc_sum += 100.0 * ok / static_cast<double>(test.size());
    bool pos = false, neg = false;
    for (const auto& l : test) (l.same ? pos : neg) = true;
    if (pos && neg) {
      nauc_sum += 100.0 * mann_whitney_auc(test);
      ++nauc_folds;
    }
  }
  r.acc_mean = acc_sum / static_cast<double>(k);
  r.nauc_fold_mean = nauc_sum / nauc_folds;
  return r;
}

}  // namespace oracle
