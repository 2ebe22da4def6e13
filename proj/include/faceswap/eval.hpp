#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "faceswap/error.hpp"

namespace faceswap {

struct PairEntry {
  std::string img1;
  std::string img2;
  bool same = false;

  friend bool operator==(const PairEntry&, const PairEntry&) = default;
};

/// Pairs plus a contiguous fold structure: fold i covers
/// [fold_starts[i], fold_starts[i+1]) with a final sentinel equal to size.
struct PairList {
  std::vector<PairEntry> entries;
  std::vector<std::size_t> fold_starts;

  /// Splits n entries into k contiguous folds of near-equal size.
  void set_even_folds(std::size_t k) {
    const auto n = entries.size();
    require(k >= 1 && k <= std::max<std::size_t>(n, 1), "fold count must be in [1, pair count]");
    fold_starts.clear();
    for (std::size_t i = 0; i <= k; ++i) fold_starts.push_back(i * n / k);
  }

  std::size_t fold_count() const { return fold_starts.empty() ? 0 : fold_starts.size() - 1; }

  void validate() const {
    require(fold_starts.size() >= 2 && fold_starts.front() == 0 && fold_starts.back() == entries.size(),
            "folds must partition the pair list");
    for (std::size_t i = 1; i < fold_starts.size(); ++i)
      require(fold_starts[i - 1] <= fold_starts[i], "fold boundaries must be non-decreasing");
  }
};

/// Subject id of an image reference: its parent directory name
/// (LFW layout Name/Name_0001.jpg).
inline std::string subject_of(const std::string& ref) {
  const auto parent = std::filesystem::path(ref).parent_path().filename().string();
  require(!parent.empty(), "image reference '" + ref + "' has no subject directory");
  return parent;
}

/// subject -> image references, both sorted.
using Gallery = std::map<std::string, std::vector<std::string>>;

inline Gallery gallery_from_refs(std::vector<std::string> refs) {
  std::sort(refs.begin(), refs.end());
  refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
  Gallery g;
  for (auto& r : refs) g[subject_of(r)].push_back(r);
  return g;
}

enum class SwapMode { kFacePreserving, kContextPreserving, kIntra };
enum class Trial { kA, kB };
enum class Side { kFirst, kSecond };

inline const char* to_string(SwapMode m) {
  switch (m) {
    case SwapMode::kFacePreserving: return "face_preserving";
    case SwapMode::kContextPreserving: return "context_preserving";
    case SwapMode::kIntra: return "intra";
  }
  return "?";
}
inline const char* to_string(Trial t) { return t == Trial::kA ? "A" : "B"; }
inline const char* to_string(Side s) { return s == Side::kFirst ? "first" : "second"; }

struct SwapEntry {
  std::size_t pair_index = 0;
  Side side = Side::kFirst;
  std::string source;
  std::string target;

  friend bool operator==(const SwapEntry&, const SwapEntry&) = default;
};

/// How to build the swapped image of every pair for one trial. pairs holds
/// the evaluation pairs (after singleton substitution in intra mode).
struct SwapPlan {
  SwapMode mode = SwapMode::kFacePreserving;
  Trial trial = Trial::kA;
  std::uint64_t seed = 0;
  PairList pairs;
  std::vector<SwapEntry> entries;
  std::size_t substitutions = 0;

  /// `<pairIdx>_<trial>_<side>.png`, side 1 or 2.
  static std::string output_name(const SwapEntry& e, Trial trial) {
    return std::to_string(e.pair_index) + "_" + to_string(trial) + "_" + (e.side == Side::kFirst ? "1" : "2") +
           ".png";
  }
};

namespace eval_detail {

/// Uniform index in [0, n) by rejection on raw 64-bit draws, so plans do
/// not depend on the standard library's distribution implementation.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return static_cast<std::size_t>(v % range);
}

inline std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

/// Random subject outside `excluded` with at least min_images images,
/// then a random image of it.
inline std::string pick_image(std::mt19937_64& rng, const Gallery& gallery,
                              const std::vector<std::string>& excluded, std::size_t min_images,
                              std::size_t pair_index) {
  std::vector<const std::pair<const std::string, std::vector<std::string>>*> eligible;
  for (const auto& kv : gallery)
    if (kv.second.size() >= min_images && std::find(excluded.begin(), excluded.end(), kv.first) == excluded.end())
      eligible.push_back(&kv);
  if (eligible.empty())
    fail(ErrorCode::kGalleryExhausted,
         "no eligible gallery subject for pair " + std::to_string(pair_index));
  const auto& images = eligible[uniform_index(rng, eligible.size())]->second;
  return images[uniform_index(rng, images.size())];
}

}  // namespace eval_detail

/// Inter-subject plan. Trial A swaps the first image of each pair, trial B
/// the second. Face preserving: the benchmark image is the source and a
/// random image of a subject outside the pair is the target. Context
/// preserving: the roles are reversed.
inline SwapPlan build_inter_plan(const PairList& pairs, const Gallery& gallery, std::uint64_t seed, SwapMode mode,
                                 Trial trial) {
  require(mode != SwapMode::kIntra, "use build_intra_plan for intra-subject plans");
  pairs.validate();
  SwapPlan plan{mode, trial, seed, pairs, {}, 0};
  auto rng = eval_detail::seeded(seed, 1 + static_cast<std::uint64_t>(mode) * 2 + static_cast<std::uint64_t>(trial));
  for (std::size_t i = 0; i < pairs.entries.size(); ++i) {
    const auto& p = pairs.entries[i];
    const Side side = trial == Trial::kA ? Side::kFirst : Side::kSecond;
    const auto& benchmark = side == Side::kFirst ? p.img1 : p.img2;
    const auto other = eval_detail::pick_image(rng, gallery, {subject_of(p.img1), subject_of(p.img2)}, 1, i);
    SwapEntry e{i, side, benchmark, other};
    if (mode == SwapMode::kContextPreserving) std::swap(e.source, e.target);
    plan.entries.push_back(e);
  }
  return plan;
}

/// Intra-subject plan. Images of single-image subjects appearing in
/// not-same pairs are first replaced by random images of multi-image
/// subjects (never the subject on the other side); the replacement draws
/// depend on the seed only, so both trials share them. The swapped image's
/// face moves onto another random image of the same subject.
inline SwapPlan build_intra_plan(const PairList& pairs, const Gallery& gallery, std::uint64_t seed, Trial trial) {
  pairs.validate();
  SwapPlan plan{SwapMode::kIntra, trial, seed, pairs, {}, 0};
  auto images_of = [&](const std::string& ref) -> const std::vector<std::string>& {
    const auto it = gallery.find(subject_of(ref));
    require(it != gallery.end(), "image '" + ref + "' belongs to no gallery subject");
    return it->second;
  };
  auto sub_rng = eval_detail::seeded(seed, 100);
  for (std::size_t i = 0; i < plan.pairs.entries.size(); ++i) {
    auto& p = plan.pairs.entries[i];
    if (p.same) continue;
    for (int s = 0; s < 2; ++s) {
      auto& ref = s == 0 ? p.img1 : p.img2;
      const auto& other = s == 0 ? p.img2 : p.img1;
      if (images_of(ref).size() >= 2) continue;
      ref = eval_detail::pick_image(sub_rng, gallery, {subject_of(other)}, 2, i);
      ++plan.substitutions;
    }
  }
  auto rng = eval_detail::seeded(seed, 200 + static_cast<std::uint64_t>(trial));
  for (std::size_t i = 0; i < plan.pairs.entries.size(); ++i) {
    const auto& p = plan.pairs.entries[i];
    const Side side = trial == Trial::kA ? Side::kFirst : Side::kSecond;
    const auto& source = side == Side::kFirst ? p.img1 : p.img2;
    const auto& images = images_of(source);
    std::vector<std::string> others;
    for (const auto& r : images)
      if (r != source) others.push_back(r);
    if (others.empty())
      fail(ErrorCode::kGalleryExhausted, "subject of '" + source + "' has no second image");
    plan.entries.push_back({i, side, source, others[eval_detail::uniform_index(rng, others.size())]});
  }
  return plan;
}

struct ScoredPair {
  PairEntry pair;
  double score = 0.0;
};

struct ScoredPairList {
  std::vector<ScoredPair> entries;
  std::vector<std::size_t> fold_starts;

  void set_even_folds(std::size_t k) {
    PairList tmp;
    tmp.entries.resize(entries.size());
    tmp.set_even_folds(k);
    fold_starts = tmp.fold_starts;
  }
};

struct RocPoint {
  double threshold;  // accept when score >= threshold
  double far;
  double tar;
};

struct VerificationMetrics {
  double eer100 = 0.0;     // pooled
  double eer100_std = 0.0; // across folds
  double acc_mean = 0.0;
  double acc_std = 0.0;
  double nauc = 0.0;       // pooled
  double nauc_mean = 0.0;  // across folds
  double nauc_std = 0.0;
  std::vector<RocPoint> roc;
};

namespace eval_detail {

struct Labeled {
  double score;
  bool same;
};

/// ROC from (0,0) through one point per distinct score, descending.
inline std::vector<RocPoint> roc_curve(std::vector<Labeled> s) {
  std::sort(s.begin(), s.end(), [](const Labeled& a, const Labeled& b) { return a.score > b.score; });
  double pos = 0, neg = 0;
  for (const auto& l : s) (l.same ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) fail(ErrorCode::kSingleClass, "verification needs both same and not-same pairs");
  std::vector<RocPoint> roc{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < s.size();) {
    const double thr = s[i].score;
    for (; i < s.size() && s[i].score == thr; ++i) (s[i].same ? tp : fp) += 1.0;
    roc.push_back({thr, fp / neg, tp / pos});
  }
  return roc;
}

/// Trapezoid rule; a tie group is a diagonal segment, i.e. half credit.
inline double auc(const std::vector<RocPoint>& roc) {
  double a = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    a += (roc[i].far - roc[i - 1].far) * 0.5 * (roc[i].tar + roc[i - 1].tar);
  return a;
}

/// Error rate where FAR = 1 - TAR, by linear interpolation along the ROC.
inline double eer(const std::vector<RocPoint>& roc) {
  for (std::size_t i = 1; i < roc.size(); ++i) {
    const double g0 = roc[i - 1].far - (1.0 - roc[i - 1].tar);
    const double g1 = roc[i].far - (1.0 - roc[i].tar);
    if (g1 >= 0.0) {
      const double t = g1 == g0 ? 0.0 : -g0 / (g1 - g0);
      return roc[i - 1].far + t * (roc[i].far - roc[i - 1].far);
    }
  }
  return roc.back().far;
}

/// Threshold maximizing accuracy on s; candidates are -inf, midpoints of
/// consecutive distinct scores and +inf, first (lowest) maximizer wins.
inline double best_threshold(std::vector<Labeled> s) {
  std::sort(s.begin(), s.end(), [](const Labeled& a, const Labeled& b) { return a.score < b.score; });
  // Start with every pair accepted, then reject one tie group at a time.
  std::size_t correct = 0;
  for (const auto& l : s) correct += l.same;
  double best_thr = -std::numeric_limits<double>::infinity();
  std::size_t best = correct;
  for (std::size_t i = 0; i < s.size();) {
    const double v = s[i].score;
    for (; i < s.size() && s[i].score == v; ++i) {
      if (s[i].same) --correct;
      else ++correct;
    }
    const double thr = i < s.size() ? 0.5 * (v + s[i].score) : std::numeric_limits<double>::infinity();
    if (correct > best) {
      best = correct;
      best_thr = thr;
    }
  }
  return best_thr;
}

inline double accuracy_at(const std::vector<Labeled>& s, double thr) {
  std::size_t ok = 0;
  for (const auto& l : s) ok += (l.score >= thr) == l.same;
  return static_cast<double>(ok) / static_cast<double>(s.size());
}

inline void mean_std(const std::vector<double>& v, double& mean, double& std_dev) {
  mean = 0.0;
  std_dev = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) std_dev += (x - mean) * (x - mean);
  std_dev = std::sqrt(std_dev / static_cast<double>(v.size()));
}

}  // namespace eval_detail

/// 100%-EER and nAUC on the pooled scores, plus fold-wise statistics:
/// accuracy with the threshold picked on the other folds (all folds when
/// there is only one), and per-fold EER and nAUC for the spreads. Folds
/// holding a single class are skipped for EER/nAUC. Stds are population
/// stds, all values in percent.
inline VerificationMetrics verification_metrics(const ScoredPairList& scored) {
  using eval_detail::Labeled;
  require(!scored.entries.empty(), "no scored pairs");
  auto folds = scored.fold_starts;
  if (folds.empty()) folds = {0, scored.entries.size()};
  require(folds.front() == 0 && folds.back() == scored.entries.size(), "folds must partition the scores");
  std::vector<Labeled> all;
  for (const auto& e : scored.entries) {
    require(std::isfinite(e.score), "scores must be finite");
    all.push_back({e.score, e.pair.same});
  }
  VerificationMetrics m;
  m.roc = eval_detail::roc_curve(all);
  m.nauc = 100.0 * eval_detail::auc(m.roc);
  m.eer100 = 100.0 * (1.0 - eval_detail::eer(m.roc));

  std::vector<double> accs, naucs, eers;
  const auto k = folds.size() - 1;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<Labeled> train, test;
    for (std::size_t i = 0; i < all.size(); ++i) {
      const bool in_fold = i >= folds[f] && i < folds[f + 1];
      (in_fold ? test : train).push_back(all[i]);
    }
    if (test.empty()) continue;
    if (k == 1) train = test;
    accs.push_back(100.0 * eval_detail::accuracy_at(test, eval_detail::best_threshold(train)));
    const bool has_pos = std::any_of(test.begin(), test.end(), [](const Labeled& l) { return l.same; });
    const bool has_neg = std::any_of(test.begin(), test.end(), [](const Labeled& l) { return !l.same; });
    if (has_pos && has_neg) {
      const auto roc = eval_detail::roc_curve(test);
      naucs.push_back(100.0 * eval_detail::auc(roc));
      eers.push_back(100.0 * (1.0 - eval_detail::eer(roc)));
    }
  }
  double unused = 0.0;
  eval_detail::mean_std(accs, m.acc_mean, m.acc_std);
  eval_detail::mean_std(naucs, m.nauc_mean, m.nauc_std);
  eval_detail::mean_std(eers, unused, m.eer100_std);
  if (naucs.empty()) m.nauc_mean = m.nauc;
  return m;
}

/// Mean of both trials; spreads combined as the mean of the per-trial stds.
inline VerificationMetrics average_trials(const VerificationMetrics& a, const VerificationMetrics& b) {
  VerificationMetrics m;
  m.eer100 = 0.5 * (a.eer100 + b.eer100);
  m.eer100_std = 0.5 * (a.eer100_std + b.eer100_std);
  m.acc_mean = 0.5 * (a.acc_mean + b.acc_mean);
  m.acc_std = 0.5 * (a.acc_std + b.acc_std);
  m.nauc = 0.5 * (a.nauc + b.nauc);
  m.nauc_mean = 0.5 * (a.nauc_mean + b.nauc_mean);
  m.nauc_std = 0.5 * (a.nauc_std + b.nauc_std);
  return m;
}

/// "98.10±0.90 & 98.12±0.80 & 99.71±0.24" style table row.
inline std::string format_row(const VerificationMetrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.2f\xC2\xB1%.2f & %.2f\xC2\xB1%.2f & %.2f\xC2\xB1%.2f", m.eer100, m.eer100_std,
                m.acc_mean, m.acc_std, m.nauc_mean, m.nauc_std);
  return buf;
}

}  // namespace faceswap
