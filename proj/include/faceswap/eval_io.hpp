#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "faceswap/error.hpp"
#include "faceswap/eval.hpp"
#include "faceswap/file_io.hpp"

namespace faceswap {

namespace eval_io_detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Splits non-empty lines into comma-separated fields. Quoting is not
/// supported; references must not contain commas.
inline std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(trim(f));
    rows.push_back(fields);
  }
  return rows;
}

inline bool parse_bool(const std::string& s, std::size_t line) {
  if (s == "1" || s == "true" || s == "same") return true;
  if (s == "0" || s == "false" || s == "not-same") return false;
  fail(ErrorCode::kParseMalformedHeader, "line " + std::to_string(line) + ": bad same flag '" + s + "'");
}

}  // namespace eval_io_detail

/// CSV `img1,img2,same`; a header row naming img1 is skipped.
inline PairList parse_pairs_csv(const std::string& text, std::size_t folds = 10) {
  PairList out;
  const auto rows = eval_io_detail::csv_rows(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i == 0 && !r.empty() && r[0] == "img1") continue;
    if (r.size() != 3)
      fail(ErrorCode::kParseDimensionMismatch, "pair row " + std::to_string(i + 1) + " needs 3 fields");
    out.entries.push_back({r[0], r[1], eval_io_detail::parse_bool(r[2], i + 1)});
  }
  out.set_even_folds(std::min(folds, std::max<std::size_t>(out.entries.size(), 1)));
  return out;
}

inline std::string pairs_csv(const PairList& pairs) {
  std::string s = "img1,img2,same\n";
  for (const auto& e : pairs.entries) s += e.img1 + "," + e.img2 + "," + (e.same ? "1" : "0") + "\n";
  return s;
}

/// Joins a `img1,img2,score` CSV onto the pair list (same order and folds).
inline ScoredPairList attach_scores(const PairList& pairs, const std::string& scores_csv) {
  std::map<std::pair<std::string, std::string>, double> scores;
  const auto rows = eval_io_detail::csv_rows(scores_csv);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i == 0 && !r.empty() && r[0] == "img1") continue;
    if (r.size() != 3)
      fail(ErrorCode::kParseDimensionMismatch, "score row " + std::to_string(i + 1) + " needs 3 fields");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(r[2], &used);
      if (used != r[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorCode::kParseMalformedHeader, "score row " + std::to_string(i + 1) + ": bad score '" + r[2] + "'");
    }
    scores[{r[0], r[1]}] = v;
  }
  ScoredPairList out;
  out.fold_starts = pairs.fold_starts;
  for (const auto& p : pairs.entries) {
    auto it = scores.find({p.img1, p.img2});
    if (it == scores.end()) it = scores.find({p.img2, p.img1});
    if (it == scores.end()) fail(ErrorCode::kInvalidArgument, "no score for pair " + p.img1 + "," + p.img2);
    out.entries.push_back({p, it->second});
  }
  return out;
}

/// Subject directories under root, each holding .png images. References
/// are relative to root.
inline Gallery scan_gallery(const std::filesystem::path& root) {
  namespace stdfs = std::filesystem;
  if (!stdfs::is_directory(root)) fail(ErrorCode::kIo, "gallery root " + root.string() + " is not a directory");
  std::vector<std::string> refs;
  for (const auto& subject : stdfs::directory_iterator(root)) {
    if (!subject.is_directory()) continue;
    for (const auto& f : stdfs::directory_iterator(subject.path())) {
      const auto name = f.path().filename().string();
      if (!f.is_regular_file() || f.path().extension() != ".png") continue;
      if (name.find(".mask.") != std::string::npos) continue;
      refs.push_back((subject.path().filename() / f.path().filename()).generic_string());
    }
  }
  return gallery_from_refs(refs);
}

inline nlohmann::ordered_json plan_to_json(const SwapPlan& plan) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(plan.mode);
  j["trial"] = to_string(plan.trial);
  j["seed"] = plan.seed;
  j["substitutions"] = plan.substitutions;
  j["folds"] = plan.pairs.fold_starts;
  auto& pairs = j["pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : plan.pairs.entries) pairs.push_back({{"img1", p.img1}, {"img2", p.img2}, {"same", p.same}});
  auto& entries = j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : plan.entries)
    entries.push_back({{"pair", e.pair_index},
                       {"side", to_string(e.side)},
                       {"source", e.source},
                       {"target", e.target},
                       {"output", SwapPlan::output_name(e, plan.trial)}});
  return j;
}

inline SwapPlan plan_from_json(const nlohmann::json& j) {
  try {
    SwapPlan plan;
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "face_preserving") plan.mode = SwapMode::kFacePreserving;
    else if (mode == "context_preserving") plan.mode = SwapMode::kContextPreserving;
    else if (mode == "intra") plan.mode = SwapMode::kIntra;
    else fail(ErrorCode::kParseMalformedHeader, "unknown plan mode " + mode);
    plan.trial = j.at("trial").get<std::string>() == "B" ? Trial::kB : Trial::kA;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.substitutions = j.value("substitutions", std::size_t{0});
    for (const auto& p : j.at("pairs"))
      plan.pairs.entries.push_back({p.at("img1"), p.at("img2"), p.at("same").get<bool>()});
    plan.pairs.fold_starts = j.at("folds").get<std::vector<std::size_t>>();
    for (const auto& e : j.at("entries"))
      plan.entries.push_back({e.at("pair").get<std::size_t>(),
                              e.at("side").get<std::string>() == "second" ? Side::kSecond : Side::kFirst,
                              e.at("source"), e.at("target")});
    return plan;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::kParseMalformedHeader, std::string("plan JSON: ") + ex.what());
  }
}

/// Image-pair manifest for the external recognizer: the evaluation pairs
/// with the swapped side replaced by the batch output.
inline std::string manifest_csv(const SwapPlan& plan, const std::string& output_prefix = "") {
  std::string s = "img1,img2,same\n";
  std::vector<const SwapEntry*> by_pair(plan.pairs.entries.size(), nullptr);
  for (const auto& e : plan.entries) by_pair[e.pair_index] = &e;
  for (std::size_t i = 0; i < plan.pairs.entries.size(); ++i) {
    auto p = plan.pairs.entries[i];
    if (const auto* e = by_pair[i]) {
      auto& swapped = e->side == Side::kFirst ? p.img1 : p.img2;
      swapped = output_prefix + SwapPlan::output_name(*e, plan.trial);
    }
    s += p.img1 + "," + p.img2 + "," + (p.same ? "1" : "0") + "\n";
  }
  return s;
}

inline nlohmann::ordered_json metrics_to_json(const VerificationMetrics& m) {
  return {{"eer100", m.eer100}, {"acc_mean", m.acc_mean}, {"acc_std", m.acc_std},
          {"nauc_mean", m.nauc_mean}, {"nauc_std", m.nauc_std}, {"eer100_std", m.eer100_std},
          {"nauc_pooled", m.nauc}, {"row", format_row(m)}};
}

inline std::string roc_csv(const VerificationMetrics& m) {
  std::string s = "threshold,far,tar\n";
  char buf[128];
  for (const auto& p : m.roc) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.far, p.tar);
    s += buf;
  }
  return s;
}

}  // namespace faceswap
