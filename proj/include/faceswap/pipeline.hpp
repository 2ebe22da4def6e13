#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "faceswap/blend.hpp"
#include "faceswap/error.hpp"
#include "faceswap/eval.hpp"
#include "faceswap/eval_io.hpp"
#include "faceswap/expression.hpp"
#include "faceswap/formats.hpp"
#include "faceswap/image.hpp"
#include "faceswap/model.hpp"
#include "faceswap/png_io.hpp"
#include "faceswap/pose.hpp"
#include "faceswap/render.hpp"

namespace faceswap {

/// Files describing one image. By convention an image `X/X_1.png` comes
/// with `X/X_1.landmarks.json`, `X/X_1.mask.png` and optionally
/// `X/X_1.alpha.json`.
struct ImageInputs {
  std::filesystem::path image;
  std::filesystem::path landmarks;
  std::filesystem::path mask;
  std::optional<std::filesystem::path> alpha;

  static ImageInputs from_ref(const std::filesystem::path& root, const std::string& ref) {
    const auto base = root / ref;
    auto with = [&](const char* suffix) {
      auto p = base;
      p.replace_extension(suffix);
      return p;
    };
    ImageInputs in{base, with(".landmarks.json"), with(".mask.png"), std::nullopt};
    if (std::filesystem::exists(with(".alpha.json"))) in.alpha = with(".alpha.json");
    return in;
  }
};

enum class ShapeMode { kGeneric, kEstimated };

struct SwapOptions {
  ShapeMode shape = ShapeMode::kEstimated;
  bool segmentation = true;
  BlendMode blend = BlendMode::kPoisson;
  bool mixed_gradients = false;
  std::optional<double> focal;
  std::optional<Eigen::Vector2d> principal_point;
  std::uint64_t seed = 0;
};

inline const char* to_string(ShapeMode s) { return s == ShapeMode::kGeneric ? "generic" : "estimated"; }
inline const char* to_string(BlendMode b) { return b == BlendMode::kPoisson ? "poisson" : "paste"; }

/// Name of one of the four ablation rows.
inline std::string ablation_name(const SwapOptions& o) {
  if (o.shape == ShapeMode::kGeneric) return o.segmentation ? "Seg." : "Generic";
  return o.segmentation ? "Est. 3D+Seg." : "Est. 3D";
}

inline std::vector<SwapOptions> ablation_rows(SwapOptions base = {}) {
  std::vector<SwapOptions> rows;
  for (auto shape : {ShapeMode::kGeneric, ShapeMode::kEstimated})
    for (bool seg : {false, true}) {
      base.shape = shape;
      base.segmentation = seg;
      rows.push_back(base);
    }
  // Generic, Est. 3D, Seg., Est. 3D+Seg.
  std::swap(rows[1], rows[2]);
  return rows;
}

struct SwapJob {
  ImageInputs source;
  ImageInputs target;
  SwapOptions options;
};

struct SwapResult {
  Image image;
  nlohmann::ordered_json metadata;
};

/// A swap that failed in a named stage.
class SwapFailure : public std::runtime_error {
 public:
  SwapFailure(std::string stage, ErrorCode code, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), cause_(code) {}

  const std::string& stage() const noexcept { return stage_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  std::string stage_;
  ErrorCode cause_;
};

namespace pipeline_detail {

class StageRunner {
 public:
  explicit StageRunner(nlohmann::ordered_json& timing) : timing_(timing) {}

  template <typename F>
  auto operator()(const char* stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        record(stage, t0);
      } else {
        auto r = f();
        record(stage, t0);
        return r;
      }
    } catch (const SwapFailure&) {
      throw;
    } catch (const Error& e) {
      throw SwapFailure(stage, e.code(), e.what());
    } catch (const std::exception& e) {
      throw SwapFailure(stage, ErrorCode::kIo, std::string("io-error: ") + e.what());
    }
  }

 private:
  void record(const char* stage, std::chrono::steady_clock::time_point t0) {
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    timing_[stage] = timing_.value(stage, 0.0) + ms;
  }
  nlohmann::ordered_json& timing_;
};

struct SideState {
  Image image;
  Mask mask;
  ShapeCoeffs alpha;
  LandmarkSet landmarks;
  CameraIntrinsics cam;
  Pose pose;
  ExpressionFit expression;
};

inline nlohmann::ordered_json side_json(const SideState& s, const std::filesystem::path& image) {
  nlohmann::ordered_json j;
  j["image"] = image.generic_string();
  j["pose"] = pose_to_json(s.pose, s.cam);
  j["reprojection_rms_px"] = 0.0;
  j["gamma"] = formats_detail::to_std(s.expression.gamma.gamma);
  j["visible_landmarks"] = s.expression.visible.size();
  j["alpha_zero"] = s.alpha.alpha.isZero(0.0);
  return j;
}

}  // namespace pipeline_detail

/// The swap: pose, expression, sampling on the source, color
/// transfer, rendering on the target and blending. Throws SwapFailure
/// naming the stage that failed.
inline SwapResult run_swap(const MorphableModel& model, const LandmarkMapping& mapping, const SwapJob& job) {
  using SideState = pipeline_detail::SideState;
  nlohmann::ordered_json timing = nlohmann::ordered_json::object();
  pipeline_detail::StageRunner stage(timing);
  const auto& opt = job.options;
  SideState src, dst;

  stage("input", [&] {
    src.image = load_image(job.source.image);
    dst.image = load_image(job.target.image);
    for (auto* s : {&src, &dst}) {
      const auto& in = s == &src ? job.source : job.target;
      if (opt.segmentation) {
        s->mask = load_mask(in.mask);
        require_same_size(s->mask.width, s->mask.height, s->image.width, s->image.height, in.mask.string().c_str());
      } else {
        s->mask = Mask(s->image.width, s->image.height, true);
      }
      if (opt.shape == ShapeMode::kGeneric) {
        s->alpha = ShapeCoeffs::zero(model);
      } else {
        if (!in.alpha) fail(ErrorCode::kIo, "estimated shape needs an alpha file for " + in.image.string());
        s->alpha = load_alpha(*in.alpha);
        require(s->alpha.alpha.size() == model.shape_dim(), "alpha length must equal model Ks");
      }
      s->cam = CameraIntrinsics::default_for(s->image.width, s->image.height);
      if (opt.focal) s->cam.focal = *opt.focal;
      if (opt.principal_point) s->cam.principal_point = *opt.principal_point;
      s->cam.validate();
    }
  });
  stage("landmarks", [&] {
    for (auto* s : {&src, &dst}) {
      s->landmarks = load_landmarks(s == &src ? job.source.landmarks : job.target.landmarks);
      require(static_cast<std::size_t>(s->landmarks.points.cols()) == mapping.size(),
              "landmark file has " + std::to_string(s->landmarks.points.cols()) + " points, mapping has " +
                  std::to_string(mapping.size()));
    }
  });
  stage("pose", [&] {
    for (auto* s : {&src, &dst}) {
      const auto neutral = synthesize_shape(model, s->alpha, ExpressionCoeffs::zero(model));
      s->pose = estimate_pose(s->landmarks.points, select_landmarks(neutral, mapping), s->cam);
    }
  });
  stage("expression", [&] {
    for (auto* s : {&src, &dst})
      s->expression = fit_expression(model, s->alpha, s->pose, s->cam, s->landmarks.points, mapping);
  });
  const auto colors = stage("sample", [&] {
    auto v = synthesize_shape(model, src.alpha, src.expression.gamma);
    attach_normals(v, model.triangles);
    return sample_vertex_colors(src.image, v, src.pose, src.cam, src.mask);
  });
  const auto transferred = stage("transfer", [&] { return transfer_colors(colors, model.vertex_count()); });
  const auto layer = stage("render", [&] {
    const auto v = synthesize_shape(model, dst.alpha, dst.expression.gamma);
    return render_mesh(v.coords, transferred, model.triangles, dst.pose, dst.cam, dst.mask);
  });

  SwapResult result;
  nlohmann::ordered_json blend_meta;
  std::vector<std::string> warnings;
  stage("blend", [&] {
    blend_meta["mode"] = to_string(opt.blend);
    if (opt.blend == BlendMode::kPaste) {
      result.image = paste(layer, dst.image);
      return;
    }
    const Mask region = opt.segmentation ? erode(dst.mask) : Mask(dst.image.width, dst.image.height, true);
    BlendOptions bo;
    bo.mixed_gradients = opt.mixed_gradients;
    auto res = poisson_blend(layer, dst.image, region, bo);
    blend_meta["region"] = opt.segmentation ? "coverage interior within target mask eroded by 1 px"
                                            : "coverage interior";
    blend_meta["mixed_gradients"] = opt.mixed_gradients;
    blend_meta["domain_pixels"] = res.domain.count();
    blend_meta["cg_iterations"] = res.iterations;
    blend_meta["converged"] = res.converged;
    if (!res.warning.empty()) warnings.push_back(res.warning);
    result.image = std::move(res.image);
  });

  auto& m = result.metadata;
  m["ablation"] = ablation_name(opt);
  m["options"] = {{"shape", to_string(opt.shape)},
                  {"segmentation", opt.segmentation ? "on" : "off"},
                  {"blend", to_string(opt.blend)},
                  {"seed", opt.seed}};
  m["alpha_zero"] = src.alpha.alpha.isZero(0.0) && dst.alpha.alpha.isZero(0.0);
  m["mask_full_frame"] = !opt.segmentation;
  m["source"] = pipeline_detail::side_json(src, job.source.image);
  m["source"]["reprojection_rms_px"] = reprojection_rms(
      src.landmarks.points, select_landmarks(synthesize_shape(model, src.alpha, ExpressionCoeffs::zero(model)), mapping),
      src.pose, src.cam);
  m["target"] = pipeline_detail::side_json(dst, job.target.image);
  m["target"]["reprojection_rms_px"] = reprojection_rms(
      dst.landmarks.points, select_landmarks(synthesize_shape(model, dst.alpha, ExpressionCoeffs::zero(model)), mapping),
      dst.pose, dst.cam);
  m["sampled_vertices"] = colors.sampled_count();
  m["covered_pixels"] = layer.coverage_mask().count();
  m["blend"] = blend_meta;
  m["warnings"] = warnings;
  m["timing_ms"] = timing;
  return result;
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::kIo, "sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

struct BatchItem {
  std::string output;
  std::size_t pair_index = 0;
  bool ok = false;
  std::string stage;
  std::string error;
  std::string sha256;  // of the written PNG, empty if nothing was written
};

struct BatchReport {
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::vector<BatchItem> items;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["ok"] = ok;
    j["failed"] = failed;
    auto& arr = j["items"] = nlohmann::ordered_json::array();
    for (const auto& it : items) {
      nlohmann::ordered_json e = {{"output", it.output}, {"pair", it.pair_index}, {"ok", it.ok}, {"sha256", it.sha256}};
      if (!it.ok) {
        e["stage"] = it.stage;
        e["error"] = it.error;
      }
      arr.push_back(e);
    }
    return j;
  }
};

struct BatchOptions {
  SwapOptions swap;
  int workers = 1;
  bool write_metadata = true;
};

/// Runs every plan entry, writing `<pairIdx>_<trial>_<side>.png` into
/// out_dir. A failed job is recorded and, when the target image can be
/// read, the unmodified target is written in its place so the scored
/// manifest stays complete. Writes report.json and manifest.csv.
inline BatchReport run_batch(const MorphableModel& model, const LandmarkMapping& mapping, const SwapPlan& plan,
                             const std::filesystem::path& data_root, const std::filesystem::path& out_dir,
                             const BatchOptions& opts = {}) {
  std::filesystem::create_directories(out_dir);
  BatchReport report;
  report.items.resize(plan.entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < plan.entries.size(); i = next.fetch_add(1)) {
      const auto& e = plan.entries[i];
      auto& item = report.items[i];
      item.output = SwapPlan::output_name(e, plan.trial);
      item.pair_index = e.pair_index;
      const SwapJob job{ImageInputs::from_ref(data_root, e.source), ImageInputs::from_ref(data_root, e.target),
                        opts.swap};
      const auto out_path = out_dir / item.output;
      try {
        auto res = run_swap(model, mapping, job);
        const auto png = encode_png(res.image);
        write_file_atomic(out_path, png);
        item.sha256 = sha256_hex(png);
        if (opts.write_metadata) {
          auto meta_path = out_path;
          meta_path.replace_extension(".json");
          write_file_atomic(meta_path, res.metadata.dump(2) + "\n");
        }
        item.ok = true;
      } catch (const SwapFailure& f) {
        item.stage = f.stage();
        item.error = f.what();
      } catch (const std::exception& ex) {
        item.stage = "output";
        item.error = ex.what();
      }
      if (!item.ok) {
        try {
          const auto png = encode_png(load_image(job.target.image));
          write_file_atomic(out_path, png);
          item.sha256 = sha256_hex(png);
        } catch (const std::exception&) {
          item.sha256.clear();
        }
      }
    }
  };
  const int n = std::max(1, opts.workers);
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& it : report.items) (it.ok ? report.ok : report.failed) += 1;
  write_file_atomic(out_dir / "report.json", report.to_json().dump(2) + "\n");
  write_file_atomic(out_dir / "manifest.csv", manifest_csv(plan));
  return report;
}

}  // namespace faceswap
