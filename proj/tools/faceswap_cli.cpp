// Command-line front end: swap, batch, plan, metrics, verify, augment,
// regions, serve and synth.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "faceswap/eval.hpp"
#include "faceswap/eval_io.hpp"
#include "faceswap/model_io.hpp"
#include "faceswap/pipeline.hpp"
#include "faceswap/segment.hpp"
#include "faceswap/synthetic_gallery.hpp"
#include "faceswap/serve.hpp"

namespace fs = faceswap;
namespace stdfs = std::filesystem;

namespace {

struct SwapFlags {
  std::string shape = "estimated";
  std::string seg = "on";
  std::string blend = "poisson";
  bool mixed = false;
  double focal = 0.0;
  std::vector<double> pp;
  std::uint64_t seed = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--shape", shape, "Face shape: generic (average face) or estimated (alpha files)")
        ->check(CLI::IsMember({"generic", "estimated"}))
        ->capture_default_str();
    cmd->add_option("--seg", seg, "Use segmentation masks")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
    cmd->add_option("--blend", blend, "Final stage")->check(CLI::IsMember({"poisson", "paste"}))->capture_default_str();
    cmd->add_flag("--mixed-gradients", mixed, "Keep the stronger of source and target gradients");
    cmd->add_option("--focal", focal, "Focal length in pixels (default 1.5 * max(w, h))")->check(CLI::PositiveNumber);
    cmd->add_option("--pp", pp, "Principal point x y (default image center)")->expected(2);
    cmd->add_option("--seed", seed, "Recorded in metadata")->capture_default_str();
  }

  fs::SwapOptions options() const {
    fs::SwapOptions o;
    o.shape = shape == "generic" ? fs::ShapeMode::kGeneric : fs::ShapeMode::kEstimated;
    o.segmentation = seg == "on";
    o.blend = blend == "paste" ? fs::BlendMode::kPaste : fs::BlendMode::kPoisson;
    o.mixed_gradients = mixed;
    if (focal > 0) o.focal = focal;
    if (pp.size() == 2) o.principal_point = Eigen::Vector2d(pp[0], pp[1]);
    o.seed = seed;
    return o;
  }
};

struct ModelFlags {
  std::string model;
  std::string mapping;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", model, "Morphable model file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--mapping", mapping, "Landmark mapping (one vertex index per line)")
        ->required()
        ->check(CLI::ExistingFile);
  }

  std::pair<fs::MorphableModel, fs::LandmarkMapping> load() const {
    auto m = fs::load_model(model);
    auto map = fs::load_mapping(mapping);
    map.validate(m.vertex_count());
    return {std::move(m), std::move(map)};
  }
};

std::string slug(const std::string& ablation) {
  if (ablation == "Generic") return "generic";
  if (ablation == "Est. 3D") return "est3d";
  if (ablation == "Seg.") return "seg";
  return "est3d_seg";
}

void print_json(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << "\n"; }

fs::ImageInputs inputs_for(const std::string& image, const std::string& landmarks, const std::string& mask,
                           const std::string& alpha) {
  stdfs::path p(image);
  auto in = fs::ImageInputs::from_ref(p.parent_path(), p.filename().string());
  if (!landmarks.empty()) in.landmarks = landmarks;
  if (!mask.empty()) in.mask = mask;
  if (!alpha.empty()) in.alpha = stdfs::path(alpha);
  return in;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Face swapping engine and evaluation harness"};
  app.set_config("--config", "", "TOML-style file with option values; command-line flags win");
  app.require_subcommand(1);
  int status = 0;

  // swap
  auto* swap = app.add_subcommand("swap", "Swap the source face onto the target image");
  ModelFlags swap_model;
  SwapFlags swap_flags;
  std::string src, dst, out, meta, src_lm, dst_lm, src_mask, dst_mask, src_alpha, dst_alpha;
  swap_model.add_to(swap);
  swap_flags.add_to(swap);
  swap->add_option("--source", src, "Source image")->required()->check(CLI::ExistingFile);
  swap->add_option("--target", dst, "Target image")->required()->check(CLI::ExistingFile);
  swap->add_option("--out", out, "Output PNG")->required();
  swap->add_option("--metadata", meta, "Metadata JSON (default: output with .json)");
  swap->add_option("--source-landmarks", src_lm);
  swap->add_option("--target-landmarks", dst_lm);
  swap->add_option("--source-mask", src_mask);
  swap->add_option("--target-mask", dst_mask);
  swap->add_option("--source-alpha", src_alpha);
  swap->add_option("--target-alpha", dst_alpha);
  swap->callback([&] {
    const auto [model, mapping] = swap_model.load();
    const fs::SwapJob job{inputs_for(src, src_lm, src_mask, src_alpha), inputs_for(dst, dst_lm, dst_mask, dst_alpha),
                          swap_flags.options()};
    try {
      const auto res = fs::run_swap(model, mapping, job);
      fs::save_png(res.image, out);
      fs::save_json(res.metadata, meta.empty() ? stdfs::path(out).replace_extension(".json") : stdfs::path(meta));
    } catch (const fs::SwapFailure& f) {
      std::cerr << "swap failed: " << f.what() << "\n";
      status = 1;
    }
  });

  // batch
  auto* batch = app.add_subcommand("batch", "Run every entry of a swap plan");
  ModelFlags batch_model;
  SwapFlags batch_flags;
  std::string plan_path, data_root, out_dir;
  int workers = 1;
  bool ablation = false;
  batch_model.add_to(batch);
  batch_flags.add_to(batch);
  batch->add_option("--plan", plan_path, "SwapPlan JSON")->required()->check(CLI::ExistingFile);
  batch->add_option("--data", data_root, "Directory the plan's references are relative to")
      ->required()
      ->check(CLI::ExistingDirectory);
  batch->add_option("--out", out_dir, "Output directory")->required();
  batch->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  batch->add_flag("--ablation", ablation,
                  "Run the four configurations (generic, est3d, seg, est3d_seg) into subdirectories; "
                  "--shape and --seg are ignored");
  batch->callback([&] {
    const auto [model, mapping] = batch_model.load();
    const auto plan = fs::plan_from_json(fs::load_json(plan_path));
    std::vector<fs::SwapOptions> rows = {batch_flags.options()};
    if (ablation) rows = fs::ablation_rows(batch_flags.options());
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
      fs::BatchOptions bo;
      bo.swap = row;
      bo.workers = workers;
      const auto dir = ablation ? stdfs::path(out_dir) / slug(fs::ablation_name(row)) : stdfs::path(out_dir);
      const auto report = fs::run_batch(model, mapping, plan, data_root, dir, bo);
      summary.push_back({{"ablation", fs::ablation_name(row)}, {"dir", dir.string()}, {"ok", report.ok},
                         {"failed", report.failed}});
      if (report.failed > 0) status = 1;
    }
    if (ablation) fs::save_json(summary, stdfs::path(out_dir) / "ablation.json");
    print_json(summary);
  });

  // plan
  auto* plan = app.add_subcommand("plan", "Emit a SwapPlan for a pair list");
  std::string pairs_path, gallery_root, mode = "face", trial = "A", plan_out;
  std::uint64_t plan_seed = 0;
  std::size_t folds = 10;
  plan->add_option("--pairs", pairs_path, "Pair list CSV img1,img2,same")->required()->check(CLI::ExistingFile);
  plan->add_option("--gallery", gallery_root, "Gallery root with one directory per subject")
      ->required()
      ->check(CLI::ExistingDirectory);
  plan->add_option("--mode", mode, "face (face preserving), context (context preserving) or intra")
      ->check(CLI::IsMember({"face", "context", "intra"}))
      ->capture_default_str();
  plan->add_option("--trial", trial)->check(CLI::IsMember({"A", "B"}))->capture_default_str();
  plan->add_option("--seed", plan_seed)->capture_default_str();
  plan->add_option("--folds", folds, "Consecutive equal folds")->check(CLI::PositiveNumber)->capture_default_str();
  plan->add_option("--out", plan_out, "Output JSON (default stdout)");
  plan->callback([&] {
    const auto pairs = fs::parse_pairs_csv(fs::read_text(pairs_path), folds);
    const auto gallery = fs::scan_gallery(gallery_root);
    const auto t = trial == "B" ? fs::Trial::kB : fs::Trial::kA;
    const auto p = mode == "intra" ? fs::build_intra_plan(pairs, gallery, plan_seed, t)
                                   : fs::build_inter_plan(pairs, gallery, plan_seed,
                                                          mode == "face" ? fs::SwapMode::kFacePreserving
                                                                         : fs::SwapMode::kContextPreserving,
                                                          t);
    const auto j = fs::plan_to_json(p);
    if (plan_out.empty()) print_json(j);
    else fs::save_json(j, plan_out);
  });

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Score predicted masks against ground truth");
  std::string pred_dir, gt_dir;
  metrics->add_option("--pred", pred_dir, "Directory of predicted mask PNGs")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--gt", gt_dir, "Directory of ground-truth mask PNGs with the same names")
      ->required()
      ->check(CLI::ExistingDirectory);
  metrics->callback([&] {
    std::vector<std::string> names;
    for (const auto& f : stdfs::directory_iterator(gt_dir))
      if (f.path().extension() == ".png") names.push_back(f.path().filename().string());
    std::sort(names.begin(), names.end());
    std::vector<std::pair<fs::Mask, fs::Mask>> pairs;
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (const auto& n : names) {
      if (!stdfs::exists(stdfs::path(pred_dir) / n)) {
        std::cerr << "missing prediction for " << n << "\n";
        status = 1;
        continue;
      }
      auto pred = fs::load_mask(stdfs::path(pred_dir) / n);
      auto gt = fs::load_mask(stdfs::path(gt_dir) / n);
      fs::require_same_size(pred.width, pred.height, gt.width, gt.height, n.c_str());
      nlohmann::ordered_json row = {{"image", n}, {"iou", fs::iou(pred, gt)}, {"global", fs::global_accuracy(pred, gt)}};
      if (!gt.empty()) row["ave_face"] = fs::ave_face_recall(pred, gt);
      per.push_back(row);
      pairs.emplace_back(std::move(pred), std::move(gt));
    }
    const auto s = fs::mean_scores(pairs);
    print_json({{"images", s.images}, {"iou", s.iou}, {"global", s.global}, {"ave_face", s.ave_face}, {"per_image", per}});
  });

  // verify
  auto* verify = app.add_subcommand("verify", "Verification metrics from recognizer scores");
  std::string vpairs, scores_a, scores_b, roc_out;
  std::size_t vfolds = 10;
  verify->add_option("--pairs", vpairs, "Pair list CSV img1,img2,same")->required()->check(CLI::ExistingFile);
  verify->add_option("--scores", scores_a, "Scores CSV img1,img2,score")->required()->check(CLI::ExistingFile);
  verify->add_option("--scores-b", scores_b, "Second trial; metrics are averaged")->check(CLI::ExistingFile);
  verify->add_option("--folds", vfolds)->check(CLI::PositiveNumber)->capture_default_str();
  verify->add_option("--roc", roc_out, "Write the ROC of the first trial as CSV");
  verify->callback([&] {
    const auto pairs = fs::parse_pairs_csv(fs::read_text(vpairs), vfolds);
    const auto a = fs::verification_metrics(fs::attach_scores(pairs, fs::read_text(scores_a)));
    if (!roc_out.empty()) fs::write_file_atomic(roc_out, fs::roc_csv(a));
    if (scores_b.empty()) return print_json(fs::metrics_to_json(a));
    const auto b = fs::verification_metrics(fs::attach_scores(pairs, fs::read_text(scores_b)));
    auto j = fs::metrics_to_json(fs::average_trials(a, b));
    j["trials"] = {fs::metrics_to_json(a), fs::metrics_to_json(b)};
    print_json(j);
  });

  // augment
  auto* augment = app.add_subcommand("augment", "Paste a hand patch over an image and clear it from the mask");
  std::string aug_image, aug_mask, hand, hand_alpha, aug_out, aug_mask_out;
  int pos_x = 0, pos_y = 0;
  augment->add_option("--image", aug_image)->required()->check(CLI::ExistingFile);
  augment->add_option("--mask", aug_mask)->required()->check(CLI::ExistingFile);
  augment->add_option("--hand", hand, "Hand patch PNG")->required()->check(CLI::ExistingFile);
  augment->add_option("--hand-alpha", hand_alpha, "Hand matte (0/255 PNG)")->required()->check(CLI::ExistingFile);
  augment->add_option("--x", pos_x, "Patch top-left x")->required();
  augment->add_option("--y", pos_y, "Patch top-left y")->required();
  augment->add_option("--out", aug_out)->required();
  augment->add_option("--mask-out", aug_mask_out)->required();
  augment->callback([&] {
    fs::PatchOccluder occ;
    occ.patch = fs::load_image(hand);
    const auto matte = fs::load_mask(hand_alpha);
    fs::require_same_size(matte.width, matte.height, occ.patch.width, occ.patch.height, "hand matte");
    occ.alpha.assign(matte.labels.begin(), matte.labels.end());
    const auto r = fs::augment_hand_overlay(fs::load_image(aug_image), fs::load_mask(aug_mask), occ, pos_x, pos_y);
    fs::save_png(r.image, aug_out);
    fs::save_png(r.mask, aug_mask_out);
  });

  // regions
  auto* regions = app.add_subcommand("regions", "Propose regions and optionally assemble a mask from a selection");
  std::string reg_image, reg_out, reg_mask_out;
  double threshold = 24.0;
  std::vector<std::uint32_t> select;
  regions->add_option("--image", reg_image)->required()->check(CLI::ExistingFile);
  regions->add_option("--threshold", threshold, "Max RGB distance between merged neighbours")->capture_default_str();
  regions->add_option("--out", reg_out, "Region map PNG (16-bit ids)")->required();
  regions->add_option("--select", select, "Region ids to assemble into a mask");
  regions->add_option("--mask-out", reg_mask_out, "Assembled mask PNG");
  regions->callback([&] {
    const auto r = fs::propose_regions(fs::load_image(reg_image), threshold);
    fs::save_png(r, reg_out);
    if (!reg_mask_out.empty())
      fs::save_png(fs::assemble_mask(r, std::set<std::uint32_t>(select.begin(), select.end())), reg_mask_out);
    print_json({{"count", r.count}, {"width", r.width}, {"height", r.height}});
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Serve frames, region proposals and masks for the labeling UI");
  std::string serve_root, host = "127.0.0.1";
  int port = 8080;
  double serve_threshold = 24.0;
  serve->add_option("--root", serve_root, "Directory of <id>.png frames")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--threshold", serve_threshold, "Region proposal threshold")->capture_default_str();
  serve->callback([&] {
    fs::MaskServer server(serve_root, {serve_threshold});
    std::cerr << "serving " << serve_root << " on http://" << host << ":" << port << "\n";
    if (!server.listen(host, port)) {
      std::cerr << "cannot listen on " << host << ":" << port << "\n";
      status = 1;
    }
  });

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic gallery with model, mapping and pairs");
  std::string synth_out;
  fs::SyntheticGalleryOptions sopt;
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--seed", sopt.seed)->capture_default_str();
  synth->add_option("--subjects", sopt.subjects)->check(CLI::Range(2, 1000))->capture_default_str();
  synth->add_option("--images-per-subject", sopt.images_per_subject)->check(CLI::Range(2, 1000))->capture_default_str();
  synth->add_option("--size", sopt.size)->check(CLI::Range(32, 4096))->capture_default_str();
  synth->callback([&] {
    const auto g = fs::write_synthetic_gallery(synth_out, sopt);
    print_json({{"images", g.refs.size()}, {"pairs", g.pairs.entries.size()}, {"root", synth_out}});
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const fs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return status;
}
