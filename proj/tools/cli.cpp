#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "manifest.hpp"
#include "semprobe/coco_eval.hpp"
#include "semprobe/error.hpp"
#include "semprobe/linear_probe.hpp"
#include "semprobe/matcher.hpp"
#include "semprobe/matcher_io.hpp"
#include "semprobe/parallel.hpp"
#include "semprobe/storage.hpp"
#include "semprobe/synthetic.hpp"
#include "semprobe/tsne.hpp"
#include "semprobe/version.hpp"

namespace semprobe::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

FeatureMatrix load_features(const fs::path& path) {
  Tensor t = read_tensor(path);
  if (t.dtype() != DType::F32 || t.ndim() != 2) {
    throw Error(ErrorKind::Validation, path.string() + ": features must be f32 [N, D]");
  }
  const std::size_t n = t.dim(0), d = t.dim(1);
  const auto values = t.f32();
  return FeatureMatrix::from_rows(n, d, std::vector<float>(values.begin(), values.end()));
}

LabelVector load_labels(const fs::path& path, std::int64_t num_classes = 0) {
  return LabelVector::from_tensor(read_tensor(path), num_classes);
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

// ---------------------------------------------------------------- probe

struct ProbeTrainArgs {
  std::string features, labels, val_features, val_labels, out, report;
  probe::TrainConfig config;
  bool no_shuffle = false;
  std::int64_t num_classes = 0;
};

void probe_train(const ProbeTrainArgs& a, const CLI::App& sub) {
  RunManifest manifest("probe train");
  manifest.capture_flags(sub);
  manifest.set_seed(a.config.seed);
  probe::TrainConfig config = a.config;
  config.shuffle = !a.no_shuffle;

  const FeatureMatrix x = load_features(a.features);
  const LabelVector y = load_labels(a.labels, a.num_classes);
  manifest.add_input(a.features);
  manifest.add_input(a.labels);

  std::optional<FeatureMatrix> vx;
  std::optional<LabelVector> vy;
  if (!a.val_features.empty() != !a.val_labels.empty()) {
    throw Error(ErrorKind::Input, "--val-features and --val-labels must be given together");
  }
  if (!a.val_features.empty()) {
    vx = load_features(a.val_features);
    vy = load_labels(a.val_labels, y.num_classes);
    manifest.add_input(a.val_features);
    manifest.add_input(a.val_labels);
  }
  std::optional<probe::LabeledFeatures> val;
  if (vx) val.emplace(probe::LabeledFeatures{*vx, *vy});

  const probe::TrainResult result = probe::train(x, y, val, config);
  write_checkpoint(a.out, result.model);
  manifest.write_next_to(a.out);

  std::cout << "epoch  train_loss  val_top1\n";
  json epochs = json::array();
  for (const auto& m : result.history) {
    std::cout << std::setw(5) << m.epoch << "  " << std::fixed << std::setprecision(6) << std::setw(10)
              << m.train_loss << "  " << (m.val_top1 ? pct(*m.val_top1) : std::string("-")) << '\n';
    epochs.push_back({{"epoch", m.epoch},
                      {"train_loss", m.train_loss},
                      {"val_top1", m.val_top1 ? json(*m.val_top1) : json(nullptr)}});
  }
  if (!a.report.empty()) {
    json report{{"epochs", epochs},
                {"num_classes", result.model.num_classes},
                {"dim", result.model.dim},
                {"train_top1", probe::topk_accuracy(result.model, x, y, 1)}};
    if (vx) {
      report["val_top1"] = probe::topk_accuracy(result.model, *vx, *vy, 1);
      if (result.model.num_classes >= 5) report["val_top5"] = probe::topk_accuracy(result.model, *vx, *vy, 5);
    }
    write_json(a.report, report);
  }
}

struct ProbeEvalArgs {
  std::string model, features, labels, report;
  std::vector<std::size_t> topk{1, 5};
};

void probe_eval(const ProbeEvalArgs& a, const CLI::App& sub) {
  const ProbeModel model = read_checkpoint(a.model);
  const FeatureMatrix x = load_features(a.features);
  const LabelVector y = load_labels(a.labels, static_cast<std::int64_t>(model.num_classes));
  json report = json::object();
  for (std::size_t k : a.topk) {
    const double acc = probe::topk_accuracy(model, x, y, k);
    std::cout << "top-" << k << " accuracy: " << pct(acc) << "%\n";
    report["top" + std::to_string(k)] = acc;
  }
  if (!a.report.empty()) {
    write_json(a.report, report);
    RunManifest manifest("probe eval");
    manifest.capture_flags(sub);
    manifest.add_input(a.model);
    manifest.add_input(a.features);
    manifest.add_input(a.labels);
    manifest.write_next_to(a.report);
  }
}

// ---------------------------------------------------------------- matcher

struct ProtoBuildArgs {
  std::string refs, out;
  std::uint32_t stride = 14;
};

void proto_build(const ProtoBuildArgs& a, const CLI::App& sub) {
  RunManifest manifest("proto build");
  manifest.capture_flags(sub);
  const auto loaded = match::load_reference_set(a.refs);
  manifest.add_input(a.refs);
  const auto protos = match::build_prototypes(loaded.set, a.stride);
  match::save_prototypes(a.out, protos);
  manifest.write_next_to(a.out);
  std::map<std::int64_t, std::size_t> per_category;
  for (const auto& p : protos) ++per_category[p.category_id];
  std::cout << "built " << protos.size() << " prototypes across " << per_category.size() << " categories\n";
  for (const auto& [cat, n] : per_category) std::cout << "  category " << cat << ": " << n << '\n';
}

struct MatchRunArgs {
  std::string target_map, target_meta, proposals, protos, protos_meta, out;
  double sim_threshold = 0.5;
  double nms_iou = 0.5;
  std::uint32_t stride = 0;
};

void match_run(const MatchRunArgs& a, const CLI::App& sub) {
  RunManifest manifest("match run");
  manifest.capture_flags(sub);
  const DenseFeatureMap target = load_dense_map(a.target_map, a.target_meta);
  const auto proposals = match::load_proposals(a.proposals);
  const auto protos = match::load_prototypes(
      a.protos, a.protos_meta.empty() ? std::nullopt : std::optional<fs::path>(a.protos_meta));
  for (const auto& p : {a.target_map, a.target_meta, a.proposals, a.protos}) manifest.add_input(p);

  const std::uint32_t stride = a.stride ? a.stride : target.meta.stride;
  std::vector<Detection> dets;
  if (!proposals.empty()) {
    dets = match::dedup(match::match_proposals(proposals, protos, target, stride, a.sim_threshold), a.nms_iou);
  }
  save_detections(a.out, dets);
  manifest.write_next_to(a.out);
  std::cout << proposals.size() << " proposals -> " << dets.size() << " detections\n";
}

struct GridArgs {
  std::uint32_t width = 1024, height = 1024, points_per_side = 32;
  std::string out;
};

void grid(const GridArgs& a, const CLI::App& sub) {
  const auto points = match::grid_points(a.width, a.height, a.points_per_side);
  const json j = match::points_to_json(a.width, a.height, a.points_per_side, points);
  if (a.out.empty()) {
    std::cout << j.dump() << '\n';
    return;
  }
  write_json(a.out, j);
  RunManifest manifest("grid");
  manifest.capture_flags(sub);
  manifest.write_next_to(a.out);
  std::cout << points.size() << " points written to " << a.out << '\n';
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string dets, gt, iou_type = "mask", splits, report, csv;
  std::size_t max_dets = 100;
  std::vector<std::int64_t> categories;
};

void eval_coco(const EvalArgs& a, const CLI::App& sub) {
  eval::EvalConfig config;
  config.iou_type = eval::iou_type_from_string(a.iou_type);
  config.max_detections = a.max_dets;
  if (!a.categories.empty()) config.category_filter = a.categories;
  const AnnotationSet gt = load_annotations(a.gt);
  const auto dets = load_detections(a.dets);
  const eval::EvalResult result = eval::evaluate(dets, gt, config);
  std::cout << eval::format_table(result);

  json report = eval::to_json(result);
  if (!a.splits.empty()) {
    const auto split = eval::split_from_json(read_json(a.splits));
    const auto rows = eval::split_report(result, split);
    std::cout << '\n' << eval::format_split_table(rows, config.iou_type);
    report["splits"] = eval::to_json(rows);
  }
  if (!a.report.empty() || !a.csv.empty()) {
    RunManifest manifest("eval coco");
    manifest.capture_flags(sub);
    manifest.add_input(a.dets);
    manifest.add_input(a.gt);
    if (!a.splits.empty()) manifest.add_input(a.splits);
    if (!a.report.empty()) {
      write_json(a.report, report);
      manifest.write_next_to(a.report);
    }
    if (!a.csv.empty()) {
      write_text(a.csv, eval::to_csv(result));
      manifest.write_next_to(a.csv);
    }
  }
}

// ---------------------------------------------------------------- tsne

struct TsneArgs {
  std::string features, labels, out, svg, report;
  tsne::TsneConfig config;
  bool l2_normalize = false;
  std::size_t pca_dims = 0;
};

void run_tsne(const TsneArgs& a, const CLI::App& sub) {
  RunManifest manifest("tsne");
  manifest.capture_flags(sub);
  manifest.set_seed(a.config.seed);
  FeatureMatrix x = load_features(a.features);
  manifest.add_input(a.features);
  std::optional<LabelVector> y;
  if (!a.labels.empty()) {
    y = load_labels(a.labels);
    manifest.add_input(a.labels);
    if (y->labels.size() != x.rows()) throw Error(ErrorKind::Input, "feature/label row count mismatch");
  }
  if (a.l2_normalize) x = tsne::l2_normalize_rows(x);
  if (a.pca_dims > 0) x = tsne::pca_project(x, a.pca_dims);

  const tsne::Embedding2D emb = tsne::run(x, a.config);
  write_tensor(a.out, Tensor::f32({emb.n, 2}, emb.points));
  manifest.write_next_to(a.out);

  json report{{"final_kl", emb.final_kl}, {"kl_after_exaggeration", emb.kl_after_exaggeration}, {"n", emb.n}};
  std::cout << "final KL: " << emb.final_kl << " (after exaggeration: " << emb.kl_after_exaggeration << ")\n";
  if (y) {
    const double s_emb = tsne::silhouette(emb.points, 2, y->labels);
    const double s_in = tsne::silhouette(x.features.f32(), x.cols(), y->labels);
    std::cout << "silhouette (embedding): " << s_emb << "\nsilhouette (input features): " << s_in << '\n';
    report["silhouette"] = s_emb;
    report["silhouette_input"] = s_in;
  }
  if (!a.svg.empty()) {
    const std::vector<std::int64_t> labels = y ? y->labels : std::vector<std::int64_t>{};
    write_text(a.svg, tsne::render_svg(emb, labels));
  }
  if (!a.report.empty()) write_json(a.report, report);
}

// ---------------------------------------------------------------- synth

struct BlobArgs {
  synth::BlobSpec spec;
  std::string out_features, out_labels;
};

void synth_blobs(const BlobArgs& a, const CLI::App& sub) {
  const auto [x, y] = synth::gen_blobs(a.spec);
  write_tensor(a.out_features, x.features);
  write_tensor(a.out_labels, y.to_tensor());
  RunManifest manifest("synth blobs");
  manifest.capture_flags(sub);
  manifest.set_seed(a.spec.seed);
  manifest.write_next_to(a.out_features);
  std::cout << x.rows() << " x " << x.cols() << " features, " << y.num_classes << " classes\n";
}

struct SceneArgs {
  synth::SceneSpec spec;
  std::string out_dir;
};

void synth_scene(const SceneArgs& a, const CLI::App& sub) {
  const auto scene = synth::gen_planted_scene(a.spec);
  synth::write_scene(a.out_dir, scene);
  RunManifest manifest("synth scene");
  manifest.capture_flags(sub);
  manifest.set_seed(a.spec.seed);
  manifest.write_next_to(fs::path(a.out_dir) / "scene");
  std::cout << "scene with " << scene.ground_truth.annotations.size() << " objects and " << scene.proposals.size()
            << " proposals written to " << a.out_dir << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"semprobe: frozen-feature probing, prototype matching and COCO evaluation"};
  app.name("semprobe");
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = available parallelism)");

  std::function<void()> action;

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "linear probing on frozen features");
  probe_cmd->require_subcommand(1);
  ProbeTrainArgs train_args;
  auto* train_cmd = probe_cmd->add_subcommand("train", "train a linear probe with AdamW");
  train_cmd->add_option("--features", train_args.features, "f32 [N, D] TNSR")->required();
  train_cmd->add_option("--labels", train_args.labels, "i64 [N] TNSR")->required();
  train_cmd->add_option("--val-features", train_args.val_features);
  train_cmd->add_option("--val-labels", train_args.val_labels);
  train_cmd->add_option("--epochs", train_args.config.epochs);
  train_cmd->add_option("--batch-size", train_args.config.batch_size);
  train_cmd->add_option("--lr", train_args.config.learning_rate);
  train_cmd->add_option("--weight-decay", train_args.config.weight_decay);
  train_cmd->add_option("--seed", train_args.config.seed);
  train_cmd->add_option("--num-classes", train_args.num_classes, "0 = max label + 1");
  train_cmd->add_flag("--no-shuffle", train_args.no_shuffle);
  train_cmd->add_option("--out", train_args.out, "LPCK checkpoint")->required();
  train_cmd->add_option("--report", train_args.report, "per-epoch metrics JSON");
  train_cmd->callback([&] { action = [&] { probe_train(train_args, *train_cmd); }; });

  ProbeEvalArgs eval_args;
  auto* peval_cmd = probe_cmd->add_subcommand("eval", "top-k accuracy of a probe checkpoint");
  peval_cmd->add_option("--model", eval_args.model)->required();
  peval_cmd->add_option("--features", eval_args.features)->required();
  peval_cmd->add_option("--labels", eval_args.labels)->required();
  peval_cmd->add_option("--topk", eval_args.topk)->delimiter(',');
  peval_cmd->add_option("--report", eval_args.report);
  peval_cmd->callback([&] { action = [&] { probe_eval(eval_args, *peval_cmd); }; });

  // proto
  auto* proto_cmd = app.add_subcommand("proto", "class prototypes from reference images");
  proto_cmd->require_subcommand(1);
  ProtoBuildArgs proto_args;
  auto* build_cmd = proto_cmd->add_subcommand("build", "pool and normalise reference regions");
  build_cmd->add_option("--refs", proto_args.refs)->required();
  build_cmd->add_option("--stride", proto_args.stride, "patch stride in px for refs without their own");
  build_cmd->add_option("--out", proto_args.out)->required();
  build_cmd->callback([&] { action = [&] { proto_build(proto_args, *build_cmd); }; });

  // match
  auto* match_cmd = app.add_subcommand("match", "match proposals against prototypes");
  match_cmd->require_subcommand(1);
  MatchRunArgs match_args;
  auto* mrun_cmd = match_cmd->add_subcommand("run", "cosine matching followed by class-wise NMS");
  mrun_cmd->add_option("--target-map", match_args.target_map)->required();
  mrun_cmd->add_option("--target-meta", match_args.target_meta)->required();
  mrun_cmd->add_option("--proposals", match_args.proposals)->required();
  mrun_cmd->add_option("--protos", match_args.protos)->required();
  mrun_cmd->add_option("--protos-meta", match_args.protos_meta, "defaults to <protos>.meta.json");
  mrun_cmd->add_option("--sim-threshold", match_args.sim_threshold);
  mrun_cmd->add_option("--nms-iou", match_args.nms_iou);
  mrun_cmd->add_option("--stride", match_args.stride, "0 = stride from target meta");
  mrun_cmd->add_option("--out", match_args.out)->required();
  mrun_cmd->callback([&] { action = [&] { match_run(match_args, *mrun_cmd); }; });

  // grid
  GridArgs grid_args;
  auto* grid_cmd = app.add_subcommand("grid", "dense prompt grid at cell centres");
  grid_cmd->add_option("--width", grid_args.width);
  grid_cmd->add_option("--height", grid_args.height);
  grid_cmd->add_option("--points-per-side", grid_args.points_per_side);
  grid_cmd->add_option("--out", grid_args.out);
  grid_cmd->callback([&] { action = [&] { grid(grid_args, *grid_cmd); }; });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluation");
  eval_cmd->require_subcommand(1);
  EvalArgs coco_args;
  auto* coco_cmd = eval_cmd->add_subcommand("coco", "COCO AP/AR for boxes or masks");
  coco_cmd->add_option("--dets", coco_args.dets)->required();
  coco_cmd->add_option("--gt", coco_args.gt)->required();
  coco_cmd->add_option("--iou-type", coco_args.iou_type)->check(CLI::IsMember({"mask", "box"}));
  coco_cmd->add_option("--splits", coco_args.splits, "{base: [ids], novel: [ids]}");
  coco_cmd->add_option("--max-dets", coco_args.max_dets);
  coco_cmd->add_option("--categories", coco_args.categories)->delimiter(',');
  coco_cmd->add_option("--report", coco_args.report, "metrics JSON");
  coco_cmd->add_option("--csv", coco_args.csv, "per-category CSV");
  coco_cmd->callback([&] { action = [&] { eval_coco(coco_args, *coco_cmd); }; });

  // tsne
  TsneArgs tsne_args;
  auto* tsne_cmd = app.add_subcommand("tsne", "exact t-SNE and silhouette separability");
  tsne_cmd->add_option("--features", tsne_args.features)->required();
  tsne_cmd->add_option("--labels", tsne_args.labels);
  tsne_cmd->add_option("--perplexity", tsne_args.config.perplexity);
  tsne_cmd->add_option("--iterations", tsne_args.config.iterations);
  tsne_cmd->add_option("--learning-rate", tsne_args.config.learning_rate);
  tsne_cmd->add_option("--seed", tsne_args.config.seed);
  tsne_cmd->add_flag("--l2-normalize", tsne_args.l2_normalize);
  tsne_cmd->add_option("--pca-dims", tsne_args.pca_dims, "0 = no PCA");
  tsne_cmd->add_option("--out", tsne_args.out, "f32 [N, 2] TNSR")->required();
  tsne_cmd->add_option("--svg", tsne_args.svg);
  tsne_cmd->add_option("--report", tsne_args.report);
  tsne_cmd->callback([&] { action = [&] { run_tsne(tsne_args, *tsne_cmd); }; });

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "synthetic fixtures");
  synth_cmd->require_subcommand(1);
  BlobArgs blob_args;
  auto* blobs_cmd = synth_cmd->add_subcommand("blobs", "Gaussian class blobs");
  blobs_cmd->add_option("--classes", blob_args.spec.num_classes);
  blobs_cmd->add_option("--dim", blob_args.spec.dim);
  blobs_cmd->add_option("--per-class", blob_args.spec.per_class);
  blobs_cmd->add_option("--separation", blob_args.spec.separation);
  blobs_cmd->add_option("--seed", blob_args.spec.seed);
  blobs_cmd->add_option("--out-features", blob_args.out_features)->required();
  blobs_cmd->add_option("--out-labels", blob_args.out_labels)->required();
  blobs_cmd->callback([&] { action = [&] { synth_blobs(blob_args, *blobs_cmd); }; });

  SceneArgs scene_args;
  auto* scene_cmd = synth_cmd->add_subcommand("scene", "planted-prototype scene with references and GT");
  scene_cmd->add_option("--width", scene_args.spec.width);
  scene_cmd->add_option("--height", scene_args.spec.height);
  scene_cmd->add_option("--stride", scene_args.spec.stride);
  scene_cmd->add_option("--dim", scene_args.spec.dim);
  scene_cmd->add_option("--categories", scene_args.spec.num_categories);
  scene_cmd->add_option("--objects", scene_args.spec.num_objects);
  scene_cmd->add_option("--distractors", scene_args.spec.num_distractors);
  scene_cmd->add_option("--max-object-patches", scene_args.spec.max_object_patches);
  scene_cmd->add_option("--sigma", scene_args.spec.noise_sigma);
  scene_cmd->add_option("--seed", scene_args.spec.seed);
  scene_cmd->add_option("--out-dir", scene_args.out_dir)->required();
  scene_cmd->callback([&] { action = [&] { synth_scene(scene_args, *scene_cmd); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    std::cout << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    set_num_threads(threads);
    if (action) action();
    return 0;
  } catch (const Error& e) {
    std::cerr << "semprobe: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "semprobe: storage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "semprobe: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace semprobe::cli
