#include <gtest/gtest.h>

#include "cli.hpp"
#include "helpers.hpp"
#include "semprobe/storage.hpp"

namespace semprobe::cli {
namespace {

using semprobe::testing::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  ::testing::internal::CaptureStdout();
  ::testing::internal::CaptureStderr();
  const int code = run(args);
  Outcome o{code, ::testing::internal::GetCapturedStdout(), ::testing::internal::GetCapturedStderr()};
  return o;
}

TEST(Cli, UnknownFlagPrintsUsageAndExitsOne) {
  const auto o = invoke({"grid", "--bogus"});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("Usage"), std::string::npos) << o.err;
  EXPECT_EQ(invoke({"frobnicate"}).code, 1);
  EXPECT_EQ(invoke({}).code, 1);
}

TEST(Cli, HelpAndVersionExitZero) {
  EXPECT_EQ(invoke({"--help"}).code, 0);
  EXPECT_EQ(invoke({"--version"}).code, 0);
}

TEST(Cli, MissingInputExitsTwoAndValidationExitsOne) {
  TempDir dir;
  const auto o = invoke({"probe", "eval", "--model", (dir / "none.lpck").string(), "--features", "x", "--labels", "y"});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("none.lpck"), std::string::npos);

  // Detections referencing a category absent from the ground truth.
  write_json(dir / "gt.json", nlohmann::json::parse(R"({"images": [{"id": 1, "width": 4, "height": 4}],
      "annotations": [], "categories": [{"id": 1, "name": "a"}]})"));
  write_json(dir / "d.json", nlohmann::json::parse(R"([{"image_id": 1, "category_id": 5, "score": 0.5,
      "bbox": [0, 0, 1, 1]}])"));
  EXPECT_EQ(invoke({"eval", "coco", "--dets", (dir / "d.json").string(), "--gt", (dir / "gt.json").string(),
                    "--iou-type", "box"})
                .code,
            1);

  // Corrupt tensor is a format error.
  write_file(dir / "bad.tnsr", std::vector<std::uint8_t>{'X', 'X', 'X', 'X'});
  EXPECT_EQ(invoke({"tsne", "--features", (dir / "bad.tnsr").string(), "--out", (dir / "e.tnsr").string()}).code, 2);
}

TEST(Cli, GridWritesPointsAndManifest) {
  TempDir dir;
  const auto out = (dir / "points.json").string();
  ASSERT_EQ(invoke({"grid", "--width", "1024", "--height", "1024", "--points-per-side", "2", "--out", out}).code, 0);
  const auto j = read_json(out);
  EXPECT_EQ(j["points"].size(), 4u);
  const auto m = read_json(out + ".manifest.json");
  EXPECT_EQ(m["subcommand"], "grid");
  EXPECT_EQ(m["flags"]["--points-per-side"], "2");
  EXPECT_TRUE(m.contains("version"));
  EXPECT_TRUE(m.contains("wall_time_s"));
}

TEST(Cli, ProbeTrainIsByteIdenticalAcrossRunsAndThreads) {
  TempDir dir;
  const auto f = (dir / "f.tnsr").string(), l = (dir / "l.tnsr").string();
  ASSERT_EQ(invoke({"synth", "blobs", "--classes", "4", "--dim", "8", "--per-class", "150", "--out-features", f,
                    "--out-labels", l})
                .code,
            0);
  auto train = [&](const std::string& name, const std::string& threads) {
    const auto out = (dir / name).string();
    const auto o = invoke({"--threads", threads, "probe", "train", "--features", f, "--labels", l, "--seed", "3",
                           "--epochs", "3", "--out", out, "--report", out + ".report.json"});
    EXPECT_EQ(o.code, 0) << o.err;
    return read_file(out);
  };
  const auto a = train("a.lpck", "1");
  const auto b = train("b.lpck", "1");
  const auto c = train("c.lpck", "4");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  const auto report = read_json(dir / "a.lpck.report.json");
  EXPECT_EQ(report["epochs"].size(), 3u);
  const auto manifest = read_json((dir / "a.lpck").string() + ".manifest.json");
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["inputs"].size(), 2u);
  EXPECT_EQ(manifest["inputs"][0]["sha256"].get<std::string>().size(), 64u);

  const auto o = invoke({"probe", "eval", "--model", (dir / "a.lpck").string(), "--features", f, "--labels", l,
                         "--topk", "1,2"});
  EXPECT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("top-2"), std::string::npos);
}

TEST(Cli, FullSyntheticPipelineIsPerfectWithoutNoise) {
  TempDir dir;
  const auto d = dir.path().string();
  ASSERT_EQ(invoke({"synth", "scene", "--out-dir", d, "--sigma", "0", "--distractors", "0", "--seed", "5"}).code, 0);
  const auto protos = (dir / "protos.tnsr").string();
  ASSERT_EQ(invoke({"proto", "build", "--refs", (dir / "refs.json").string(), "--stride", "14", "--out", protos}).code,
            0);
  const auto dets = (dir / "dets.json").string();
  const auto m = invoke({"match", "run", "--target-map", (dir / "target_map.tnsr").string(), "--target-meta",
                         (dir / "target_meta.json").string(), "--proposals", (dir / "proposals.json").string(),
                         "--protos", protos, "--sim-threshold", "0.5", "--nms-iou", "0.5", "--out", dets});
  ASSERT_EQ(m.code, 0) << m.err;
  for (const char* type : {"mask", "box"}) {
    const auto e = invoke({"eval", "coco", "--dets", dets, "--gt", (dir / "gt.json").string(), "--iou-type", type,
                           "--report", (dir / (std::string(type) + ".json")).string()});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_NE(e.out.find("100.0"), std::string::npos) << e.out;
    EXPECT_EQ(read_json(dir / (std::string(type) + ".json"))["mean"]["AP"], 1.0);
  }
}

TEST(Cli, GroundTruthAsDetectionsPrints100AndSplits) {
  TempDir dir;
  const auto d = dir.path().string();
  ASSERT_EQ(invoke({"synth", "scene", "--out-dir", d, "--seed", "2"}).code, 0);
  const AnnotationSet gt = load_annotations(dir / "gt.json");
  std::vector<Detection> dets;
  for (const auto& a : gt.annotations) dets.push_back(Detection{a.image_id, a.category_id, 1.0, a.bbox, a.segmentation, {}});
  save_detections(dir / "gt_dets.json", dets);
  write_json(dir / "splits.json", nlohmann::json::parse(R"({"base": [1, 2], "novel": [3]})"));
  const auto o = invoke({"eval", "coco", "--dets", (dir / "gt_dets.json").string(), "--gt",
                         (dir / "gt.json").string(), "--splits", (dir / "splits.json").string(), "--csv",
                         (dir / "m.csv").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("100.0"), std::string::npos);
  EXPECT_NE(o.out.find("BASE"), std::string::npos);
  EXPECT_NE(o.out.find("NOVEL"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "m.csv"));

  write_json(dir / "overlap.json", nlohmann::json::parse(R"({"base": [1, 2], "novel": [2]})"));
  EXPECT_EQ(invoke({"eval", "coco", "--dets", (dir / "gt_dets.json").string(), "--gt", (dir / "gt.json").string(),
                    "--splits", (dir / "overlap.json").string()})
                .code,
            1);
}

TEST(Cli, TsneWritesEmbeddingReportAndSvg) {
  TempDir dir;
  const auto f = (dir / "f.tnsr").string(), l = (dir / "l.tnsr").string();
  ASSERT_EQ(invoke({"synth", "blobs", "--classes", "3", "--dim", "8", "--per-class", "15", "--out-features", f,
                    "--out-labels", l})
                .code,
            0);
  const auto o = invoke({"tsne", "--features", f, "--labels", l, "--perplexity", "5", "--iterations", "300", "--out",
                         (dir / "e.tnsr").string(), "--svg", (dir / "e.svg").string(), "--report",
                         (dir / "r.json").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(read_tensor(dir / "e.tnsr").shape(), (std::vector<std::uint64_t>{45, 2}));
  EXPECT_TRUE(read_json(dir / "r.json").contains("silhouette"));
  EXPECT_TRUE(std::filesystem::exists(dir / "e.svg"));
}

}  // namespace
}  // namespace semprobe::cli
