#include <gtest/gtest.h>

#include "../support/fixtures.hpp"
#include "helpers.hpp"
#include "semprobe/coco_eval.hpp"
#include "semprobe/oracle.hpp"
#include "semprobe/parallel.hpp"

namespace semprobe::eval {
namespace {

using testing::error_kind_of;
using testing::error_message_of;

std::vector<int> as_flags(const std::vector<DetMatch>& m) {
  std::vector<int> out;
  for (const auto& d : m) out.push_back(static_cast<int>(d.status));
  return out;
}

TEST(Thresholds, CocoGrid) {
  const auto t = coco_iou_thresholds();
  ASSERT_EQ(t.size(), 10u);
  EXPECT_EQ(t.front(), 0.5);
  EXPECT_EQ(t.back(), 0.95);
  EXPECT_NEAR(t[5], 0.75, 1e-15);
  const auto r = recall_thresholds(101);
  ASSERT_EQ(r.size(), 101u);
  EXPECT_EQ(r.front(), 0.0);
  EXPECT_EQ(r.back(), 1.0);
}

TEST(MatchDetections, HandCases) {
  // One detection, one GT at IoU 0.9.
  EXPECT_EQ(as_flags(match_detections({1, 1, {0.9}}, std::vector<std::uint8_t>{0}, 0.5)),
            (std::vector<int>{1}));
  // Two detections on one GT: the higher-scored one (first) wins.
  EXPECT_EQ(as_flags(match_detections({2, 1, {0.8, 0.95}}, std::vector<std::uint8_t>{0}, 0.5)),
            (std::vector<int>{1, 0}));
  // Crowd match neither counts nor consumes.
  EXPECT_EQ(as_flags(match_detections({2, 1, {0.8, 0.7}}, std::vector<std::uint8_t>{1}, 0.5)),
            (std::vector<int>{2, 2}));
  // Equal IoU with two GTs resolves to the later GT.
  const auto m = match_detections({1, 2, {0.6, 0.6}}, std::vector<std::uint8_t>{0, 0}, 0.5);
  EXPECT_EQ(m[0].gt, std::optional<std::size_t>(1));
}

TEST(MatchDetections, AgreesWithExhaustiveOracleOn200Trials) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t nd = rng.below(11), ng = rng.below(11);
    IouMatrix ious{nd, ng, std::vector<double>(nd * ng)};
    for (auto& v : ious.values) v = rng.below(4) == 0 ? 0.0 : double(rng.below(21)) / 20.0;
    std::vector<std::uint8_t> crowd(ng);
    std::vector<bool> crowd_b(ng);
    for (std::size_t g = 0; g < ng; ++g) {
      crowd[g] = rng.below(5) == 0;
      crowd_b[g] = crowd[g] != 0;
    }
    for (double thr : coco_iou_thresholds()) {
      ASSERT_EQ(as_flags(match_detections(ious, crowd, thr)), oracle::match_flags(ious.values, nd, ng, crowd_b, thr))
          << "seed " << seed << " threshold " << thr;
    }
  }
}

TEST(AveragePrecision, HandWalkedExample) {
  const std::vector<ScoredMatch> entries{
      {0.9, MatchStatus::TruePositive}, {0.8, MatchStatus::FalsePositive}, {0.7, MatchStatus::TruePositive}};
  const auto r = recall_thresholds(101);
  const double expected = (51.0 * 1.0 + 50.0 * (2.0 / 3.0)) / 101.0;
  EXPECT_NEAR(average_precision(entries, 2, r), expected, 1e-6);
  EXPECT_NEAR(expected, 0.8350, 5e-5);
}

TEST(AveragePrecision, TrivialCases) {
  const auto r = recall_thresholds(101);
  EXPECT_EQ(average_precision({{0.9, MatchStatus::TruePositive}, {0.5, MatchStatus::FalsePositive}}, 1, r), 1.0);
  EXPECT_EQ(average_precision({}, 3, r), 0.0);
  EXPECT_EQ(average_precision({{0.9, MatchStatus::FalsePositive}}, 0, r), 0.0);
  // Ignored entries are invisible.
  EXPECT_EQ(average_precision({{0.9, MatchStatus::Ignored}, {0.8, MatchStatus::TruePositive}}, 1, r), 1.0);
}

AnnotationSet box_gt(std::vector<Box> boxes, std::int64_t category = 1) {
  AnnotationSet gt;
  gt.images = {{1, 100, 100}};
  gt.categories = {{category, "c"}};
  std::int64_t id = 1;
  for (const Box& b : boxes) {
    Annotation a;
    a.id = id++;
    a.image_id = 1;
    a.category_id = category;
    a.bbox = b;
    a.segmentation = rle_from_rect(100, 100, std::uint32_t(b.x), std::uint32_t(b.y), std::uint32_t(b.w), std::uint32_t(b.h));
    gt.annotations.push_back(a);
  }
  return gt;
}

Detection det_from_box(const Box& b, double score, std::int64_t category = 1) {
  Detection d;
  d.image_id = 1;
  d.category_id = category;
  d.score = score;
  d.bbox = b;
  d.mask = rle_from_rect(100, 100, std::uint32_t(b.x), std::uint32_t(b.y), std::uint32_t(b.w), std::uint32_t(b.h));
  return d;
}

TEST(Evaluate, HandWalkedExampleEndToEnd) {
  const AnnotationSet gt = box_gt({{0, 0, 10, 10}, {50, 50, 10, 10}});
  const std::vector<Detection> dets{det_from_box({0, 0, 10, 10}, 0.9), det_from_box({20, 20, 10, 10}, 0.8),
                                    det_from_box({50, 50, 10, 10}, 0.7)};
  for (auto type : {IouType::Box, IouType::Mask}) {
    EvalConfig cfg;
    cfg.iou_type = type;
    const auto r = evaluate(dets, gt, cfg);
    EXPECT_NEAR(r.mean.metrics.ap, 0.8350, 1e-4);
    EXPECT_NEAR(r.mean.metrics.ap, (51.0 + 50.0 * 2.0 / 3.0) / 101.0, 1e-6);
    EXPECT_EQ(r.mean.metrics.ar, 1.0);
  }
}

TEST(Evaluate, GroundTruthAsDetectionsIsPerfect) {
  const auto inst = fixtures::random_eval_instance(17);
  std::vector<Detection> dets;
  for (const auto& a : inst.gt.annotations) {
    if (a.iscrowd) continue;
    Detection d;
    d.image_id = a.image_id;
    d.category_id = a.category_id;
    d.score = 1.0;
    d.bbox = a.bbox;
    d.mask = a.segmentation;
    dets.push_back(d);
  }
  for (auto type : {IouType::Box, IouType::Mask}) {
    EvalConfig cfg;
    cfg.iou_type = type;
    const auto r = evaluate(dets, inst.gt, cfg);
    ASSERT_GT(r.mean.categories_evaluated, 0u);
    EXPECT_EQ(r.mean.metrics.ap, 1.0);
    EXPECT_EQ(*r.mean.metrics.ap50, 1.0);
    EXPECT_EQ(*r.mean.metrics.ap75, 1.0);
    EXPECT_EQ(r.mean.metrics.ar, 1.0);
  }
}

TEST(Evaluate, NoDetectionsGivesZeros) {
  const auto r = evaluate({}, box_gt({{0, 0, 5, 5}}), EvalConfig{});
  EXPECT_EQ(r.mean.metrics.ap, 0.0);
  EXPECT_EQ(r.mean.metrics.ar, 0.0);
}

TEST(Evaluate, CategoriesWithoutGtAreExcluded) {
  AnnotationSet gt = box_gt({{0, 0, 10, 10}});
  gt.categories.push_back({2, "empty"});
  const auto r = evaluate({det_from_box({0, 0, 10, 10}, 0.5), det_from_box({0, 0, 10, 10}, 0.5, 2)}, gt, EvalConfig{});
  EXPECT_EQ(r.mean.categories_evaluated, 1u);
  EXPECT_EQ(r.mean.metrics.ap, 1.0);
  ASSERT_EQ(r.per_category.size(), 2u);
  EXPECT_FALSE(r.per_category[1].evaluated());
}

TEST(Evaluate, UnknownCategoryAndImageAreValidationErrors) {
  const AnnotationSet gt = box_gt({{0, 0, 10, 10}});
  EXPECT_EQ(error_kind_of([&] { evaluate({det_from_box({0, 0, 1, 1}, 0.5, 9)}, gt, EvalConfig{}); }),
            ErrorKind::Validation);
  Detection d = det_from_box({0, 0, 1, 1}, 0.5);
  d.image_id = 42;
  EXPECT_EQ(error_kind_of([&] { evaluate({d}, gt, EvalConfig{}); }), ErrorKind::Validation);
}

TEST(Evaluate, MaxDetectionsTruncatesPerImageAndCategory) {
  const AnnotationSet gt = box_gt({{0, 0, 10, 10}});
  std::vector<Detection> dets;
  for (int i = 0; i < 5; ++i) dets.push_back(det_from_box({60, 60, 5, 5}, 0.9 - 0.1 * i));
  dets.push_back(det_from_box({0, 0, 10, 10}, 0.1));
  EvalConfig cfg;
  cfg.max_detections = 5;
  EXPECT_EQ(evaluate(dets, gt, cfg).mean.metrics.ar, 0.0);
  cfg.max_detections = 6;
  EXPECT_EQ(evaluate(dets, gt, cfg).mean.metrics.ar, 1.0);
}

void expect_equal_to_oracle(const fixtures::EvalInstance& inst, IouType type, std::size_t max_dets,
                            std::uint64_t seed) {
  EvalConfig cfg;
  cfg.iou_type = type;
  cfg.max_detections = max_dets;
  const EvalResult r = evaluate(inst.dets, inst.gt, cfg);
  const oracle::Metrics o = oracle::match_ap(inst.dets, inst.gt, type == IouType::Mask, cfg.iou_thresholds,
                                             recall_thresholds(cfg.recall_points), max_dets);
  ASSERT_EQ(r.per_category.size(), o.categories.size());
  for (std::size_t c = 0; c < o.categories.size(); ++c) {
    const auto& mine = r.per_category[c];
    const auto& ref = o.categories[c];
    ASSERT_EQ(mine.category_id, ref.category_id);
    ASSERT_EQ(mine.num_gt, ref.num_gt);
    EXPECT_EQ(mine.metrics.ap, ref.ap) << "seed " << seed << " category " << ref.category_id;
    EXPECT_EQ(mine.metrics.ar, ref.ar) << "seed " << seed;
    if (ref.num_gt > 0) {
      EXPECT_EQ(*mine.metrics.ap50, ref.ap50) << "seed " << seed;
      EXPECT_EQ(*mine.metrics.ap75, ref.ap75) << "seed " << seed;
    }
  }
  EXPECT_EQ(r.mean.categories_evaluated, o.evaluated);
  EXPECT_EQ(r.mean.metrics.ap, o.ap) << "seed " << seed;
  EXPECT_EQ(r.mean.metrics.ar, o.ar) << "seed " << seed;
}

TEST(Evaluate, AgreesExactlyWithOracleOn200Instances) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto inst = fixtures::random_eval_instance(seed);
    expect_equal_to_oracle(inst, seed % 2 ? IouType::Box : IouType::Mask, 100, seed);
  }
}

TEST(Evaluate, AgreesWithOracleUnderTruncation) {
  for (std::uint64_t seed = 500; seed < 550; ++seed) {
    expect_equal_to_oracle(fixtures::random_eval_instance(seed), IouType::Mask, 2, seed);
  }
}

TEST(Evaluate, PermutationInvariantWithDistinctScores) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto inst = fixtures::random_eval_instance(seed + 1000);
    for (std::size_t i = 0; i < inst.dets.size(); ++i) inst.dets[i].score = 1.0 - 0.001 * double(i);
    const auto base = evaluate(inst.dets, inst.gt, EvalConfig{});
    Rng rng(seed);
    auto permuted = inst.dets;
    for (std::size_t i = permuted.size(); i > 1; --i) std::swap(permuted[i - 1], permuted[rng.below(i)]);
    const auto r = evaluate(permuted, inst.gt, EvalConfig{});
    EXPECT_EQ(r.mean.metrics.ap, base.mean.metrics.ap);
    EXPECT_EQ(r.mean.metrics.ar, base.mean.metrics.ar);
    for (std::size_t c = 0; c < r.per_category.size(); ++c) {
      EXPECT_EQ(r.per_category[c].metrics.ap, base.per_category[c].metrics.ap);
    }
  }
}

TEST(Evaluate, LowestFalsePositiveNeverIncreasesApAndTopTruePositiveNeverDecreasesIt) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = fixtures::random_eval_instance(seed + 2000);
    const double ap = evaluate(inst.dets, inst.gt, EvalConfig{}).mean.metrics.ap;

    auto with_fp = inst.dets;
    Detection fp;
    fp.image_id = inst.gt.images[0].id;
    fp.category_id = 1;
    fp.mask = rle_from_rect(inst.gt.images[0].height, inst.gt.images[0].width, 0, 0, 1, 1);
    fp.bbox = fp.mask->bbox();
    fp.score = 0.0;
    with_fp.push_back(fp);
    EXPECT_LE(evaluate(with_fp, inst.gt, EvalConfig{}).mean.metrics.ap, ap) << seed;

    // A perfect copy of a GT that no other detection has claimed, ranked first.
    for (const auto& a : inst.gt.annotations) {
      if (a.iscrowd) continue;
      auto with_tp = inst.dets;
      Detection tp;
      tp.image_id = a.image_id;
      tp.category_id = a.category_id;
      tp.mask = a.segmentation;
      tp.bbox = a.bbox;
      tp.score = 2.0;
      with_tp.insert(with_tp.begin(), tp);
      EXPECT_GE(evaluate(with_tp, inst.gt, EvalConfig{}).mean.metrics.ap, ap) << seed;
      break;
    }
  }
}

TEST(Evaluate, CrowdRegionsIgnoreDetections) {
  AnnotationSet gt = box_gt({{0, 0, 10, 10}, {40, 40, 40, 40}});
  gt.annotations[1].iscrowd = true;
  const std::vector<Detection> dets{det_from_box({0, 0, 10, 10}, 0.5), det_from_box({45, 45, 10, 10}, 0.9),
                                    det_from_box({50, 50, 10, 10}, 0.8)};
  const auto r = evaluate(dets, gt, EvalConfig{});
  EXPECT_EQ(r.per_category[0].num_gt, 1u);
  EXPECT_EQ(r.mean.metrics.ap, 1.0);
}

TEST(Evaluate, DeterministicAcrossThreadCounts) {
  const auto inst = fixtures::random_eval_instance(77);
  set_num_threads(1);
  const auto a = to_json(evaluate(inst.dets, inst.gt, EvalConfig{}));
  set_num_threads(3);
  const auto b = to_json(evaluate(inst.dets, inst.gt, EvalConfig{}));
  set_num_threads(0);
  EXPECT_EQ(a, b);
}

CategoryResult category_with_ap(std::int64_t id, double ap) {
  CategoryResult c;
  c.category_id = id;
  c.num_gt = 1;
  c.metrics.ap = ap;
  c.metrics.ap50 = ap;
  c.metrics.ap75 = ap;
  c.metrics.ar = ap;
  return c;
}

TEST(SplitReport, TwoCategoryHandCase) {
  EvalResult r;
  r.per_category = {category_with_ap(1, 0.8), category_with_ap(2, 0.2)};
  const auto s = split_report(r, {{1}, {2}});
  EXPECT_EQ(s.base.metrics.ap, 0.8);
  EXPECT_EQ(s.novel.metrics.ap, 0.2);
  EXPECT_EQ(s.base.categories_evaluated, 1u);
  EXPECT_EQ(s.novel.categories_evaluated, 1u);
}

TEST(SplitReport, AllBaseLeavesNovelEmpty) {
  EvalResult r;
  r.per_category = {category_with_ap(1, 0.8), category_with_ap(2, 0.2)};
  const auto s = split_report(r, {{1, 2}, {}});
  EXPECT_EQ(s.novel.categories_evaluated, 0u);
  EXPECT_DOUBLE_EQ(s.base.metrics.ap, 0.5);
}

TEST(SplitReport, OverlapIsInputErrorListingSharedIds) {
  EvalResult r;
  r.per_category = {category_with_ap(1, 0.8), category_with_ap(2, 0.2), category_with_ap(3, 0.1)};
  const SplitDefinition split{{1, 2, 3}, {3, 2}};
  EXPECT_EQ(error_kind_of([&] { split_report(r, split); }), ErrorKind::Input);
  const std::string msg = error_message_of([&] { split_report(r, split); });
  EXPECT_NE(msg.find('2'), std::string::npos) << msg;
  EXPECT_NE(msg.find('3'), std::string::npos) << msg;
}

TEST(SplitReport, ParsesSplitFile) {
  const auto s = split_from_json(nlohmann::json::parse(R"({"base": [1, 2], "novel": [3]})"));
  EXPECT_EQ(s.base, (std::vector<std::int64_t>{1, 2}));
  EXPECT_EQ(s.novel, (std::vector<std::int64_t>{3}));
}

TEST(Reports, TableAndCsvScaleToPercent) {
  const AnnotationSet gt = box_gt({{0, 0, 10, 10}});
  const auto r = evaluate({det_from_box({0, 0, 10, 10}, 0.5)}, gt, EvalConfig{});
  EXPECT_NE(format_table(r).find("100.0"), std::string::npos);
  EXPECT_NE(to_csv(r).find("category_id"), std::string::npos);
  EXPECT_EQ(to_json(r)["mean"]["AP"], 1.0);
}

}  // namespace
}  // namespace semprobe::eval
