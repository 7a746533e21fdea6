#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semprobe/annotations.hpp"

namespace semprobe::eval {

enum class IouType { Box, Mask };

IouType iou_type_from_string(const std::string& s);
const char* to_string(IouType t) noexcept;

// IoU thresholds 0.50:0.05:0.95 and recall points 0.00:0.01:1.00, generated
// the way the COCO reference tooling generates them (start + i * step, exact
// endpoint).
std::vector<double> coco_iou_thresholds();
std::vector<double> recall_thresholds(std::size_t points);

struct EvalConfig {
  std::vector<double> iou_thresholds = coco_iou_thresholds();
  std::size_t recall_points = 101;
  std::size_t max_detections = 100;  // per image and category, by score
  IouType iou_type = IouType::Mask;
  std::optional<std::vector<std::int64_t>> category_filter;

  void validate() const;
};

// Row-major IoU matrix: value(d, g) for dets in score order and gts.
struct IouMatrix {
  std::size_t num_dets = 0;
  std::size_t num_gts = 0;
  std::vector<double> values;
  double operator()(std::size_t d, std::size_t g) const { return values[d * num_gts + g]; }
};

enum class MatchStatus : std::uint8_t { FalsePositive, TruePositive, Ignored };

struct DetMatch {
  MatchStatus status = MatchStatus::FalsePositive;
  std::optional<std::size_t> gt;  // matched ground truth, crowd or not
};

// Greedy matching of score-ordered detections: each takes the unmatched
// non-crowd GT with the highest IoU >= threshold (equal IoU: later GT);
// failing that, any crowd GT with IoU >= threshold, which marks it Ignored
// without consuming the crowd region.
std::vector<DetMatch> match_detections(const IouMatrix& ious, std::span<const std::uint8_t> gt_crowd,
                                       double threshold);

struct ScoredMatch {
  double score = 0.0;
  MatchStatus status = MatchStatus::FalsePositive;
};

struct PrSummary {
  double precision = 0.0;  // interpolated AP over the recall points
  double recall = 0.0;     // final recall
};

// Entries must already be in pooled order; they are stably sorted by score
// descending here. Ignored entries are skipped. num_gt == 0 yields zeros.
PrSummary accumulate_pr(std::vector<ScoredMatch> entries, std::size_t num_gt, std::span<const double> recall_thresholds);

double average_precision(std::vector<ScoredMatch> entries, std::size_t num_gt,
                         std::span<const double> recall_thresholds);

// Mean of final recalls over IoU thresholds.
double average_recall(std::span<const PrSummary> per_threshold);

struct Metrics {
  double ap = 0.0;  // mean over IoU thresholds
  std::optional<double> ap50;
  std::optional<double> ap75;
  double ar = 0.0;
};

struct CategoryResult {
  std::int64_t category_id = 0;
  std::string name;
  std::size_t num_gt = 0;  // non-crowd
  std::size_t num_dets = 0;
  Metrics metrics;  // zeros when num_gt == 0
  bool evaluated() const { return num_gt > 0; }
};

struct Summary {
  std::size_t categories_evaluated = 0;
  Metrics metrics;  // mean over evaluated categories; zeros when none
};

struct EvalResult {
  IouType iou_type = IouType::Mask;
  std::vector<CategoryResult> per_category;  // ascending category id
  Summary mean;
  std::size_t num_dets = 0;
  std::size_t num_gt = 0;
};

// Reduction order: per (category, threshold) mean over recall points, per
// category mean over thresholds, then mean over categories with GT.
EvalResult evaluate(const std::vector<Detection>& dets, const AnnotationSet& gt, const EvalConfig& config);

Summary summarize(std::span<const CategoryResult> categories);

struct SplitReport {
  Summary base;
  Summary novel;
};

struct SplitDefinition {
  std::vector<std::int64_t> base;
  std::vector<std::int64_t> novel;
};

SplitDefinition split_from_json(const nlohmann::json& j);

// Throws Input listing shared ids when the splits overlap.
SplitReport split_report(const EvalResult& result, const SplitDefinition& split);

nlohmann::json to_json(const EvalResult& result);
nlohmann::json to_json(const SplitReport& report);
std::string format_table(const EvalResult& result);
std::string format_split_table(const SplitReport& report, IouType type);
std::string to_csv(const EvalResult& result);

}  // namespace semprobe::eval
