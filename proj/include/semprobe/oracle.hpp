#pragma once

// Deliberately naive reference implementations used only by the test suites.
// Nothing here calls into the mask, matcher or eval code it is checked
// against; only the plain data records are shared.

#include <cstdint>
#include <vector>

#include "semprobe/annotations.hpp"

namespace semprobe::oracle {

enum Flag : int { kFalsePositive = 0, kTruePositive = 1, kIgnored = 2 };

// Decodes counts by hand into a row-major 0/1 image.
std::vector<std::uint8_t> decode_pixels(const RleMask& rle);

double pixel_iou(const RleMask& det, const RleMask& gt, bool crowd);
double rect_iou(const Box& det, const Box& gt, bool crowd);

// Greedy COCO matching written out exhaustively. ious is [num_det x num_gt]
// row-major with detections already in score order.
std::vector<int> match_flags(const std::vector<double>& ious, std::size_t num_det, std::size_t num_gt,
                             const std::vector<bool>& crowd, double threshold);

// Interpolated precision at each recall point, max over all ranks that reach
// it, averaged. Entries are (score, flag) pairs in pooled order.
struct Entry {
  double score;
  int flag;
};
double interpolated_ap(const std::vector<Entry>& entries, std::size_t num_gt, const std::vector<double>& recall_points);
double final_recall(const std::vector<Entry>& entries, std::size_t num_gt);

struct CategoryMetrics {
  std::int64_t category_id = 0;
  std::size_t num_gt = 0;
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ar = 0.0;
};

struct Metrics {
  std::vector<CategoryMetrics> categories;  // ascending id
  std::size_t evaluated = 0;
  double ap = 0.0;
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ar = 0.0;
};

// Whole-protocol reference: per (image, category) top-max_dets by score,
// matching at every threshold, pooled accumulation, category means.
Metrics match_ap(const std::vector<Detection>& dets, const AnnotationSet& gt, bool use_mask,
                 const std::vector<double>& iou_thresholds, const std::vector<double>& recall_points,
                 std::size_t max_dets);

// O(n^2) class-wise greedy suppression; survivors in score order.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold);

}  // namespace semprobe::oracle
