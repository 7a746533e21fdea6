#include "semprobe/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace semprobe::oracle {

std::vector<std::uint8_t> decode_pixels(const RleMask& rle) {
  std::vector<std::uint8_t> px(std::size_t{rle.height} * rle.width, 0);
  std::size_t k = 0;
  int value = 0;
  for (std::uint32_t run : rle.counts) {
    for (std::uint32_t r = 0; r < run; ++r, ++k) {
      const std::size_t col = k / rle.height;
      const std::size_t row = k % rle.height;
      px[row * rle.width + col] = static_cast<std::uint8_t>(value);
    }
    value = 1 - value;
  }
  return px;
}

double pixel_iou(const RleMask& det, const RleMask& gt, bool crowd) {
  const auto a = decode_pixels(det);
  const auto b = decode_pixels(gt);
  std::uint64_t inter = 0, uni = 0, area_a = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
    area_a += a[i];
  }
  if (inter == 0) return 0.0;
  return double(inter) / double(crowd ? area_a : uni);
}

double rect_iou(const Box& det, const Box& gt, bool crowd) {
  const double left = std::max(det.x, gt.x);
  const double right = std::min(det.x + det.w, gt.x + gt.w);
  const double top = std::max(det.y, gt.y);
  const double bottom = std::min(det.y + det.h, gt.y + gt.h);
  if (right - left <= 0 || bottom - top <= 0) return 0.0;
  const double inter = (right - left) * (bottom - top);
  const double denom = crowd ? det.w * det.h : det.w * det.h + gt.w * gt.h - inter;
  return denom > 0 ? inter / denom : 0.0;
}

std::vector<int> match_flags(const std::vector<double>& ious, std::size_t num_det, std::size_t num_gt,
                             const std::vector<bool>& crowd, double threshold) {
  const double floor = std::min(threshold, 1.0 - 1e-10);
  std::vector<int> flags(num_det, kFalsePositive);
  std::vector<bool> used(num_gt, false);
  for (std::size_t d = 0; d < num_det; ++d) {
    // Collect every admissible non-crowd GT, then pick the best (latest on ties).
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t g = 0; g < num_gt; ++g) {
      if (!crowd[g] && !used[g] && ious[d * num_gt + g] >= floor) candidates.emplace_back(ious[d * num_gt + g], g);
    }
    if (!candidates.empty()) {
      const auto best = *std::max_element(candidates.begin(), candidates.end());
      used[best.second] = true;
      flags[d] = kTruePositive;
      continue;
    }
    for (std::size_t g = 0; g < num_gt; ++g) {
      if (crowd[g] && ious[d * num_gt + g] >= floor) flags[d] = kIgnored;
    }
  }
  return flags;
}

double interpolated_ap(const std::vector<Entry>& entries, std::size_t num_gt, const std::vector<double>& recall_points) {
  if (num_gt == 0) return 0.0;
  std::vector<double> precision, recall;
  std::size_t tp = 0, seen = 0;
  for (const auto& e : entries) {
    if (e.flag == kIgnored) continue;
    ++seen;
    if (e.flag == kTruePositive) ++tp;
    precision.push_back(double(tp) / double(seen));
    recall.push_back(double(tp) / double(num_gt));
  }
  double sum = 0.0;
  for (double r : recall_points) {
    double best = 0.0;
    for (std::size_t k = 0; k < recall.size(); ++k) {
      if (recall[k] >= r) best = std::max(best, precision[k]);
    }
    sum += best;
  }
  return sum / double(recall_points.size());
}

double final_recall(const std::vector<Entry>& entries, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  std::size_t tp = 0;
  for (const auto& e : entries) tp += e.flag == kTruePositive ? 1 : 0;
  return double(tp) / double(num_gt);
}

Metrics match_ap(const std::vector<Detection>& dets, const AnnotationSet& gt, bool use_mask,
                 const std::vector<double>& iou_thresholds, const std::vector<double>& recall_points,
                 std::size_t max_dets) {
  std::set<std::int64_t> cat_ids, img_ids;
  for (const auto& c : gt.categories) cat_ids.insert(c.id);
  for (const auto& im : gt.images) img_ids.insert(im.id);
  for (const auto& d : dets) img_ids.insert(d.image_id);

  std::size_t i50 = iou_thresholds.size(), i75 = iou_thresholds.size();
  for (std::size_t t = 0; t < iou_thresholds.size(); ++t) {
    if (std::abs(iou_thresholds[t] - 0.5) < 1e-9) i50 = t;
    if (std::abs(iou_thresholds[t] - 0.75) < 1e-9) i75 = t;
  }

  Metrics out;
  for (std::int64_t cat : cat_ids) {
    CategoryMetrics cm;
    cm.category_id = cat;
    // (score, image, rank within image, flag) per threshold.
    std::vector<std::vector<std::tuple<double, std::int64_t, std::size_t, int>>> pooled(iou_thresholds.size());
    for (std::int64_t img : img_ids) {
      std::vector<std::size_t> di;
      for (std::size_t i = 0; i < dets.size(); ++i)
        if (dets[i].category_id == cat && dets[i].image_id == img) di.push_back(i);
      std::sort(di.begin(), di.end(), [&](std::size_t a, std::size_t b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        return a < b;
      });
      if (di.size() > max_dets) di.resize(max_dets);

      std::vector<const Annotation*> plain, crowd_gts;
      for (const auto& a : gt.annotations) {
        if (a.category_id != cat || a.image_id != img) continue;
        (a.iscrowd ? crowd_gts : plain).push_back(&a);
      }
      cm.num_gt += plain.size();
      std::vector<const Annotation*> gts = plain;
      gts.insert(gts.end(), crowd_gts.begin(), crowd_gts.end());
      std::vector<bool> crowd(gts.size());
      for (std::size_t g = 0; g < gts.size(); ++g) crowd[g] = gts[g]->iscrowd;

      std::vector<double> ious(di.size() * gts.size());
      for (std::size_t d = 0; d < di.size(); ++d) {
        for (std::size_t g = 0; g < gts.size(); ++g) {
          const Detection& det = dets[di[d]];
          ious[d * gts.size() + g] = use_mask ? pixel_iou(*det.mask, *gts[g]->segmentation, crowd[g])
                                              : rect_iou(det.bbox, gts[g]->bbox, crowd[g]);
        }
      }
      for (std::size_t t = 0; t < iou_thresholds.size(); ++t) {
        const auto flags = match_flags(ious, di.size(), gts.size(), crowd, iou_thresholds[t]);
        for (std::size_t d = 0; d < di.size(); ++d) pooled[t].emplace_back(dets[di[d]].score, img, d, flags[d]);
      }
    }
    if (cm.num_gt == 0) {
      out.categories.push_back(cm);
      continue;
    }
    double ap_sum = 0.0, ar_sum = 0.0;
    for (std::size_t t = 0; t < iou_thresholds.size(); ++t) {
      auto& p = pooled[t];
      std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
      });
      std::vector<Entry> entries;
      for (const auto& e : p) entries.push_back(Entry{std::get<0>(e), std::get<3>(e)});
      const double ap = interpolated_ap(entries, cm.num_gt, recall_points);
      ap_sum += ap;
      ar_sum += final_recall(entries, cm.num_gt);
      if (t == i50) cm.ap50 = ap;
      if (t == i75) cm.ap75 = ap;
    }
    cm.ap = ap_sum / double(iou_thresholds.size());
    cm.ar = ar_sum / double(iou_thresholds.size());
    out.categories.push_back(cm);
  }

  for (const auto& c : out.categories) {
    if (c.num_gt == 0) continue;
    ++out.evaluated;
    out.ap += c.ap;
    out.ap50 += c.ap50;
    out.ap75 += c.ap75;
    out.ar += c.ar;
  }
  if (out.evaluated) {
    const double n = double(out.evaluated);
    out.ap /= n;
    out.ap50 /= n;
    out.ap75 /= n;
    out.ar /= n;
  }
  return out;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::make_tuple(-dets[a].score, dets[a].category_id, a) <
           std::make_tuple(-dets[b].score, dets[b].category_id, b);
  });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool keep = true;
    for (std::size_t k : kept) {
      if (dets[k].category_id != dets[i].category_id || dets[k].image_id != dets[i].image_id) continue;
      const double iou = (dets[i].mask && dets[k].mask) ? pixel_iou(*dets[i].mask, *dets[k].mask, false)
                                                        : rect_iou(dets[i].bbox, dets[k].bbox, false);
      if (iou >= iou_threshold) keep = false;
    }
    if (keep) kept.push_back(i);
  }
  std::vector<Detection> out;
  for (std::size_t k : kept) out.push_back(dets[k]);
  return out;
}

}  // namespace semprobe::oracle
