#include "semprobe/coco_eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "semprobe/error.hpp"
#include "semprobe/parallel.hpp"

namespace semprobe::eval {
namespace {

using json = nlohmann::json;

std::optional<std::size_t> threshold_index(const std::vector<double>& thresholds, double value) {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - value) < 1e-9) return i;
  }
  return std::nullopt;
}

std::string ids_to_string(const std::vector<std::int64_t>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? ", " : "") << ids[i];
  return os.str();
}

struct GroupInput {
  std::vector<const Detection*> dets;   // input order
  std::vector<const Annotation*> gts;  // input order
};

json metric_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string pct(const std::optional<double>& v) {
  std::ostringstream os;
  if (v) {
    os << std::fixed << std::setprecision(1) << 100.0 * *v;
  } else {
    os << "-";
  }
  return os.str();
}

}  // namespace

IouType iou_type_from_string(const std::string& s) {
  if (s == "mask" || s == "segm") return IouType::Mask;
  if (s == "box" || s == "bbox") return IouType::Box;
  throw Error(ErrorKind::Input, "unknown IoU type \"" + s + "\" (expected mask or box)");
}

const char* to_string(IouType t) noexcept { return t == IouType::Mask ? "mask" : "box"; }

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t(10);
  const double step = (0.95 - 0.5) / 9.0;
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.5 + double(i) * step;
  t.back() = 0.95;
  return t;
}

std::vector<double> recall_thresholds(std::size_t points) {
  if (points < 2) throw Error(ErrorKind::Input, "need at least 2 recall points");
  std::vector<double> r(points);
  const double step = 1.0 / double(points - 1);
  for (std::size_t i = 0; i < points; ++i) r[i] = double(i) * step;
  r.back() = 1.0;
  return r;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw Error(ErrorKind::Input, "no IoU thresholds");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    if (!(iou_thresholds[i] > 0.0 && iou_thresholds[i] <= 1.0)) {
      throw Error(ErrorKind::Input, "IoU thresholds must lie in (0, 1]");
    }
    if (i > 0 && !(iou_thresholds[i] > iou_thresholds[i - 1])) {
      throw Error(ErrorKind::Input, "IoU thresholds must be strictly increasing");
    }
  }
  if (recall_points < 2) throw Error(ErrorKind::Input, "need at least 2 recall points");
  if (max_detections < 1) throw Error(ErrorKind::Input, "max_detections must be >= 1");
}

std::vector<DetMatch> match_detections(const IouMatrix& ious, std::span<const std::uint8_t> gt_crowd,
                                       double threshold) {
  if (gt_crowd.size() != ious.num_gts) throw Error(ErrorKind::Shape, "crowd flags do not match GT count");
  std::vector<DetMatch> out(ious.num_dets);
  std::vector<std::uint8_t> taken(ious.num_gts, 0);
  const double floor = std::min(threshold, 1.0 - 1e-10);
  for (std::size_t d = 0; d < ious.num_dets; ++d) {
    std::optional<std::size_t> best;
    double best_iou = floor;
    for (std::size_t g = 0; g < ious.num_gts; ++g) {
      if (gt_crowd[g] || taken[g]) continue;
      if (ious(d, g) >= best_iou) {
        best_iou = ious(d, g);
        best = g;
      }
    }
    if (best) {
      taken[*best] = 1;
      out[d] = DetMatch{MatchStatus::TruePositive, best};
      continue;
    }
    for (std::size_t g = 0; g < ious.num_gts; ++g) {
      if (!gt_crowd[g]) continue;
      if (ious(d, g) >= best_iou) {
        best_iou = ious(d, g);
        best = g;
      }
    }
    out[d] = best ? DetMatch{MatchStatus::Ignored, best} : DetMatch{MatchStatus::FalsePositive, std::nullopt};
  }
  return out;
}

PrSummary accumulate_pr(std::vector<ScoredMatch> entries, std::size_t num_gt,
                        std::span<const double> recall_thresholds) {
  if (num_gt == 0 || recall_thresholds.empty()) return {};
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ScoredMatch& a, const ScoredMatch& b) { return a.score > b.score; });
  std::vector<double> recall, precision;
  std::size_t tp = 0, fp = 0;
  for (const auto& e : entries) {
    if (e.status == MatchStatus::Ignored) continue;
    if (e.status == MatchStatus::TruePositive) {
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(double(tp) / double(num_gt));
    precision.push_back(double(tp) / double(tp + fp));
  }
  if (precision.empty()) return {};
  for (std::size_t i = precision.size() - 1; i > 0; --i) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  for (double r : recall_thresholds) {
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return PrSummary{sum / double(recall_thresholds.size()), recall.back()};
}

double average_precision(std::vector<ScoredMatch> entries, std::size_t num_gt,
                         std::span<const double> recall_thresholds) {
  return accumulate_pr(std::move(entries), num_gt, recall_thresholds).precision;
}

double average_recall(std::span<const PrSummary> per_threshold) {
  if (per_threshold.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : per_threshold) sum += s.recall;
  return sum / double(per_threshold.size());
}

Summary summarize(std::span<const CategoryResult> categories) {
  Summary s;
  double ap = 0.0, ar = 0.0, ap50 = 0.0, ap75 = 0.0;
  bool has50 = true, has75 = true;
  for (const auto& c : categories) {
    if (!c.evaluated()) continue;
    ++s.categories_evaluated;
    ap += c.metrics.ap;
    ar += c.metrics.ar;
    has50 = has50 && c.metrics.ap50.has_value();
    has75 = has75 && c.metrics.ap75.has_value();
    ap50 += c.metrics.ap50.value_or(0.0);
    ap75 += c.metrics.ap75.value_or(0.0);
  }
  if (s.categories_evaluated == 0) return s;
  const double n = double(s.categories_evaluated);
  s.metrics.ap = ap / n;
  s.metrics.ar = ar / n;
  if (has50) s.metrics.ap50 = ap50 / n;
  if (has75) s.metrics.ap75 = ap75 / n;
  return s;
}

EvalResult evaluate(const std::vector<Detection>& dets, const AnnotationSet& gt, const EvalConfig& config) {
  config.validate();
  const bool use_mask = config.iou_type == IouType::Mask;

  std::set<std::int64_t> image_ids;
  for (const auto& im : gt.images) image_ids.insert(im.id);

  std::vector<Category> categories = gt.categories;
  std::sort(categories.begin(), categories.end(), [](const Category& a, const Category& b) { return a.id < b.id; });
  std::set<std::int64_t> category_ids;
  for (const auto& c : categories) category_ids.insert(c.id);

  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Detection& d = dets[i];
    if (!category_ids.count(d.category_id)) {
      throw Error(ErrorKind::Validation, "detection " + std::to_string(i) + " has unknown category_id " +
                                             std::to_string(d.category_id));
    }
    if (!image_ids.count(d.image_id)) {
      throw Error(ErrorKind::Validation, "detection " + std::to_string(i) + " has unknown image_id " +
                                             std::to_string(d.image_id));
    }
    if (use_mask && !d.mask) {
      throw Error(ErrorKind::Validation, "detection " + std::to_string(i) + " has no segmentation for mask IoU");
    }
  }
  for (const auto& a : gt.annotations) {
    if (use_mask && !a.segmentation) {
      throw Error(ErrorKind::Validation, "annotation " + std::to_string(a.id) + " has no segmentation for mask IoU");
    }
  }

  if (config.category_filter) {
    const std::set<std::int64_t> keep(config.category_filter->begin(), config.category_filter->end());
    std::erase_if(categories, [&](const Category& c) { return !keep.count(c.id); });
  }

  // (category, image) -> inputs, both in input order.
  std::map<std::pair<std::int64_t, std::int64_t>, GroupInput> groups;
  for (const auto& d : dets) groups[{d.category_id, d.image_id}].dets.push_back(&d);
  for (const auto& a : gt.annotations) groups[{a.category_id, a.image_id}].gts.push_back(&a);

  const auto recall_pts = recall_thresholds(config.recall_points);
  const std::size_t T = config.iou_thresholds.size();
  const auto i50 = threshold_index(config.iou_thresholds, 0.5);
  const auto i75 = threshold_index(config.iou_thresholds, 0.75);

  EvalResult result;
  result.iou_type = config.iou_type;
  result.per_category.resize(categories.size());
  parallel_for(categories.size(), [&](std::size_t k) {
    const Category& cat = categories[k];
    CategoryResult& out = result.per_category[k];
    out.category_id = cat.id;
    out.name = cat.name;
    std::vector<std::vector<ScoredMatch>> pooled(T);

    // Groups of this category in ascending image id.
    for (auto it = groups.lower_bound({cat.id, std::numeric_limits<std::int64_t>::min()});
         it != groups.end() && it->first.first == cat.id; ++it) {
      const GroupInput& group = it->second;
      std::vector<const Detection*> sorted = group.dets;
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const Detection* a, const Detection* b) { return a->score > b->score; });
      if (sorted.size() > config.max_detections) sorted.resize(config.max_detections);
      std::vector<const Annotation*> gts = group.gts;
      std::stable_partition(gts.begin(), gts.end(), [](const Annotation* a) { return !a->iscrowd; });

      std::vector<std::uint8_t> crowd(gts.size());
      for (std::size_t g = 0; g < gts.size(); ++g) {
        crowd[g] = gts[g]->iscrowd ? 1 : 0;
        if (!crowd[g]) ++out.num_gt;
      }
      out.num_dets += sorted.size();

      IouMatrix ious{sorted.size(), gts.size(), std::vector<double>(sorted.size() * gts.size(), 0.0)};
      for (std::size_t d = 0; d < sorted.size(); ++d) {
        for (std::size_t g = 0; g < gts.size(); ++g) {
          ious.values[d * gts.size() + g] =
              use_mask ? mask_iou(*sorted[d]->mask, *gts[g]->segmentation, crowd[g] != 0)
                       : box_iou(sorted[d]->bbox, gts[g]->bbox, crowd[g] != 0);
        }
      }
      for (std::size_t t = 0; t < T; ++t) {
        const auto matches = match_detections(ious, crowd, config.iou_thresholds[t]);
        for (std::size_t d = 0; d < sorted.size(); ++d) {
          pooled[t].push_back(ScoredMatch{sorted[d]->score, matches[d].status});
        }
      }
    }

    if (out.num_gt == 0) return;
    std::vector<PrSummary> per_t(T);
    double ap_sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      per_t[t] = accumulate_pr(std::move(pooled[t]), out.num_gt, recall_pts);
      ap_sum += per_t[t].precision;
    }
    out.metrics.ap = ap_sum / double(T);
    out.metrics.ar = average_recall(per_t);
    if (i50) out.metrics.ap50 = per_t[*i50].precision;
    if (i75) out.metrics.ap75 = per_t[*i75].precision;
  });

  for (const auto& c : result.per_category) {
    result.num_dets += c.num_dets;
    result.num_gt += c.num_gt;
  }
  result.mean = summarize(result.per_category);
  return result;
}

SplitDefinition split_from_json(const json& j) {
  try {
    return SplitDefinition{j.at("base").get<std::vector<std::int64_t>>(),
                           j.at("novel").get<std::vector<std::int64_t>>()};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("split file must be {base: [ids], novel: [ids]}: ") + e.what());
  }
}

SplitReport split_report(const EvalResult& result, const SplitDefinition& split) {
  const std::set<std::int64_t> base(split.base.begin(), split.base.end());
  const std::set<std::int64_t> novel(split.novel.begin(), split.novel.end());
  std::vector<std::int64_t> shared;
  std::set_intersection(base.begin(), base.end(), novel.begin(), novel.end(), std::back_inserter(shared));
  if (!shared.empty()) {
    throw Error(ErrorKind::Input, "BASE and NOVEL splits share category ids [" + ids_to_string(shared) + "]");
  }
  std::vector<CategoryResult> base_rows, novel_rows;
  for (const auto& c : result.per_category) {
    if (base.count(c.category_id)) base_rows.push_back(c);
    if (novel.count(c.category_id)) novel_rows.push_back(c);
  }
  return SplitReport{summarize(base_rows), summarize(novel_rows)};
}

json to_json(const EvalResult& result) {
  auto metrics = [](const Metrics& m) {
    return json{{"AP", m.ap}, {"AP50", metric_json(m.ap50)}, {"AP75", metric_json(m.ap75)}, {"AR", m.ar}};
  };
  json cats = json::array();
  for (const auto& c : result.per_category) {
    json jc{{"category_id", c.category_id}, {"name", c.name}, {"num_gt", c.num_gt}, {"num_dets", c.num_dets},
            {"evaluated", c.evaluated()}};
    jc["metrics"] = c.evaluated() ? metrics(c.metrics) : json(nullptr);
    cats.push_back(std::move(jc));
  }
  json mean = result.mean.categories_evaluated ? metrics(result.mean.metrics) : json(nullptr);
  return json{{"iou_type", to_string(result.iou_type)},
              {"categories_evaluated", result.mean.categories_evaluated},
              {"note", "categories without ground truth are excluded from means"},
              {"num_dets", result.num_dets},
              {"num_gt", result.num_gt},
              {"mean", mean},
              {"per_category", cats}};
}

json to_json(const SplitReport& report) {
  auto row = [](const Summary& s) {
    json j{{"categories_evaluated", s.categories_evaluated}};
    if (s.categories_evaluated) {
      j["AP"] = s.metrics.ap;
      j["AP50"] = metric_json(s.metrics.ap50);
      j["AP75"] = metric_json(s.metrics.ap75);
      j["AR"] = s.metrics.ar;
    }
    return j;
  };
  return json{{"BASE", row(report.base)}, {"NOVEL", row(report.novel)}};
}

std::string format_table(const EvalResult& result) {
  const std::string t = to_string(result.iou_type);
  std::ostringstream os;
  os << std::left << std::setw(24) << "category" << std::right << std::setw(8) << "GT" << std::setw(8) << "dets"
     << std::setw(9) << ("AP_" + t) << std::setw(9) << "AP50" << std::setw(9) << "AP75" << std::setw(9)
     << ("AR_" + t) << '\n';
  for (const auto& c : result.per_category) {
    const std::string name = c.name.empty() ? std::to_string(c.category_id) : c.name;
    os << std::left << std::setw(24) << name.substr(0, 23) << std::right << std::setw(8) << c.num_gt
       << std::setw(8) << c.num_dets;
    if (c.evaluated()) {
      os << std::setw(9) << pct(c.metrics.ap) << std::setw(9) << pct(c.metrics.ap50) << std::setw(9)
         << pct(c.metrics.ap75) << std::setw(9) << pct(c.metrics.ar) << '\n';
    } else {
      os << "    (no ground truth, excluded from mean)\n";
    }
  }
  os << std::left << std::setw(24) << "mean" << std::right << std::setw(8) << result.num_gt << std::setw(8)
     << result.num_dets;
  if (result.mean.categories_evaluated) {
    const Metrics& m = result.mean.metrics;
    os << std::setw(9) << pct(m.ap) << std::setw(9) << pct(m.ap50) << std::setw(9) << pct(m.ap75) << std::setw(9)
       << pct(m.ar) << '\n';
  } else {
    os << "    (no categories evaluated)\n";
  }
  return os.str();
}

std::string format_split_table(const SplitReport& report, IouType type) {
  const std::string t = to_string(type);
  std::ostringstream os;
  os << std::left << std::setw(8) << "split" << std::right << std::setw(12) << "categories" << std::setw(9)
     << ("AP_" + t) << std::setw(9) << "AP50" << std::setw(9) << "AP75" << std::setw(9) << ("AR_" + t) << '\n';
  auto row = [&](const char* name, const Summary& s) {
    os << std::left << std::setw(8) << name << std::right << std::setw(12) << s.categories_evaluated;
    if (s.categories_evaluated) {
      os << std::setw(9) << pct(s.metrics.ap) << std::setw(9) << pct(s.metrics.ap50) << std::setw(9)
         << pct(s.metrics.ap75) << std::setw(9) << pct(s.metrics.ar) << '\n';
    } else {
      os << "    (no categories evaluated)\n";
    }
  };
  row("BASE", report.base);
  row("NOVEL", report.novel);
  return os.str();
}

std::string to_csv(const EvalResult& result) {
  std::ostringstream os;
  os << std::setprecision(17) << "category_id,name,num_gt,num_dets,AP,AP50,AP75,AR\n";
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    s << std::setprecision(17);
    if (v) s << *v;
    return s.str();
  };
  for (const auto& c : result.per_category) {
    os << c.category_id << ',' << c.name << ',' << c.num_gt << ',' << c.num_dets << ',';
    if (c.evaluated()) {
      os << c.metrics.ap << ',' << opt(c.metrics.ap50) << ',' << opt(c.metrics.ap75) << ',' << c.metrics.ar;
    } else {
      os << ",,,";
    }
    os << '\n';
  }
  if (result.mean.categories_evaluated) {
    const Metrics& m = result.mean.metrics;
    os << "mean,," << result.num_gt << ',' << result.num_dets << ',' << m.ap << ',' << opt(m.ap50) << ','
       << opt(m.ap75) << ',' << m.ar << '\n';
  }
  return os.str();
}

}  // namespace semprobe::eval
