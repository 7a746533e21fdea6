#include "semprobe/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "semprobe/error.hpp"
#include "semprobe/parallel.hpp"

namespace semprobe::match {
namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

double norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += double(x) * double(x);
  return std::sqrt(s);
}

struct Scored {
  std::int64_t category_id = 0;
  double similarity = -2.0;
  bool valid = false;
};

}  // namespace

std::vector<Point> grid_points(std::uint32_t width, std::uint32_t height, std::uint32_t points_per_side) {
  if (points_per_side == 0) throw Error(ErrorKind::Input, "points_per_side must be >= 1");
  if (width == 0 || height == 0) throw Error(ErrorKind::Input, "image width and height must be >= 1");
  const double n = points_per_side;
  std::vector<Point> points;
  points.reserve(std::size_t{points_per_side} * points_per_side);
  for (std::uint32_t j = 0; j < points_per_side; ++j) {
    for (std::uint32_t i = 0; i < points_per_side; ++i) {
      points.push_back({static_cast<float>((i + 0.5) * width / n), static_cast<float>((j + 0.5) * height / n)});
    }
  }
  return points;
}

Coverage patch_coverage(const RleMask& mask, std::uint32_t stride) {
  if (stride == 0) throw Error(ErrorKind::Input, "stride must be >= 1");
  mask.validate();
  const std::size_t H = mask.height, W = mask.width, s = stride;
  Coverage cov;
  cov.grid_height = ceil_div(H, s);
  cov.grid_width = ceil_div(W, s);
  cov.inside.assign(cov.grid_height * cov.grid_width, 0);
  cov.total.resize(cov.inside.size());
  for (std::size_t py = 0; py < cov.grid_height; ++py) {
    for (std::size_t px = 0; px < cov.grid_width; ++px) {
      cov.total[py * cov.grid_width + px] = std::min(s, H - py * s) * std::min(s, W - px * s);
    }
  }

  std::uint64_t pos = 0;
  for (std::size_t r = 0; r < mask.counts.size(); ++r) {
    std::uint64_t len = mask.counts[r];
    if (r % 2 == 1) {
      std::uint64_t p = pos;
      while (len > 0) {
        const std::size_t x = p / H, y = p % H;
        const std::size_t seg = std::min<std::uint64_t>(len, H - y);
        const std::size_t px = x / s;
        for (std::size_t py = y / s; py <= (y + seg - 1) / s; ++py) {
          const std::size_t lo = std::max(y, py * s), hi = std::min(y + seg, (py + 1) * s);
          cov.inside[py * cov.grid_width + px] += hi - lo;
        }
        p += seg;
        len -= seg;
      }
    }
    pos += mask.counts[r];
  }
  return cov;
}

std::vector<float> pool_region_feature(const DenseFeatureMap& map, const RleMask& mask, std::uint32_t stride) {
  if (map.grid.ndim() != 3) throw Error(ErrorKind::Shape, "dense map must be [Hp, Wp, D]");
  if (mask.empty()) throw Error(ErrorKind::Input, "cannot pool an empty mask");
  const Coverage cov = patch_coverage(mask, stride);
  if (cov.grid_height != map.grid_height() || cov.grid_width != map.grid_width()) {
    throw Error(ErrorKind::Shape, "mask " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                                      " at stride " + std::to_string(stride) + " implies a " +
                                      std::to_string(cov.grid_height) + "x" + std::to_string(cov.grid_width) +
                                      " grid, map is " + std::to_string(map.grid_height()) + "x" +
                                      std::to_string(map.grid_width()));
  }
  const std::size_t D = map.dim();
  std::vector<double> acc(D, 0.0);
  std::size_t covered = 0;
  std::size_t best = 0;
  double best_frac = -1.0;
  for (std::size_t idx = 0; idx < cov.inside.size(); ++idx) {
    const double frac = double(cov.inside[idx]) / double(cov.total[idx]);
    if (frac > best_frac) {
      best_frac = frac;
      best = idx;
    }
    if (2 * cov.inside[idx] >= cov.total[idx]) {
      const auto v = map.patch(idx / cov.grid_width, idx % cov.grid_width);
      for (std::size_t d = 0; d < D; ++d) acc[d] += v[d];
      ++covered;
    }
  }
  if (covered == 0) {
    const auto v = map.patch(best / cov.grid_width, best % cov.grid_width);
    return std::vector<float>(v.begin(), v.end());
  }
  std::vector<float> out(D);
  for (std::size_t d = 0; d < D; ++d) out[d] = float(acc[d] / double(covered));
  return out;
}

std::vector<Prototype> build_prototypes(const ReferenceSet& refs, std::uint32_t stride) {
  std::vector<Prototype> protos(refs.references.size());
  parallel_for(refs.references.size(), [&](std::size_t i) {
    const Reference& ref = refs.references[i];
    std::vector<float> v = pool_region_feature(ref.map, ref.mask, ref.stride.value_or(stride));
    const double n = norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error(ErrorKind::Degenerate, "reference " + std::to_string(i) + " of category " +
                                             std::to_string(ref.category_id) + " pools to a zero vector");
    }
    for (auto& x : v) x = float(double(x) / n);
    protos[i] = Prototype{ref.category_id, std::move(v), i};
  });
  return protos;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::Shape, "cosine of vectors with dims " + std::to_string(a.size()) + " and " +
                                      std::to_string(b.size()));
  }
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::Input, "cosine similarity of a zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += double(a[i]) * double(b[i]);
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

Proposal proposal_from_detection(const Detection& det) {
  if (!det.mask) throw Error(ErrorKind::Validation, "proposal without a segmentation mask");
  if (det.mask->empty()) throw Error(ErrorKind::Validation, "proposal with an empty mask");
  return Proposal{det.image_id, *det.mask, det.mask->bbox(), det.score, det.feature};
}

std::vector<Detection> match_proposals(const std::vector<Proposal>& proposals, const std::vector<Prototype>& prototypes,
                                       const DenseFeatureMap& target, std::uint32_t stride, double sim_threshold) {
  if (prototypes.empty()) throw Error(ErrorKind::Config, "no prototypes to match against");
  for (const auto& p : proposals) {
    if (p.image_id != proposals.front().image_id) {
      throw Error(ErrorKind::Input, "proposals span more than one image");
    }
  }

  // Prototype indices grouped by ascending category id.
  std::map<std::int64_t, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < prototypes.size(); ++i) by_category[prototypes[i].category_id].push_back(i);

  std::vector<Scored> scored(proposals.size());
  parallel_for(proposals.size(), [&](std::size_t i) {
    const Proposal& p = proposals[i];
    const std::vector<float> feature = p.feature ? *p.feature : pool_region_feature(target, p.mask, stride);
    Scored best;
    for (const auto& [category, members] : by_category) {
      double sim = -2.0;
      for (std::size_t k : members) sim = std::max(sim, cosine_similarity(feature, prototypes[k].vector));
      if (!best.valid || sim > best.similarity) best = Scored{category, sim, true};
    }
    scored[i] = best;
  });

  std::vector<Detection> dets;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (scored[i].similarity < sim_threshold) continue;
    const Proposal& p = proposals[i];
    Detection d;
    d.image_id = p.image_id;
    d.category_id = scored[i].category_id;
    d.score = std::clamp((scored[i].similarity + 1.0) / 2.0, 0.0, 1.0);
    d.bbox = p.mask.bbox();
    d.mask = p.mask;
    dets.push_back(std::move(d));
  }
  return dets;
}

std::vector<Detection> dedup(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return dets[a].category_id < dets[b].category_id;
  });

  auto overlap = [](const Detection& a, const Detection& b) {
    if (a.mask && b.mask) return mask_iou(*a.mask, *b.mask);
    return box_iou(a.bbox, b.bbox);
  };

  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> kept_by_class;
  std::vector<Detection> out;
  for (std::size_t idx : order) {
    auto& kept = kept_by_class[{dets[idx].image_id, dets[idx].category_id}];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return overlap(dets[idx], dets[k]) >= iou_threshold;
    });
    if (suppressed) continue;
    kept.push_back(idx);
    out.push_back(dets[idx]);
  }
  return out;
}

}  // namespace semprobe::match
