#pragma once

// Seeded random instances shared by the unit and acceptance suites.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "semprobe/annotations.hpp"
#include "semprobe/mask.hpp"
#include "semprobe/rng.hpp"

namespace semprobe::fixtures {

inline RleMask random_rect_mask(Rng& rng, std::uint32_t h, std::uint32_t w) {
  const auto x0 = static_cast<std::uint32_t>(rng.below(w));
  const auto y0 = static_cast<std::uint32_t>(rng.below(h));
  const auto rw = static_cast<std::uint32_t>(1 + rng.below(w - x0));
  const auto rh = static_cast<std::uint32_t>(1 + rng.below(h - y0));
  return rle_from_rect(h, w, x0, y0, rw, rh);
}

// A mask near `base`: the same rectangle shifted and resized by a few pixels.
inline RleMask jitter_mask(Rng& rng, const RleMask& base) {
  const Box b = base.bbox();
  const auto shift = [&](double v, double lo, double hi) {
    const double moved = v + double(static_cast<std::int64_t>(rng.below(5)) - 2);
    return std::clamp(moved, lo, hi);
  };
  const double x0 = shift(b.x, 0, base.width - 1);
  const double y0 = shift(b.y, 0, base.height - 1);
  const double x1 = shift(b.x + b.w, x0 + 1, base.width);
  const double y1 = shift(b.y + b.h, y0 + 1, base.height);
  return rle_from_rect(base.height, base.width, static_cast<std::uint32_t>(x0), static_cast<std::uint32_t>(y0),
                       static_cast<std::uint32_t>(x1 - x0), static_cast<std::uint32_t>(y1 - y0));
}

// Quantised scores so that exact ties occur regularly.
inline double random_score(Rng& rng) { return double(1 + rng.below(20)) / 20.0; }

struct EvalInstance {
  AnnotationSet gt;
  std::vector<Detection> dets;
};

// Up to 10 images with up to 10 ground truths and 10 detections each, over
// three categories. Detections are jittered copies of ground truths or free
// rectangles; a few ground truths are crowd regions.
inline EvalInstance random_eval_instance(std::uint64_t seed) {
  Rng rng(seed);
  EvalInstance inst;
  inst.gt.categories = {{1, "a"}, {2, "b"}, {3, "c"}};
  const std::size_t images = 1 + rng.below(10);
  std::int64_t ann_id = 1;
  for (std::size_t i = 0; i < images; ++i) {
    const ImageInfo im{static_cast<std::int64_t>(i + 1), static_cast<std::uint32_t>(8 + rng.below(17)),
                       static_cast<std::uint32_t>(8 + rng.below(17))};
    inst.gt.images.push_back(im);
    const std::size_t num_gt = rng.below(11);
    std::vector<const Annotation*> placed;
    for (std::size_t g = 0; g < num_gt; ++g) {
      Annotation a;
      a.id = ann_id++;
      a.image_id = im.id;
      a.category_id = 1 + static_cast<std::int64_t>(rng.below(3));
      a.segmentation = random_rect_mask(rng, im.height, im.width);
      a.bbox = a.segmentation->bbox();
      a.iscrowd = rng.below(8) == 0;
      inst.gt.annotations.push_back(a);
    }
    const std::size_t first = inst.gt.annotations.size() - num_gt;
    const std::size_t num_det = rng.below(11);
    for (std::size_t d = 0; d < num_det; ++d) {
      Detection det;
      det.image_id = im.id;
      if (num_gt > 0 && rng.below(4) != 0) {
        const Annotation& src = inst.gt.annotations[first + rng.below(num_gt)];
        det.mask = jitter_mask(rng, *src.segmentation);
        det.category_id = rng.below(6) == 0 ? 1 + static_cast<std::int64_t>(rng.below(3)) : src.category_id;
      } else {
        det.mask = random_rect_mask(rng, im.height, im.width);
        det.category_id = 1 + static_cast<std::int64_t>(rng.below(3));
      }
      det.bbox = det.mask->bbox();
      det.score = random_score(rng);
      inst.dets.push_back(det);
    }
  }
  std::vector<Detection> shuffled = inst.dets;
  for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  inst.dets = shuffled;
  return inst;
}

// n detections on one image across `categories` classes, clustered so that
// suppression actually triggers.
inline std::vector<Detection> random_nms_set(std::uint64_t seed, std::size_t n = 50, std::int64_t categories = 3) {
  Rng rng(seed);
  const std::uint32_t h = 32, w = 32;
  std::vector<RleMask> anchors;
  for (int i = 0; i < 6; ++i) anchors.push_back(random_rect_mask(rng, h, w));
  std::vector<Detection> dets;
  for (std::size_t i = 0; i < n; ++i) {
    Detection d;
    d.image_id = 1;
    d.category_id = 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(categories)));
    d.mask = rng.below(5) == 0 ? random_rect_mask(rng, h, w) : jitter_mask(rng, anchors[rng.below(anchors.size())]);
    d.bbox = d.mask->bbox();
    d.score = random_score(rng);
    dets.push_back(d);
  }
  return dets;
}

}  // namespace semprobe::fixtures
