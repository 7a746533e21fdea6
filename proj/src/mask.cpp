#include "semprobe/mask.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "semprobe/error.hpp"

namespace semprobe {

void RleMask::validate() const {
  if (height == 0 || width == 0) throw Error(ErrorKind::Format, "RLE mask dimensions must be >= 1");
  if (counts.empty()) throw Error(ErrorKind::Format, "RLE mask has no counts");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i > 0 && counts[i] == 0) {
      throw Error(ErrorKind::Format, "RLE mask has an empty run at position " + std::to_string(i));
    }
    total += counts[i];
  }
  const std::uint64_t expected = std::uint64_t{height} * width;
  if (total != expected) {
    throw Error(ErrorKind::Format, "RLE counts sum to " + std::to_string(total) + ", expected " +
                                       std::to_string(expected) + " (" + std::to_string(height) +
                                       "x" + std::to_string(width) + ")");
  }
}

std::uint64_t RleMask::area() const {
  std::uint64_t a = 0;
  for (std::size_t i = 1; i < counts.size(); i += 2) a += counts[i];
  return a;
}

Box RleMask::bbox() const {
  std::uint64_t pos = 0;
  std::uint32_t x_min = std::numeric_limits<std::uint32_t>::max(), x_max = 0;
  std::uint32_t y_min = std::numeric_limits<std::uint32_t>::max(), y_max = 0;
  bool any = false;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i % 2 == 1 && counts[i] > 0) {
      const std::uint64_t first = pos;
      const std::uint64_t last = pos + counts[i] - 1;
      const auto x_first = static_cast<std::uint32_t>(first / height);
      const auto x_last = static_cast<std::uint32_t>(last / height);
      x_min = std::min(x_min, x_first);
      x_max = std::max(x_max, x_last);
      if (x_first != x_last) {
        // The run wraps a column boundary, so it touches the top and bottom rows.
        y_min = 0;
        y_max = height - 1;
      } else {
        y_min = std::min(y_min, static_cast<std::uint32_t>(first % height));
        y_max = std::max(y_max, static_cast<std::uint32_t>(last % height));
      }
      any = true;
    }
    pos += counts[i];
  }
  if (!any) return {};
  return Box{double(x_min), double(y_min), double(x_max - x_min + 1), double(y_max - y_min + 1)};
}

RleMask rle_encode(const Bitmask& mask) {
  if (mask.height == 0 || mask.width == 0) {
    throw Error(ErrorKind::Input, "bitmask dimensions must be >= 1");
  }
  RleMask rle{mask.height, mask.width, {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (std::uint32_t x = 0; x < mask.width; ++x) {
    for (std::uint32_t y = 0; y < mask.height; ++y) {
      const std::uint8_t v = mask.at(y, x) ? 1 : 0;
      if (v != current) {
        rle.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

Bitmask rle_decode(const RleMask& rle) {
  rle.validate();
  Bitmask mask(rle.height, rle.width);
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    if (i % 2 == 1) {
      for (std::uint64_t p = pos; p < pos + rle.counts[i]; ++p) {
        mask.set(static_cast<std::uint32_t>(p % rle.height), static_cast<std::uint32_t>(p / rle.height));
      }
    }
    pos += rle.counts[i];
  }
  return mask;
}

RleMask rle_from_rect(std::uint32_t height, std::uint32_t width, std::uint32_t x0, std::uint32_t y0,
                      std::uint32_t w, std::uint32_t h) {
  Bitmask mask(height, width);
  const std::uint32_t x1 = std::min<std::uint64_t>(width, std::uint64_t{x0} + w);
  const std::uint32_t y1 = std::min<std::uint64_t>(height, std::uint64_t{y0} + h);
  for (std::uint32_t y = y0; y < y1; ++y)
    for (std::uint32_t x = x0; x < x1; ++x) mask.set(y, x);
  return rle_encode(mask);
}

double box_iou(const Box& det, const Box& gt, bool crowd) {
  const double iw = std::min(det.x + det.w, gt.x + gt.w) - std::max(det.x, gt.x);
  if (iw <= 0) return 0.0;
  const double ih = std::min(det.y + det.h, gt.y + gt.h) - std::max(det.y, gt.y);
  if (ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = crowd ? det.area() : det.area() + gt.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double mask_iou(const RleMask& det, const RleMask& gt, bool crowd) {
  if (det.height != gt.height || det.width != gt.width) {
    throw Error(ErrorKind::Shape, "mask size mismatch: " + std::to_string(det.height) + "x" +
                                      std::to_string(det.width) + " vs " + std::to_string(gt.height) +
                                      "x" + std::to_string(gt.width));
  }
  // Walk both run lists in lockstep; each step consumes the shorter remaining run.
  std::size_t ia = 0, ib = 0;
  std::uint64_t ra = det.counts.empty() ? 0 : det.counts[0];
  std::uint64_t rb = gt.counts.empty() ? 0 : gt.counts[0];
  bool va = false, vb = false;
  std::uint64_t inter = 0, uni = 0;
  const std::size_t na = det.counts.size(), nb = gt.counts.size();
  while (ia < na && ib < nb) {
    const std::uint64_t step = std::min(ra, rb);
    if (va || vb) {
      uni += step;
      if (va && vb) inter += step;
    }
    ra -= step;
    rb -= step;
    while (ra == 0 && ia < na) {
      if (++ia < na) {
        ra = det.counts[ia];
        va = !va;
      }
    }
    while (rb == 0 && ib < nb) {
      if (++ib < nb) {
        rb = gt.counts[ib];
        vb = !vb;
      }
    }
  }
  if (inter == 0) return 0.0;
  if (crowd) uni = det.area();
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace semprobe
