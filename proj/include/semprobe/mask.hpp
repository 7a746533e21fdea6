#pragma once

#include <cstdint>
#include <vector>

namespace semprobe {

// Axis-aligned box [x, y, width, height] in pixels, top-left origin.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  friend bool operator==(const Box&, const Box&) = default;
};

// Binary mask stored row-major: data[y * width + x].
struct Bitmask {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> data;

  Bitmask() = default;
  Bitmask(std::uint32_t h, std::uint32_t w) : height(h), width(w), data(std::size_t{h} * w, 0) {}

  std::uint8_t at(std::uint32_t y, std::uint32_t x) const { return data[std::size_t{y} * width + x]; }
  void set(std::uint32_t y, std::uint32_t x, bool v = true) {
    data[std::size_t{y} * width + x] = v ? 1 : 0;
  }

  friend bool operator==(const Bitmask&, const Bitmask&) = default;
};

// Uncompressed run-length mask. counts alternate 0-runs and 1-runs over the
// pixels in column-major order, starting with a (possibly empty) 0-run.
struct RleMask {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint32_t> counts;

  // Throws Format if the runs do not cover height*width pixels or contain an
  // interior zero run.
  void validate() const;

  std::uint64_t area() const;
  bool empty() const { return area() == 0; }

  // Tight bounding rectangle of the foreground; all zeros for an empty mask.
  Box bbox() const;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask rle_encode(const Bitmask& mask);
Bitmask rle_decode(const RleMask& rle);

// Mask covering the pixel rectangle [x0, x0+w) x [y0, y0+h), clipped to the image.
RleMask rle_from_rect(std::uint32_t height, std::uint32_t width, std::uint32_t x0, std::uint32_t y0,
                      std::uint32_t w, std::uint32_t h);

// Intersection over union; 0 when the union is empty. With crowd set, the
// denominator is the area of `det` alone (COCO crowd convention).
double box_iou(const Box& det, const Box& gt, bool crowd = false);

// Same definition evaluated directly on the run lists. Throws Shape when the
// two masks differ in size.
double mask_iou(const RleMask& det, const RleMask& gt, bool crowd = false);

}  // namespace semprobe
