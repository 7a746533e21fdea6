#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semprobe/mask.hpp"

namespace semprobe {

struct ImageInfo {
  std::int64_t id = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

struct Category {
  std::int64_t id = 0;
  std::string name;
  friend bool operator==(const Category&, const Category&) = default;
};

struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  Box bbox;
  std::optional<RleMask> segmentation;
  bool iscrowd = false;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

// Minimal COCO-style ground truth: images, instance annotations, categories.
struct AnnotationSet {
  std::vector<ImageInfo> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;

  const ImageInfo* find_image(std::int64_t id) const;
  bool has_category(std::int64_t id) const;

  // Checks referential integrity and mask sizes; throws Validation.
  void validate() const;

  friend bool operator==(const AnnotationSet& a, const AnnotationSet& b) {
    return a.images == b.images && a.annotations == b.annotations && a.categories == b.categories;
  }
};

// Scored class + box (+ mask) prediction. Proposals share this record with
// the objectness score in `score` and no meaningful category.
struct Detection {
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  double score = 0.0;
  Box bbox;
  std::optional<RleMask> mask;
  std::optional<std::vector<float>> feature;  // optional precomputed pooled feature
  friend bool operator==(const Detection&, const Detection&) = default;
};

}  // namespace semprobe
