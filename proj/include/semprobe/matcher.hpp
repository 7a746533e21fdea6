#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semprobe/annotations.hpp"
#include "semprobe/mask.hpp"
#include "semprobe/tensor.hpp"

namespace semprobe::match {

struct Point {
  float x = 0.0f;
  float y = 0.0f;
  friend bool operator==(const Point&, const Point&) = default;
};

// n*n prompt points at cell centres, row-major: ((i+0.5)W/n, (j+0.5)H/n).
std::vector<Point> grid_points(std::uint32_t width, std::uint32_t height, std::uint32_t points_per_side);

// Per-patch pixel coverage of a mask on a stride-s patch grid.
struct Coverage {
  std::size_t grid_height = 0;
  std::size_t grid_width = 0;
  std::vector<std::uint64_t> inside;  // mask pixels per patch, row-major
  std::vector<std::uint64_t> total;   // image pixels per patch (edge patches are clipped)
};
Coverage patch_coverage(const RleMask& mask, std::uint32_t stride);

// Mean of the patch vectors covered >= 50% by the mask; if none qualifies,
// the single patch with the largest covered fraction.
std::vector<float> pool_region_feature(const DenseFeatureMap& map, const RleMask& mask, std::uint32_t stride);

struct Reference {
  std::int64_t category_id = 0;
  DenseFeatureMap map;
  RleMask mask;                         // pixel mask, or grid mask with stride 1
  std::optional<std::uint32_t> stride;  // overrides the set-wide stride
};

struct ReferenceSet {
  std::vector<Reference> references;
};

struct Prototype {
  std::int64_t category_id = 0;
  std::vector<float> vector;  // unit L2 norm
  std::size_t source_ref = 0;
};

// One unit-norm prototype per reference, in reference order.
std::vector<Prototype> build_prototypes(const ReferenceSet& refs, std::uint32_t stride);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

struct Proposal {
  std::int64_t image_id = 0;
  RleMask mask;
  Box box;  // tight bounds of mask
  double objectness = 0.0;
  std::optional<std::vector<float>> feature;
};

// Validates a detections-schema record as a proposal; the box is recomputed
// from the mask.
Proposal proposal_from_detection(const Detection& det);

// Assigns every proposal to the category of its most similar prototype and
// scores it (sim + 1) / 2. Proposals below sim_threshold are dropped.
std::vector<Detection> match_proposals(const std::vector<Proposal>& proposals, const std::vector<Prototype>& prototypes,
                                       const DenseFeatureMap& target, std::uint32_t stride, double sim_threshold);

// Class-wise greedy NMS on mask IoU (box IoU when a mask is absent).
std::vector<Detection> dedup(const std::vector<Detection>& dets, double iou_threshold);

}  // namespace semprobe::match
