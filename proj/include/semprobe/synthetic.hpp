#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "semprobe/annotations.hpp"
#include "semprobe/matcher.hpp"
#include "semprobe/tensor.hpp"

namespace semprobe::synth {

// Isotropic Gaussian classes. `separation` is the distance between any two
// class means in units of the within-class spread sigma, where sigma is the
// RMS distance of a sample from its mean (per-coordinate std sigma/sqrt(D)).
struct BlobSpec {
  std::size_t num_classes = 10;
  std::size_t dim = 64;
  std::size_t per_class = 500;
  double separation = 6.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Rows are interleaved by class (row i has label i % C). Means sit on scaled
// coordinate axes, so they do not depend on the seed; requires dim >= C.
std::pair<FeatureMatrix, LabelVector> gen_blobs(const BlobSpec& spec);

struct SceneSpec {
  std::uint32_t width = 224;
  std::uint32_t height = 224;
  std::uint32_t stride = 14;
  std::size_t dim = 64;
  std::size_t num_categories = 3;
  std::size_t num_objects = 6;
  std::size_t num_distractors = 4;
  std::size_t max_object_patches = 3;  // per side
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PlantedScene {
  SceneSpec spec;
  std::vector<std::int64_t> category_ids;  // 1..K
  Tensor prototypes;                       // f32 [K, D], unit rows
  DenseFeatureMap target;
  match::ReferenceSet references;  // one per category
  AnnotationSet ground_truth;
  std::vector<match::Proposal> proposals;  // objects first, then distractors
};

// Background patches are random unit vectors; object patches are the
// category prototype plus N(0, sigma^2 I). Objects are patch-aligned
// rectangles that never share a patch. Throws Input when placement fails.
PlantedScene gen_planted_scene(const SceneSpec& spec);

// Writes target_map.tnsr, target_meta.json, refs.json (+ ref_<i>.tnsr),
// gt.json and proposals.json into dir.
void write_scene(const std::filesystem::path& dir, const PlantedScene& scene);

}  // namespace semprobe::synth
