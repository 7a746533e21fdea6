#include "semprobe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "semprobe/error.hpp"
#include "semprobe/matcher_io.hpp"
#include "semprobe/rng.hpp"
#include "semprobe/storage.hpp"

namespace semprobe::synth {
namespace {

constexpr int kPlacementAttempts = 10000;

std::vector<float> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double s = 0.0;
  do {
    s = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      s += x * x;
    }
  } while (s == 0.0);
  const double n = std::sqrt(s);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = float(v[i] / n);
  return out;
}

struct PatchRect {
  std::size_t px = 0, py = 0, w = 0, h = 0;
};

class Grid {
 public:
  Grid(std::size_t height, std::size_t width) : h_(height), w_(width), used_(height * width, 0) {}

  bool free(const PatchRect& r) const {
    for (std::size_t y = r.py; y < r.py + r.h; ++y)
      for (std::size_t x = r.px; x < r.px + r.w; ++x)
        if (used_[y * w_ + x]) return false;
    return true;
  }

  void mark(const PatchRect& r) {
    for (std::size_t y = r.py; y < r.py + r.h; ++y)
      for (std::size_t x = r.px; x < r.px + r.w; ++x) used_[y * w_ + x] = 1;
  }

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }

 private:
  std::size_t h_, w_;
  std::vector<std::uint8_t> used_;
};

PatchRect place(Rng& rng, Grid& grid, std::size_t max_side, const char* what) {
  for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
    PatchRect r;
    r.w = 1 + rng.below(std::min(max_side, grid.width()));
    r.h = 1 + rng.below(std::min(max_side, grid.height()));
    r.px = rng.below(grid.width() - r.w + 1);
    r.py = rng.below(grid.height() - r.h + 1);
    if (grid.free(r)) {
      grid.mark(r);
      return r;
    }
  }
  throw Error(ErrorKind::Input, std::string("could not place ") + what + " without overlap; enlarge the image");
}

DenseFeatureMap background_map(Rng& rng, const SceneSpec& spec, std::int64_t image_id) {
  const std::size_t hp = (spec.height + spec.stride - 1) / spec.stride;
  const std::size_t wp = (spec.width + spec.stride - 1) / spec.stride;
  std::vector<float> data;
  data.reserve(hp * wp * spec.dim);
  for (std::size_t i = 0; i < hp * wp; ++i) {
    const auto v = random_unit(rng, spec.dim);
    data.insert(data.end(), v.begin(), v.end());
  }
  DenseFeatureMap map;
  map.grid = Tensor::f32({hp, wp, spec.dim}, std::move(data));
  map.meta = DenseMapMeta{image_id, spec.stride, spec.width, spec.height};
  return map;
}

void paint(Rng& rng, DenseFeatureMap& map, const PatchRect& r, std::span<const float> prototype, double sigma) {
  auto grid = map.grid.f32();
  const std::size_t wp = map.grid_width(), d = map.dim();
  for (std::size_t y = r.py; y < r.py + r.h; ++y) {
    for (std::size_t x = r.px; x < r.px + r.w; ++x) {
      float* patch = grid.data() + (y * wp + x) * d;
      for (std::size_t k = 0; k < d; ++k) patch[k] = float(prototype[k] + sigma * rng.normal());
    }
  }
}

RleMask pixel_mask(const SceneSpec& spec, const PatchRect& r) {
  return rle_from_rect(spec.height, spec.width, std::uint32_t(r.px * spec.stride), std::uint32_t(r.py * spec.stride),
                       std::uint32_t(r.w * spec.stride), std::uint32_t(r.h * spec.stride));
}

}  // namespace

void BlobSpec::validate() const {
  if (num_classes < 2) throw Error(ErrorKind::Input, "blobs need at least 2 classes");
  if (dim < num_classes) throw Error(ErrorKind::Input, "blobs need dim >= number of classes");
  if (per_class < 1) throw Error(ErrorKind::Input, "blobs need at least 1 point per class");
  if (!(separation >= 0.0)) throw Error(ErrorKind::Input, "blob separation must be >= 0");
}

std::pair<FeatureMatrix, LabelVector> gen_blobs(const BlobSpec& spec) {
  spec.validate();
  const std::size_t C = spec.num_classes, D = spec.dim, N = C * spec.per_class;
  // Means a * e_c are pairwise separation apart when a = separation / sqrt(2).
  const double axis = spec.separation / std::sqrt(2.0);
  const double coord_std = 1.0 / std::sqrt(double(D));
  Rng rng(spec.seed);
  std::vector<float> data(N * D);
  LabelVector labels;
  labels.num_classes = static_cast<std::int64_t>(C);
  labels.labels.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t c = i % C;
    labels.labels[i] = static_cast<std::int64_t>(c);
    for (std::size_t k = 0; k < D; ++k) {
      data[i * D + k] = float((k == c ? axis : 0.0) + coord_std * rng.normal());
    }
  }
  return {FeatureMatrix::from_rows(N, D, std::move(data)), std::move(labels)};
}

void SceneSpec::validate() const {
  if (width == 0 || height == 0 || stride == 0) throw Error(ErrorKind::Input, "scene size and stride must be >= 1");
  if (dim < 1) throw Error(ErrorKind::Input, "scene feature dim must be >= 1");
  if (num_categories < 1) throw Error(ErrorKind::Input, "scene needs at least one category");
  if (max_object_patches < 1) throw Error(ErrorKind::Input, "objects must cover at least one patch");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::Input, "noise sigma must be >= 0");
}

PlantedScene gen_planted_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  PlantedScene scene;
  scene.spec = spec;

  std::vector<float> protos;
  for (std::size_t k = 0; k < spec.num_categories; ++k) {
    scene.category_ids.push_back(static_cast<std::int64_t>(k + 1));
    const auto v = random_unit(rng, spec.dim);
    protos.insert(protos.end(), v.begin(), v.end());
  }
  scene.prototypes = Tensor::f32({spec.num_categories, spec.dim}, protos);
  auto prototype = [&](std::size_t k) { return scene.prototypes.f32().subspan(k * spec.dim, spec.dim); };

  constexpr std::int64_t kTargetId = 1;
  scene.target = background_map(rng, spec, kTargetId);
  Grid grid(scene.target.grid_height(), scene.target.grid_width());

  scene.ground_truth.images.push_back({kTargetId, spec.width, spec.height});
  for (std::size_t k = 0; k < spec.num_categories; ++k) {
    scene.ground_truth.categories.push_back({scene.category_ids[k], "category_" + std::to_string(k + 1)});
  }

  for (std::size_t o = 0; o < spec.num_objects; ++o) {
    const std::size_t k = o % spec.num_categories;
    const PatchRect r = place(rng, grid, spec.max_object_patches, "object");
    paint(rng, scene.target, r, prototype(k), spec.noise_sigma);
    RleMask mask = pixel_mask(spec, r);
    Annotation ann;
    ann.id = static_cast<std::int64_t>(o + 1);
    ann.image_id = kTargetId;
    ann.category_id = scene.category_ids[k];
    ann.bbox = mask.bbox();
    ann.segmentation = mask;
    scene.ground_truth.annotations.push_back(ann);
    scene.proposals.push_back(match::Proposal{kTargetId, mask, mask.bbox(), rng.uniform(0.5, 1.0), std::nullopt});
  }
  for (std::size_t q = 0; q < spec.num_distractors; ++q) {
    const PatchRect r = place(rng, grid, spec.max_object_patches, "distractor");
    RleMask mask = pixel_mask(spec, r);
    scene.proposals.push_back(match::Proposal{kTargetId, mask, mask.bbox(), rng.uniform(0.5, 1.0), std::nullopt});
  }

  for (std::size_t k = 0; k < spec.num_categories; ++k) {
    const auto ref_id = static_cast<std::int64_t>(1000 + k + 1);
    DenseFeatureMap ref_map = background_map(rng, spec, ref_id);
    Grid ref_grid(ref_map.grid_height(), ref_map.grid_width());
    const PatchRect r = place(rng, ref_grid, spec.max_object_patches, "reference object");
    paint(rng, ref_map, r, prototype(k), spec.noise_sigma);
    scene.references.references.push_back(
        match::Reference{scene.category_ids[k], std::move(ref_map), pixel_mask(spec, r), std::nullopt});
  }
  return scene;
}

void write_scene(const std::filesystem::path& dir, const PlantedScene& scene) {
  std::filesystem::create_directories(dir);
  save_dense_map(dir / "target_map.tnsr", dir / "target_meta.json", scene.target);
  match::save_reference_set(dir / "refs.json", scene.references, scene.spec.stride);
  save_annotations(dir / "gt.json", scene.ground_truth);
  match::save_proposals(dir / "proposals.json", scene.proposals);
}

}  // namespace semprobe::synth
