#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "semprobe/matcher.hpp"

namespace semprobe::match {

// refs.json:
//   {"stride": 14,
//    "references": [{"category_id": 1, "map": "ref_0.tnsr",
//                    "mask": {"size": [h, w], "counts": [...]}, "stride": 14?}]}
// Map paths are resolved relative to the refs.json directory.
struct LoadedReferences {
  ReferenceSet set;
  std::optional<std::uint32_t> stride;
};
LoadedReferences load_reference_set(const std::filesystem::path& path);
void save_reference_set(const std::filesystem::path& path, const ReferenceSet& refs, std::uint32_t stride);

// Prototype vectors as f32 [P, D] plus a sidecar {category_ids, source_refs}.
std::filesystem::path prototype_meta_path(const std::filesystem::path& tensor_path);
void save_prototypes(const std::filesystem::path& tensor_path, const std::vector<Prototype>& protos);
std::vector<Prototype> load_prototypes(const std::filesystem::path& tensor_path,
                                       const std::optional<std::filesystem::path>& meta_path = std::nullopt);

// Proposals use the detections schema with objectness in "score".
void save_proposals(const std::filesystem::path& path, const std::vector<Proposal>& proposals);
std::vector<Proposal> load_proposals(const std::filesystem::path& path);

nlohmann::json points_to_json(std::uint32_t width, std::uint32_t height, std::uint32_t points_per_side,
                              const std::vector<Point>& points);

}  // namespace semprobe::match
