#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semprobe/annotations.hpp"
#include "semprobe/probe_model.hpp"
#include "semprobe/tensor.hpp"

namespace semprobe {

namespace fs = std::filesystem;
using Bytes = std::vector<std::uint8_t>;

// TNSR layout: "TNSR", u32 version=1, u8 dtype (1=f32, 2=i64), u8 ndim,
// 2 zero bytes, ndim x u64 dims, raw row-major payload. All little-endian.
inline constexpr std::uint32_t kTensorVersion = 1;
Bytes encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
void write_tensor(const fs::path& path, const Tensor& t);
Tensor read_tensor(const fs::path& path);

// LPCK layout: "LPCK", u32 version=1, u32 C, u32 D, C*D f32 weights, C f32 bias.
inline constexpr std::uint32_t kCheckpointVersion = 1;
Bytes encode_checkpoint(const ProbeModel& model);
ProbeModel decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
void write_checkpoint(const fs::path& path, const ProbeModel& model);
ProbeModel read_checkpoint(const fs::path& path);

Bytes read_file(const fs::path& path);
void write_file(const fs::path& path, std::span<const std::uint8_t> bytes);
nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);

// {"size": [h, w], "counts": [...]}
nlohmann::json rle_to_json(const RleMask& rle);
RleMask rle_from_json(const nlohmann::json& j);

// Boxes are clamped to their image bounds; the number of clamped boxes is
// logged to stderr. Throws Validation on dangling references or bad masks.
AnnotationSet annotations_from_json(const nlohmann::json& j);
nlohmann::json annotations_to_json(const AnnotationSet& set);
AnnotationSet load_annotations(const fs::path& path);
void save_annotations(const fs::path& path, const AnnotationSet& set);

// COCO results list: [{image_id, category_id, bbox, score, segmentation}, ...]
std::vector<Detection> detections_from_json(const nlohmann::json& j);
nlohmann::json detections_to_json(const std::vector<Detection>& dets);
std::vector<Detection> load_detections(const fs::path& path);
void save_detections(const fs::path& path, const std::vector<Detection>& dets);

// Dense map = [Hp, Wp, D] TNSR + sidecar {image_id, stride, width, height}.
nlohmann::json dense_meta_to_json(const DenseMapMeta& meta);
DenseMapMeta dense_meta_from_json(const nlohmann::json& j);
DenseFeatureMap load_dense_map(const fs::path& tensor_path, const fs::path& meta_path);
void save_dense_map(const fs::path& tensor_path, const fs::path& meta_path, const DenseFeatureMap& map);

}  // namespace semprobe
