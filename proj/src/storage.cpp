#include "semprobe/storage.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>

#include "semprobe/error.hpp"

namespace semprobe {
namespace {

using json = nlohmann::json;

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(Bytes& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

// Little-endian cursor over an immutable byte buffer.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw Error(ErrorKind::Format, source_ + ": truncated " + what + ": expected " + std::to_string(n) +
                                         " bytes, got " + std::to_string(remaining()));
    }
  }

  std::uint8_t u8() {
    need(1, "header");
    return bytes_[pos_++];
  }

  std::uint32_t u32() {
    need(4, "header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_++]} << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    need(8, "header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  void magic(const char (&expected)[5]) {
    need(4, "magic");
    if (std::memcmp(bytes_.data() + pos_, expected, 4) != 0) {
      throw Error(ErrorKind::Format, source_ + ": bad magic, expected \"" + std::string(expected) + "\"");
    }
    pos_ += 4;
  }

  const std::string& source() const { return source_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

void check_payload(const Reader& r, std::uint64_t expected) {
  if (r.remaining() != expected) {
    const char* what = r.remaining() < expected ? ": truncated payload: expected " : ": trailing bytes after payload: expected ";
    throw Error(ErrorKind::Format, r.source() + what + std::to_string(expected) +
                                       " bytes, got " + std::to_string(r.remaining()));
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorKind::Format, context + ": missing field \"" + key + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, context + ": field \"" + key + "\": " + e.what());
  }
}

Box box_from_json(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorKind::Format, context + ": bbox must be [x, y, w, h]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (b.w < 0 || b.h < 0) throw Error(ErrorKind::Validation, context + ": negative bbox extent");
  return b;
}

json box_to_json(const Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

bool clamp_box(Box& b, const ImageInfo& im) {
  const Box orig = b;
  const double x0 = std::clamp(b.x, 0.0, double(im.width));
  const double y0 = std::clamp(b.y, 0.0, double(im.height));
  const double x1 = std::clamp(b.x + b.w, 0.0, double(im.width));
  const double y1 = std::clamp(b.y + b.h, 0.0, double(im.height));
  b = Box{x0, y0, x1 - x0, y1 - y0};
  return !(b == orig);
}

}  // namespace

Bytes encode_tensor(const Tensor& t) {
  Bytes out;
  out.reserve(16 + 8 * t.ndim() + t.numel() * 8);
  out.insert(out.end(), {'T', 'N', 'S', 'R'});
  put_u32(out, kTensorVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype()));
  out.push_back(static_cast<std::uint8_t>(t.ndim()));
  out.push_back(0);
  out.push_back(0);
  for (auto d : t.shape()) put_u64(out, d);
  if (t.dtype() == DType::F32) {
    for (float v : t.f32()) put_f32(out, v);
  } else {
    for (std::int64_t v : t.i64()) put_u64(out, static_cast<std::uint64_t>(v));
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& source) {
  Reader r(bytes, source);
  r.magic("TNSR");
  const std::uint32_t version = r.u32();
  if (version != kTensorVersion) {
    throw Error(ErrorKind::Format, source + ": unsupported TNSR version " + std::to_string(version));
  }
  const std::uint8_t dtype = r.u8();
  if (dtype != 1 && dtype != 2) {
    throw Error(ErrorKind::Format, source + ": unknown dtype code " + std::to_string(dtype));
  }
  const std::uint8_t ndim = r.u8();
  if (ndim == 0) throw Error(ErrorKind::Format, source + ": tensor rank must be >= 1");
  if (r.u8() != 0 || r.u8() != 0) throw Error(ErrorKind::Format, source + ": nonzero header padding");
  std::vector<std::uint64_t> shape(ndim);
  std::uint64_t numel = 1;
  for (auto& d : shape) {
    d = r.u64();
    if (d == 0) throw Error(ErrorKind::Format, source + ": zero-length dimension");
    numel *= d;
  }
  const std::uint64_t width = dtype == 1 ? 4 : 8;
  check_payload(r, numel * width);
  if (dtype == 1) {
    std::vector<float> data(numel);
    for (auto& v : data) v = r.f32();
    return Tensor::f32(std::move(shape), std::move(data));
  }
  std::vector<std::int64_t> data(numel);
  for (auto& v : data) v = static_cast<std::int64_t>(r.u64());
  return Tensor::i64(std::move(shape), std::move(data));
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Storage, "cannot open " + path.string() + " for reading");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::Storage, "read failed: " + path.string());
  return bytes;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Storage, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Storage, "write failed: " + path.string());
}

void write_tensor(const fs::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

Tensor read_tensor(const fs::path& path) { return decode_tensor(read_file(path), path.string()); }

Bytes encode_checkpoint(const ProbeModel& model) {
  if (model.weights.size() != model.num_classes * model.dim || model.bias.size() != model.num_classes) {
    throw Error(ErrorKind::Shape, "probe model buffers do not match C x D");
  }
  Bytes out;
  out.reserve(16 + 4 * (model.weights.size() + model.bias.size()));
  out.insert(out.end(), {'L', 'P', 'C', 'K'});
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(model.num_classes));
  put_u32(out, static_cast<std::uint32_t>(model.dim));
  for (float w : model.weights) put_f32(out, w);
  for (float b : model.bias) put_f32(out, b);
  return out;
}

ProbeModel decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source) {
  Reader r(bytes, source);
  r.magic("LPCK");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::Format, source + ": unsupported LPCK version " + std::to_string(version));
  }
  const std::uint32_t classes = r.u32();
  const std::uint32_t dim = r.u32();
  check_payload(r, 4 * (std::uint64_t{classes} * dim + classes));
  ProbeModel m = ProbeModel::zeros(classes, dim);
  for (auto& w : m.weights) w = r.f32();
  for (auto& b : m.bias) b = r.f32();
  return m;
}

void write_checkpoint(const fs::path& path, const ProbeModel& model) {
  write_file(path, encode_checkpoint(model));
}

ProbeModel read_checkpoint(const fs::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

json read_json(const fs::path& path) {
  const Bytes bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

json rle_to_json(const RleMask& rle) {
  return json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

RleMask rle_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Format, "segmentation must be an object {size, counts}");
  const auto size = field<std::vector<std::uint32_t>>(j, "size", "segmentation");
  if (size.size() != 2) throw Error(ErrorKind::Format, "segmentation size must be [height, width]");
  if (j.contains("counts") && j["counts"].is_string()) {
    throw Error(ErrorKind::Format, "compressed RLE strings are not supported; use integer counts");
  }
  RleMask rle{size[0], size[1], field<std::vector<std::uint32_t>>(j, "counts", "segmentation")};
  rle.validate();
  return rle;
}

AnnotationSet annotations_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Format, "annotation file must be a JSON object");
  AnnotationSet set;
  for (const auto& im : field<json>(j, "images", "annotations")) {
    set.images.push_back({field<std::int64_t>(im, "id", "image"), field<std::uint32_t>(im, "width", "image"),
                          field<std::uint32_t>(im, "height", "image")});
  }
  if (j.contains("categories")) {
    for (const auto& c : j["categories"]) {
      set.categories.push_back({field<std::int64_t>(c, "id", "category"), c.value("name", std::string{})});
    }
  }
  std::size_t clamped = 0;
  for (const auto& a : field<json>(j, "annotations", "annotations")) {
    Annotation ann;
    ann.id = field<std::int64_t>(a, "id", "annotation");
    const std::string ctx = "annotation " + std::to_string(ann.id);
    ann.image_id = field<std::int64_t>(a, "image_id", ctx);
    ann.category_id = field<std::int64_t>(a, "category_id", ctx);
    ann.bbox = box_from_json(field<json>(a, "bbox", ctx), ctx);
    if (a.contains("segmentation") && !a["segmentation"].is_null()) {
      try {
        ann.segmentation = rle_from_json(a["segmentation"]);
      } catch (const Error& e) {
        throw Error(ErrorKind::Validation, ctx + ": malformed RLE: " + e.what());
      }
    }
    if (a.contains("iscrowd")) {
      const auto& c = a["iscrowd"];
      ann.iscrowd = c.is_boolean() ? c.get<bool>() : c.get<int>() != 0;
    }
    if (const ImageInfo* im = set.find_image(ann.image_id)) clamped += clamp_box(ann.bbox, *im);
    set.annotations.push_back(std::move(ann));
  }
  set.validate();
  if (clamped > 0) std::clog << "[semprobe] warning: clamped " << clamped << " bbox(es) to image bounds\n";
  return set;
}

json annotations_to_json(const AnnotationSet& set) {
  json images = json::array(), anns = json::array(), cats = json::array();
  for (const auto& im : set.images) images.push_back({{"id", im.id}, {"width", im.width}, {"height", im.height}});
  for (const auto& c : set.categories) cats.push_back({{"id", c.id}, {"name", c.name}});
  for (const auto& a : set.annotations) {
    json ja{{"id", a.id},
            {"image_id", a.image_id},
            {"category_id", a.category_id},
            {"bbox", box_to_json(a.bbox)},
            {"iscrowd", a.iscrowd ? 1 : 0}};
    if (a.segmentation) ja["segmentation"] = rle_to_json(*a.segmentation);
    anns.push_back(std::move(ja));
  }
  return json{{"images", images}, {"annotations", anns}, {"categories", cats}};
}

AnnotationSet load_annotations(const fs::path& path) {
  try {
    return annotations_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void save_annotations(const fs::path& path, const AnnotationSet& set) {
  write_json(path, annotations_to_json(set));
}

std::vector<Detection> detections_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Format, "detections file must be a JSON array");
  std::vector<Detection> dets;
  dets.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& d = j[i];
    const std::string ctx = "detection " + std::to_string(i);
    Detection det;
    det.image_id = field<std::int64_t>(d, "image_id", ctx);
    det.category_id = d.value("category_id", std::int64_t{0});
    det.score = field<double>(d, "score", ctx);
    if (d.contains("segmentation") && !d["segmentation"].is_null()) {
      try {
        det.mask = rle_from_json(d["segmentation"]);
      } catch (const Error& e) {
        throw Error(ErrorKind::Validation, ctx + ": malformed RLE: " + e.what());
      }
    }
    if (d.contains("bbox")) {
      det.bbox = box_from_json(d["bbox"], ctx);
    } else if (det.mask) {
      det.bbox = det.mask->bbox();
    } else {
      throw Error(ErrorKind::Format, ctx + ": needs a bbox or a segmentation");
    }
    if (d.contains("feature")) det.feature = d["feature"].get<std::vector<float>>();
    dets.push_back(std::move(det));
  }
  return dets;
}

json detections_to_json(const std::vector<Detection>& dets) {
  json out = json::array();
  for (const auto& d : dets) {
    json jd{{"image_id", d.image_id},
            {"category_id", d.category_id},
            {"bbox", box_to_json(d.bbox)},
            {"score", d.score}};
    if (d.mask) jd["segmentation"] = rle_to_json(*d.mask);
    if (d.feature) jd["feature"] = *d.feature;
    out.push_back(std::move(jd));
  }
  return out;
}

std::vector<Detection> load_detections(const fs::path& path) {
  try {
    return detections_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

void save_detections(const fs::path& path, const std::vector<Detection>& dets) {
  write_json(path, detections_to_json(dets));
}

json dense_meta_to_json(const DenseMapMeta& meta) {
  return json{{"image_id", meta.image_id}, {"stride", meta.stride}, {"width", meta.width}, {"height", meta.height}};
}

DenseMapMeta dense_meta_from_json(const json& j) {
  DenseMapMeta meta;
  meta.image_id = field<std::int64_t>(j, "image_id", "dense map meta");
  meta.stride = field<std::uint32_t>(j, "stride", "dense map meta");
  meta.width = field<std::uint32_t>(j, "width", "dense map meta");
  meta.height = field<std::uint32_t>(j, "height", "dense map meta");
  if (meta.stride == 0) throw Error(ErrorKind::Validation, "dense map stride must be >= 1");
  return meta;
}

DenseFeatureMap load_dense_map(const fs::path& tensor_path, const fs::path& meta_path) {
  DenseFeatureMap map;
  map.grid = read_tensor(tensor_path);
  if (map.grid.dtype() != DType::F32 || map.grid.ndim() != 3) {
    throw Error(ErrorKind::Validation, tensor_path.string() + ": dense map must be f32 [Hp, Wp, D]");
  }
  map.meta = dense_meta_from_json(read_json(meta_path));
  return map;
}

void save_dense_map(const fs::path& tensor_path, const fs::path& meta_path, const DenseFeatureMap& map) {
  write_tensor(tensor_path, map.grid);
  write_json(meta_path, dense_meta_to_json(map.meta));
}

}  // namespace semprobe
