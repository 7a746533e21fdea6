#include "semprobe/matcher_io.hpp"

#include <string>

#include "semprobe/error.hpp"
#include "semprobe/storage.hpp"

namespace semprobe::match {

using json = nlohmann::json;

LoadedReferences load_reference_set(const std::filesystem::path& path) {
  const json j = read_json(path);
  const auto base = path.parent_path();
  LoadedReferences out;
  try {
    if (j.contains("stride")) out.stride = j["stride"].get<std::uint32_t>();
    for (const auto& r : j.at("references")) {
      Reference ref;
      ref.category_id = r.at("category_id").get<std::int64_t>();
      ref.map.grid = read_tensor(base / r.at("map").get<std::string>());
      if (ref.map.grid.dtype() != DType::F32 || ref.map.grid.ndim() != 3) {
        throw Error(ErrorKind::Validation, "reference map must be f32 [Hp, Wp, D]");
      }
      ref.mask = rle_from_json(r.at("mask"));
      if (r.contains("stride")) ref.stride = r["stride"].get<std::uint32_t>();
      ref.map.meta = DenseMapMeta{r.value("image_id", std::int64_t{0}), ref.stride.value_or(out.stride.value_or(1)),
                                  ref.mask.width, ref.mask.height};
      out.set.references.push_back(std::move(ref));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return out;
}

void save_reference_set(const std::filesystem::path& path, const ReferenceSet& refs, std::uint32_t stride) {
  const auto base = path.parent_path();
  json list = json::array();
  for (std::size_t i = 0; i < refs.references.size(); ++i) {
    const Reference& ref = refs.references[i];
    const std::string map_name = "ref_" + std::to_string(i) + ".tnsr";
    write_tensor(base / map_name, ref.map.grid);
    json jr{{"category_id", ref.category_id},
            {"image_id", ref.map.meta.image_id},
            {"map", map_name},
            {"mask", rle_to_json(ref.mask)}};
    if (ref.stride) jr["stride"] = *ref.stride;
    list.push_back(std::move(jr));
  }
  write_json(path, json{{"stride", stride}, {"references", list}});
}

std::filesystem::path prototype_meta_path(const std::filesystem::path& tensor_path) {
  auto p = tensor_path;
  p += ".meta.json";
  return p;
}

void save_prototypes(const std::filesystem::path& tensor_path, const std::vector<Prototype>& protos) {
  if (protos.empty()) throw Error(ErrorKind::Input, "no prototypes to save");
  const std::size_t dim = protos.front().vector.size();
  std::vector<float> data;
  json cats = json::array(), sources = json::array();
  for (const auto& p : protos) {
    if (p.vector.size() != dim) throw Error(ErrorKind::Shape, "prototypes differ in dimension");
    data.insert(data.end(), p.vector.begin(), p.vector.end());
    cats.push_back(p.category_id);
    sources.push_back(p.source_ref);
  }
  write_tensor(tensor_path, Tensor::f32({protos.size(), dim}, std::move(data)));
  write_json(prototype_meta_path(tensor_path), json{{"category_ids", cats}, {"source_refs", sources}});
}

std::vector<Prototype> load_prototypes(const std::filesystem::path& tensor_path,
                                       const std::optional<std::filesystem::path>& meta_path) {
  const Tensor t = read_tensor(tensor_path);
  if (t.dtype() != DType::F32 || t.ndim() != 2) {
    throw Error(ErrorKind::Validation, tensor_path.string() + ": prototypes must be f32 [P, D]");
  }
  const json meta = read_json(meta_path.value_or(prototype_meta_path(tensor_path)));
  std::vector<std::int64_t> cats;
  std::vector<std::size_t> sources;
  try {
    cats = meta.at("category_ids").get<std::vector<std::int64_t>>();
    if (meta.contains("source_refs")) sources = meta["source_refs"].get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("prototype metadata: ") + e.what());
  }
  const std::size_t P = t.dim(0), D = t.dim(1);
  if (cats.size() != P) {
    throw Error(ErrorKind::Validation, "prototype metadata lists " + std::to_string(cats.size()) +
                                           " categories for " + std::to_string(P) + " vectors");
  }
  std::vector<Prototype> out(P);
  for (std::size_t i = 0; i < P; ++i) {
    const auto row = t.f32().subspan(i * D, D);
    out[i] = Prototype{cats[i], std::vector<float>(row.begin(), row.end()), i < sources.size() ? sources[i] : i};
  }
  return out;
}

void save_proposals(const std::filesystem::path& path, const std::vector<Proposal>& proposals) {
  std::vector<Detection> dets;
  dets.reserve(proposals.size());
  for (const auto& p : proposals) {
    dets.push_back(Detection{p.image_id, 0, p.objectness, p.box, p.mask, p.feature});
  }
  save_detections(path, dets);
}

std::vector<Proposal> load_proposals(const std::filesystem::path& path) {
  std::vector<Proposal> out;
  for (const auto& d : load_detections(path)) out.push_back(proposal_from_detection(d));
  return out;
}

json points_to_json(std::uint32_t width, std::uint32_t height, std::uint32_t points_per_side,
                    const std::vector<Point>& points) {
  json pts = json::array();
  for (const auto& p : points) pts.push_back({p.x, p.y});
  return json{{"width", width}, {"height", height}, {"points_per_side", points_per_side}, {"points", pts}};
}

}  // namespace semprobe::match
