#include "semprobe/annotations.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "semprobe/error.hpp"

namespace semprobe {

const ImageInfo* AnnotationSet::find_image(std::int64_t id) const {
  auto it = std::find_if(images.begin(), images.end(), [&](const ImageInfo& im) { return im.id == id; });
  return it == images.end() ? nullptr : &*it;
}

bool AnnotationSet::has_category(std::int64_t id) const {
  return std::any_of(categories.begin(), categories.end(), [&](const Category& c) { return c.id == id; });
}

void AnnotationSet::validate() const {
  std::unordered_set<std::int64_t> image_ids;
  for (const auto& im : images) {
    if (!image_ids.insert(im.id).second) {
      throw Error(ErrorKind::Validation, "duplicate image id " + std::to_string(im.id));
    }
  }
  std::unordered_set<std::int64_t> category_ids;
  for (const auto& c : categories) {
    if (!category_ids.insert(c.id).second) {
      throw Error(ErrorKind::Validation, "duplicate category id " + std::to_string(c.id));
    }
  }

  std::vector<std::int64_t> dangling, unknown_category, bad_mask;
  for (const auto& a : annotations) {
    const ImageInfo* im = find_image(a.image_id);
    if (im == nullptr) {
      dangling.push_back(a.id);
      continue;
    }
    if (!category_ids.count(a.category_id)) unknown_category.push_back(a.id);
    if (a.segmentation && (a.segmentation->height != im->height || a.segmentation->width != im->width)) {
      bad_mask.push_back(a.id);
    }
  }
  auto list = [](const std::vector<std::int64_t>& ids) {
    std::ostringstream os;
    for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? ", " : "") << ids[i];
    return os.str();
  };
  if (!dangling.empty()) {
    throw Error(ErrorKind::Validation, "annotations reference unknown image ids: annotation ids [" +
                                           list(dangling) + "]");
  }
  if (!unknown_category.empty()) {
    throw Error(ErrorKind::Validation, "annotations reference unknown category ids: annotation ids [" +
                                           list(unknown_category) + "]");
  }
  if (!bad_mask.empty()) {
    throw Error(ErrorKind::Validation,
                "segmentation size differs from image size: annotation ids [" + list(bad_mask) + "]");
  }
}

}  // namespace semprobe
