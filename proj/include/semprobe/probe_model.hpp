#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace semprobe {

// Linear classifier on frozen features: logits = W x + b.
struct ProbeModel {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<float> weights;  // [num_classes, dim] row-major
  std::vector<float> bias;     // [num_classes]

  static ProbeModel zeros(std::size_t num_classes, std::size_t dim) {
    return ProbeModel{num_classes, dim, std::vector<float>(num_classes * dim, 0.0f),
                      std::vector<float>(num_classes, 0.0f)};
  }

  std::span<const float> weight_row(std::size_t c) const {
    return std::span<const float>(weights).subspan(c * dim, dim);
  }

  friend bool operator==(const ProbeModel&, const ProbeModel&) = default;
};

}  // namespace semprobe
