#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semprobe {

enum class DType : std::uint8_t { F32 = 1, I64 = 2 };

const char* to_string(DType dtype) noexcept;

// Dense row-major tensor holding either f32 or i64 values.
class Tensor {
 public:
  Tensor() = default;

  static Tensor f32(std::vector<std::uint64_t> shape, std::vector<float> data);
  static Tensor i64(std::vector<std::uint64_t> shape, std::vector<std::int64_t> data);

  DType dtype() const noexcept { return dtype_; }
  const std::vector<std::uint64_t>& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::uint64_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept;

  std::span<const float> f32() const;
  std::span<float> f32();
  std::span<const std::int64_t> i64() const;
  std::span<std::int64_t> i64();

  // Bitwise equality of dtype, shape and payload.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  DType dtype_ = DType::F32;
  std::vector<std::uint64_t> shape_;
  std::vector<float> f32_;
  std::vector<std::int64_t> i64_;
};

// N x D per-image global features plus one identifier per row.
struct FeatureMatrix {
  Tensor features;  // f32 [N, D]
  std::vector<std::int64_t> ids;

  static FeatureMatrix from_rows(std::size_t rows, std::size_t cols, std::vector<float> data,
                                 std::vector<std::int64_t> ids = {});

  std::size_t rows() const { return static_cast<std::size_t>(features.dim(0)); }
  std::size_t cols() const { return static_cast<std::size_t>(features.dim(1)); }
  std::span<const float> row(std::size_t i) const {
    return features.f32().subspan(i * cols(), cols());
  }

  // Throws Validation when ids mismatch/repeat or any value is non-finite.
  void validate() const;
};

struct LabelVector {
  std::vector<std::int64_t> labels;
  std::int64_t num_classes = 0;

  // Infers num_classes as max label + 1.
  static LabelVector from_tensor(const Tensor& t, std::int64_t num_classes = 0);
  Tensor to_tensor() const;
  void validate() const;
};

struct DenseMapMeta {
  std::int64_t image_id = 0;
  std::uint32_t stride = 1;
  std::uint32_t width = 0;   // image width in px
  std::uint32_t height = 0;  // image height in px
};

// Hp x Wp x D patch-feature grid for one image.
struct DenseFeatureMap {
  Tensor grid;  // f32 [Hp, Wp, D]
  DenseMapMeta meta;

  std::size_t grid_height() const { return static_cast<std::size_t>(grid.dim(0)); }
  std::size_t grid_width() const { return static_cast<std::size_t>(grid.dim(1)); }
  std::size_t dim() const { return static_cast<std::size_t>(grid.dim(2)); }
  std::span<const float> patch(std::size_t py, std::size_t px) const {
    return grid.f32().subspan((py * grid_width() + px) * dim(), dim());
  }
};

}  // namespace semprobe
