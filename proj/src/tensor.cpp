#include "semprobe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "semprobe/error.hpp"

namespace semprobe {
namespace {

std::size_t checked_numel(const std::vector<std::uint64_t>& shape) {
  if (shape.empty()) throw Error(ErrorKind::Shape, "tensor must have at least one dimension");
  std::size_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw Error(ErrorKind::Shape, "tensor dimensions must be >= 1");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const std::vector<std::uint64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

}  // namespace

const char* to_string(DType dtype) noexcept {
  return dtype == DType::F32 ? "f32" : "i64";
}

Tensor Tensor::f32(std::vector<std::uint64_t> shape, std::vector<float> data) {
  const std::size_t n = checked_numel(shape);
  if (n != data.size()) {
    throw Error(ErrorKind::Shape, "shape " + shape_string(shape) + " needs " + std::to_string(n) +
                                      " elements, got " + std::to_string(data.size()));
  }
  Tensor t;
  t.dtype_ = DType::F32;
  t.shape_ = std::move(shape);
  t.f32_ = std::move(data);
  return t;
}

Tensor Tensor::i64(std::vector<std::uint64_t> shape, std::vector<std::int64_t> data) {
  const std::size_t n = checked_numel(shape);
  if (n != data.size()) {
    throw Error(ErrorKind::Shape, "shape " + shape_string(shape) + " needs " + std::to_string(n) +
                                      " elements, got " + std::to_string(data.size()));
  }
  Tensor t;
  t.dtype_ = DType::I64;
  t.shape_ = std::move(shape);
  t.i64_ = std::move(data);
  return t;
}

std::uint64_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw Error(ErrorKind::Shape, "axis " + std::to_string(axis) + " out of range for tensor of rank " +
                                      std::to_string(shape_.size()));
  }
  return shape_[axis];
}

std::size_t Tensor::numel() const noexcept {
  return dtype_ == DType::F32 ? f32_.size() : i64_.size();
}

std::span<const float> Tensor::f32() const {
  if (dtype_ != DType::F32) throw Error(ErrorKind::Format, "tensor is i64, expected f32");
  return f32_;
}

std::span<float> Tensor::f32() {
  if (dtype_ != DType::F32) throw Error(ErrorKind::Format, "tensor is i64, expected f32");
  return f32_;
}

std::span<const std::int64_t> Tensor::i64() const {
  if (dtype_ != DType::I64) throw Error(ErrorKind::Format, "tensor is f32, expected i64");
  return i64_;
}

std::span<std::int64_t> Tensor::i64() {
  if (dtype_ != DType::I64) throw Error(ErrorKind::Format, "tensor is f32, expected i64");
  return i64_;
}

bool operator==(const Tensor& a, const Tensor& b) {
  if (a.dtype_ != b.dtype_ || a.shape_ != b.shape_) return false;
  if (a.dtype_ == DType::I64) return a.i64_ == b.i64_;
  return a.f32_.size() == b.f32_.size() &&
         (a.f32_.empty() ||
          std::memcmp(a.f32_.data(), b.f32_.data(), a.f32_.size() * sizeof(float)) == 0);
}

FeatureMatrix FeatureMatrix::from_rows(std::size_t rows, std::size_t cols, std::vector<float> data,
                                       std::vector<std::int64_t> ids) {
  FeatureMatrix m;
  m.features = Tensor::f32({rows, cols}, std::move(data));
  if (ids.empty()) {
    ids.resize(rows);
    std::iota(ids.begin(), ids.end(), std::int64_t{0});
  }
  m.ids = std::move(ids);
  m.validate();
  return m;
}

void FeatureMatrix::validate() const {
  if (features.dtype() != DType::F32 || features.ndim() != 2) {
    throw Error(ErrorKind::Validation, "feature matrix must be a 2-D f32 tensor");
  }
  if (ids.size() != rows()) {
    throw Error(ErrorKind::Validation, "feature matrix has " + std::to_string(rows()) + " rows but " +
                                           std::to_string(ids.size()) + " ids");
  }
  std::unordered_set<std::int64_t> seen;
  for (auto id : ids) {
    if (!seen.insert(id).second) {
      throw Error(ErrorKind::Validation, "duplicate feature id " + std::to_string(id));
    }
  }
  const auto values = features.f32();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::Validation,
                  "non-finite feature value in row " + std::to_string(i / cols()));
    }
  }
}

LabelVector LabelVector::from_tensor(const Tensor& t, std::int64_t num_classes) {
  if (t.dtype() != DType::I64 || t.ndim() != 1) {
    throw Error(ErrorKind::Validation, "labels must be a 1-D i64 tensor");
  }
  LabelVector lv;
  lv.labels.assign(t.i64().begin(), t.i64().end());
  if (num_classes <= 0 && !lv.labels.empty()) {
    num_classes = *std::max_element(lv.labels.begin(), lv.labels.end()) + 1;
  }
  lv.num_classes = num_classes;
  lv.validate();
  return lv;
}

Tensor LabelVector::to_tensor() const {
  return Tensor::i64({labels.size()}, labels);
}

void LabelVector::validate() const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw Error(ErrorKind::Range, "label " + std::to_string(labels[i]) + " at index " +
                                        std::to_string(i) + " outside [0, " +
                                        std::to_string(num_classes) + ")");
    }
  }
}

}  // namespace semprobe
