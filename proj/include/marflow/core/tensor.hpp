#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "marflow/core/error.hpp"

namespace marflow {

using Index = std::int64_t;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ArrayRM = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense row-major N-d array. Image tensors use (C, H, W); a leading batch
// extent is allowed but most code works on single samples.
template <typename Scalar>
class Tensor {
 public:
  using value_type = Scalar;

  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_size(shape_)), fill) {
    for (Index d : shape_) {
      if (d < 0) throw ShapeError("negative extent in shape " + shape_string(shape_));
    }
  }
  Tensor(Shape shape, const std::vector<Scalar>& values) : shape_(std::move(shape)), data_(values.begin(), values.end()) {
    if (shape_size(shape_) != static_cast<Index>(data_.size())) {
      throw ShapeError("shape " + shape_string(shape_) + " does not match " +
                       std::to_string(data_.size()) + " values");
    }
  }

  static Tensor chw(Index c, Index h, Index w, Scalar fill = Scalar(0)) { return Tensor({c, h, w}, fill); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i < 0 ? rank() + i : i)); }
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  // (C, H, W) accessors; valid for rank-3 tensors.
  Index channels() const { return dim(-3); }
  Index height() const { return dim(-2); }
  Index width() const { return dim(-1); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }

  Scalar& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }
  Scalar& operator()(Index c, Index y, Index x) { return data_[static_cast<std::size_t>((c * height() + y) * width() + x)]; }
  Scalar operator()(Index c, Index y, Index x) const {
    return data_[static_cast<std::size_t>((c * height() + y) * width() + x)];
  }
  Scalar& at2(Index y, Index x) { return data_[static_cast<std::size_t>(y * shape_.back() + x)]; }
  Scalar at2(Index y, Index x) const { return data_[static_cast<std::size_t>(y * shape_.back() + x)]; }

  Eigen::Map<ArrayX<Scalar>> array() { return {data_.data(), size()}; }
  Eigen::Map<const ArrayX<Scalar>> array() const { return {data_.data(), size()}; }

  // Row-major matrix view with the given number of rows.
  Eigen::Map<MatrixRM<Scalar>> matrix(Index rows) { return {data_.data(), rows, size() / rows}; }
  Eigen::Map<const MatrixRM<Scalar>> matrix(Index rows) const { return {data_.data(), rows, size() / rows}; }

  // Channel-major (C, H*W) view of a (C, H, W) tensor.
  Eigen::Map<MatrixRM<Scalar>> channel_matrix() { return matrix(channels()); }
  Eigen::Map<const MatrixRM<Scalar>> channel_matrix() const { return matrix(channels()); }

  // 2-D image view of channel c.
  Eigen::Map<ArrayRM<Scalar>> plane(Index c) {
    return {data_.data() + c * height() * width(), height(), width()};
  }
  Eigen::Map<const ArrayRM<Scalar>> plane(Index c) const {
    return {data_.data() + c * height() * width(), height(), width()};
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    Tensor out = *this;
    out.shape_ = std::move(shape);
    return out;
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    std::copy(data_.begin(), data_.end(), out.data());
    return out;
  }

  bool all_finite() const { return array().allFinite(); }
  Scalar sum() const { return array().sum(); }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_;
  // Fixed alignment keeps Eigen's kernels, and so the rounding, identical
  // from one allocation to the next.
  std::vector<Scalar, Eigen::aligned_allocator<Scalar>> data_;
};

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace marflow
