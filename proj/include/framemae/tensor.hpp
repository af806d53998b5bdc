#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "framemae/errors.hpp"

namespace framemae {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major tensor. Most of the library only uses rank 1 and rank 2.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    for (auto extent : shape_) {
      if (extent == 0) {
        throw ConfigError("tensor extents must be positive, got " +
                          shape_string(shape_));
      }
    }
  }

  BasicTensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(shape_));
    }
  }

  static BasicTensor matrix(std::size_t rows, std::size_t cols, T fill = T{0}) {
    return BasicTensor({rows, cols}, fill);
  }

  static BasicTensor from_rows(const std::vector<std::vector<T>>& rows) {
    if (rows.empty() || rows.front().empty()) {
      throw ConfigError("from_rows needs a non-empty matrix");
    }
    BasicTensor out = matrix(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != out.cols()) throw ConfigError("ragged rows");
      std::copy(rows[i].begin(), rows[i].end(), out.row(i).begin());
    }
    return out;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept {
    return shape_.size() < 2 ? (shape_.empty() ? 0 : 1) : shape_[1];
  }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * shape_[1] + j];
  }
  const T& operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * shape_[1] + j];
  }

  std::span<T> row(std::size_t i) noexcept {
    return {data_.data() + i * cols(), cols()};
  }
  std::span<const T> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols(), cols()};
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

template <typename T>
void require_shape(const BasicTensor<T>& t, const Shape& expected,
                   const char* what) {
  if (t.shape() != expected) {
    throw ConfigError(std::string(what) + ": expected shape " +
                      shape_string(expected) + ", got " +
                      shape_string(t.shape()));
  }
}

template <typename T>
void require_matrix(const BasicTensor<T>& t, const char* what) {
  if (t.rank() != 2) {
    throw ConfigError(std::string(what) + ": expected a matrix, got " +
                      shape_string(t.shape()));
  }
}

// Element-wise accumulate: dst += src.
template <typename T>
void add_into(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  if (dst.shape() != src.shape()) {
    throw ConfigError("add_into shape mismatch " + shape_string(dst.shape()) +
                      " vs " + shape_string(src.shape()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Rows of `src` selected by `indices`, in the given order.
template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& src,
                           std::span<const std::size_t> indices) {
  auto out = BasicTensor<T>::matrix(indices.size(), src.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto from = src.row(indices[i]);
    std::copy(from.begin(), from.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace framemae
