#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vidfill/common.hpp"

namespace vidfill {

// Dense row-major tensor. Shapes follow the channels-first convention used
// throughout: frames are {C,H,W}, batches {N,C,H,W}, volumes {C,D,H,W},
// flow fields {2,H,W} with channel 0 = horizontal (u) and 1 = vertical (v).
template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape, T value = T(0))
      : shape_(std::move(shape)), data_(checked_numel(shape_), value) {}

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, T value) { return Tensor(std::move(shape), value); }

  bool empty() const { return data_.empty(); }
  int rank() const { return int(shape_.size()); }
  int dim(int i) const { return shape_[std::size_t(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::int64_t numel() const { return std::int64_t(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::int64_t i) { return data_[std::size_t(i)]; }
  const T& operator[](std::int64_t i) const { return data_[std::size_t(i)]; }

  T& at(int a, int b) { return data_[std::size_t(a) * shape_[1] + b]; }
  const T& at(int a, int b) const { return data_[std::size_t(a) * shape_[1] + b]; }

  T& at(int a, int b, int c) {
    return data_[(std::size_t(a) * shape_[1] + b) * shape_[2] + c];
  }
  const T& at(int a, int b, int c) const {
    return data_[(std::size_t(a) * shape_[1] + b) * shape_[2] + c];
  }

  T& at(int a, int b, int c, int d) {
    return data_[((std::size_t(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  const T& at(int a, int b, int c, int d) const {
    return data_[((std::size_t(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  T& at(int a, int b, int c, int d, int e) {
    return data_[(((std::size_t(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d) * shape_[4] + e];
  }
  const T& at(int a, int b, int c, int d, int e) const {
    return data_[(((std::size_t(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d) * shape_[4] + e];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::int64_t i = 0; i < numel(); ++i) out[i] = U(data_[std::size_t(i)]);
    return out;
  }

 private:
  static std::size_t checked_numel(const std::vector<int>& shape) {
    if (shape.empty()) fail("tensor shape must have at least one dimension");
    std::size_t n = 1;
    for (int d : shape) {
      if (d <= 0) fail("tensor dimensions must be positive");
      n *= std::size_t(d);
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<T> data_;
};

template <class T>
std::string shape_str(const Tensor<T>& t) {
  std::string s = "{";
  for (int i = 0; i < t.rank(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.dim(i));
  }
  return s + "}";
}

template <class T>
bool all_finite(const Tensor<T>& t) {
  for (std::int64_t i = 0; i < t.numel(); ++i)
    if (!std::isfinite(double(t[i]))) return false;
  return true;
}

template <class T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.same_shape(b), "shape mismatch");
  T m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace vidfill
