#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lsc::nn {

/// channels x depth x height x width
struct Shape4 {
  int c = 0;
  int d = 0;
  int h = 0;
  int w = 0;

  std::size_t spatial() const { return std::size_t(d) * h * w; }
  std::size_t count() const { return std::size_t(c) * spatial(); }
  std::string str() const;
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// Dense feature map with lazily allocated gradient storage of the same shape.
template <class T>
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T(0));
  Tensor4(Shape4 shape, std::vector<T> values);

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  T* channel(int c) { return values_.data() + std::size_t(c) * shape_.spatial(); }
  const T* channel(int c) const { return values_.data() + std::size_t(c) * shape_.spatial(); }

  T& at(int c, int z, int y, int x) { return values_[offset(c, z, y, x)]; }
  const T& at(int c, int z, int y, int x) const { return values_[offset(c, z, y, x)]; }

  bool has_grad() const { return !grad_.empty(); }
  /// Allocates zero-filled gradient storage on first use.
  std::span<T> grad();
  /// Empty span when no gradient has been allocated.
  std::span<const T> grad() const { return grad_; }
  void zero_grad();

 private:
  std::size_t offset(int c, int z, int y, int x) const {
    return ((std::size_t(c) * shape_.d + z) * shape_.h + y) * shape_.w + x;
  }

  Shape4 shape_;
  std::vector<T> values_;
  std::vector<T> grad_;
};

/// Trainable parameter (or persistent buffer) with its gradient accumulator.
template <class T>
struct Param {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  explicit Param(std::vector<int> s, T fill = T(0));

  std::size_t size() const { return value.size(); }
  void zero_grad();
};

template <class T>
struct NamedParam {
  std::string name;
  Param<T>* param = nullptr;
};

/// Concatenates tensors with equal spatial shape along channels.
template <class T>
Tensor4<T> concat_channels(const std::vector<const Tensor4<T>*>& parts);

/// Splits a channel-concatenated gradient back into pieces of the given channel counts.
template <class T>
std::vector<Tensor4<T>> split_channels(const Tensor4<T>& whole, const std::vector<int>& channels);

/// Elementwise accumulate: into += other.
template <class T>
void accumulate(Tensor4<T>& into, const Tensor4<T>& other);

}  // namespace lsc::nn
