#pragma once

// Stateful building blocks: each layer caches what its backward pass needs,
// accumulates parameter gradients into its Param::grad buffers, and returns
// the gradient with respect to its input.

#include <random>
#include <string>
#include <vector>

#include "lsc/nn/ops.hpp"

namespace lsc::nn {

template <class T>
struct ParamSet {
  std::vector<NamedParam<T>> trainable;
  std::vector<NamedParam<T>> buffers;  // batch-norm running statistics
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)); biases zero.
template <class T>
void init_conv(ConvParams<T>& p, std::mt19937_64& rng);

template <class T>
class Conv {
 public:
  Conv() = default;
  explicit Conv(const ConvGeometry& g, bool transposed = false) : params(g, transposed), transposed_(transposed) {}

  Tensor4<T> forward(const Tensor4<T>& x);
  Tensor4<T> backward(const Tensor4<T>& grad_out);
  void collect(const std::string& prefix, ParamSet<T>& set);
  void init(std::mt19937_64& rng) { init_conv(params, rng); }

  ConvParams<T> params;

 private:
  bool transposed_ = false;
  Tensor4<T> input_;
};

/// Convolution followed by batch normalization and ReLU.
template <class T>
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  explicit ConvBnRelu(const ConvGeometry& g) : conv(g), bn(g.out_ch) {}

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode);
  Tensor4<T> backward(const Tensor4<T>& grad_out);
  void collect(const std::string& prefix, ParamSet<T>& set);
  void init(std::mt19937_64& rng) { conv.init(rng); }

  Conv<T> conv;
  BatchNormParams<T> bn;

 private:
  BatchNormCache<T> bn_cache_;
  Tensor4<T> output_;
};

/// `layers` ConvBnRelu(3^3) stages each adding `growth` channels by
/// concatenation, then a 1^3 ConvBnRelu down to `out_channels`.
template <class T>
class DenseBlock {
 public:
  DenseBlock() = default;
  DenseBlock(int in_channels, int growth, int layers, int out_channels);

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode);
  Tensor4<T> backward(const Tensor4<T>& grad_out);
  void collect(const std::string& prefix, ParamSet<T>& set);
  void init(std::mt19937_64& rng);

  /// Channel count entering the reduction convolution.
  int concat_channels() const { return in_channels_ + growth_ * static_cast<int>(layers.size()); }

  std::vector<ConvBnRelu<T>> layers;
  ConvBnRelu<T> reduce;

 private:
  int in_channels_ = 0;
  int growth_ = 0;
  std::vector<int> feature_channels_;
};

/// Three parallel 3^3 ConvBnRelu branches with dilation and padding 1, 2, 3,
/// concatenated and reduced by a 1^3 ConvBnRelu.
template <class T>
class DilatedConvModule {
 public:
  DilatedConvModule() = default;
  DilatedConvModule(int in_channels, int branch_channels, int out_channels);

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode);
  Tensor4<T> backward(const Tensor4<T>& grad_out);
  void collect(const std::string& prefix, ParamSet<T>& set);
  void init(std::mt19937_64& rng);

  std::vector<ConvBnRelu<T>> branches;
  ConvBnRelu<T> reduce;
};

/// 2^3 max, 2^3 average, 3^3 max (pad 1), 3^3 average (pad 1), all stride 2,
/// concatenated and reduced by a 1^3 convolution to the input channel count.
template <class T>
class MultiPoolModule {
 public:
  static constexpr PoolGeometry kSmall{2, 2, 0};
  static constexpr PoolGeometry kLarge{3, 2, 1};

  MultiPoolModule() = default;
  explicit MultiPoolModule(int channels);

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode);
  Tensor4<T> backward(const Tensor4<T>& grad_out);
  void collect(const std::string& prefix, ParamSet<T>& set);
  void init(std::mt19937_64& rng) { reduce.init(rng); }

  /// Branch outputs before concatenation, in the order listed above.
  std::vector<Tensor4<T>> branch_outputs(const Tensor4<T>& x) const;

  Conv<T> reduce;

 private:
  Shape4 input_shape_;
  std::vector<std::vector<std::int32_t>> argmax_;
};

}  // namespace lsc::nn
