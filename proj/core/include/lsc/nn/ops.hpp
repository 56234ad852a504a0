#pragma once

// Primitive 3D operators with analytic backward passes. Each forward is a pure
// function of its inputs; each backward returns fresh gradient buffers and
// never accumulates into shared state.

#include <array>
#include <cstdint>
#include <vector>

#include "lsc/nn/tensor.hpp"

namespace lsc::nn {

enum class Mode { Train, Infer };

struct ConvGeometry {
  int in_ch = 1;
  int out_ch = 1;
  int kernel = 3;
  int dilation = 1;
  int stride = 1;
  std::array<int, 3> pad{0, 0, 0};  // z, y, x
};

/// Convolution weights (out, in, k, k, k) and bias (out).
///
/// For transposed convolutions the weight layout is (in, out, k, k, k), which
/// is the weight of the strided convolution it is the adjoint of.
template <class T>
struct ConvParams {
  ConvGeometry geom;
  Param<T> weight;
  Param<T> bias;

  ConvParams() = default;
  explicit ConvParams(const ConvGeometry& g, bool transposed = false);
};

template <class T>
struct ConvGrads {
  Tensor4<T> grad_x;
  std::vector<T> grad_weight;
  std::vector<T> grad_bias;
};

/// (in + 2 pad - dilation (k - 1) - 1) / stride + 1 per axis; throws unless the division is exact.
Shape4 conv3d_output_shape(const Shape4& in, const ConvGeometry& g);

/// Dilated cross-correlation plus bias.
template <class T>
Tensor4<T> conv3d_forward(const Tensor4<T>& x, const ConvParams<T>& p);

template <class T>
ConvGrads<T> conv3d_backward(const Tensor4<T>& x, const ConvParams<T>& p,
                             const Tensor4<T>& grad_out);

/// Transposed 2^3 convolution with stride 2: spatial dims double.
template <class T>
Tensor4<T> conv_transpose3d_forward(const Tensor4<T>& x, const ConvParams<T>& p);

template <class T>
ConvGrads<T> conv_transpose3d_backward(const Tensor4<T>& x, const ConvParams<T>& p,
                                       const Tensor4<T>& grad_out);

enum class PoolKind { Max, Average };

struct PoolGeometry {
  int kernel = 2;
  int stride = 2;
  int pad = 0;
};

/// floor((in + 2 pad - k) / stride) + 1 per axis.
Shape4 pool3d_output_shape(const Shape4& in, const PoolGeometry& g);

template <class T>
struct PoolResult {
  Tensor4<T> out;
  std::vector<std::int32_t> argmax;  // per output element, max pooling only
};

/// Padding never contributes: max ignores it and average divides by the
/// number of in-bounds taps.
template <class T>
PoolResult<T> pool3d_forward(const Tensor4<T>& x, PoolKind kind, const PoolGeometry& g);

template <class T>
Tensor4<T> pool3d_backward(const Shape4& in_shape, PoolKind kind, const PoolGeometry& g,
                           const std::vector<std::int32_t>& argmax, const Tensor4<T>& grad_out);

template <class T>
struct BatchNormParams {
  Param<T> gamma;
  Param<T> beta;
  Param<T> running_mean;
  Param<T> running_var;
  double eps = 1e-5;
  double momentum = 0.9;  // running <- momentum * running + (1 - momentum) * batch

  BatchNormParams() = default;
  explicit BatchNormParams(int channels);
};

template <class T>
struct BatchNormCache {
  Mode mode = Mode::Train;
  Tensor4<T> xhat;
  std::vector<T> inv_std;
};

template <class T>
struct BatchNormGrads {
  Tensor4<T> grad_x;
  std::vector<T> grad_gamma;
  std::vector<T> grad_beta;
};

/// Per-channel (x - mean) / sqrt(var + eps) * gamma + beta. Train mode uses the
/// statistics over spatial positions and updates the running estimates.
template <class T>
Tensor4<T> batch_norm_forward(const Tensor4<T>& x, BatchNormParams<T>& p, Mode mode,
                              BatchNormCache<T>* cache = nullptr);

template <class T>
BatchNormGrads<T> batch_norm_backward(const BatchNormCache<T>& cache,
                                      const BatchNormParams<T>& p, const Tensor4<T>& grad_out);

template <class T>
Tensor4<T> relu_forward(const Tensor4<T>& x);

/// Gradient through ReLU given its output.
template <class T>
Tensor4<T> relu_backward(const Tensor4<T>& y, const Tensor4<T>& grad_out);

template <class T>
Tensor4<T> sigmoid_forward(const Tensor4<T>& x);

/// Gradient through the logistic function given its output.
template <class T>
Tensor4<T> sigmoid_backward(const Tensor4<T>& y, const Tensor4<T>& grad_out);

}  // namespace lsc::nn
