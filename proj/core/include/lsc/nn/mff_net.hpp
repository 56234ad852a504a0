#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsc/nn/layers.hpp"

namespace lsc::nn {

struct NetworkConfig {
  int in_channels = 1;
  int stem_channels = 8;    // C0
  int growth = 8;           // g
  int dense_layers = 4;
  int c1 = 16;              // after the first dense block, full resolution
  int c2 = 32;              // after the second dense block, half resolution
  int c3 = 64;              // dilated module output, quarter resolution
  std::vector<double> lambda{0.5, 0.25};  // aux head weights: quarter-resolution head, half-resolution head

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  /// Number of deep-supervision heads produced by the network.
  static constexpr int kAuxHeads = 2;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

template <class T>
struct MffOutput {
  Tensor4<T> main;
  std::vector<Tensor4<T>> aux;
};

/// Encoder: stem, dense block, multi-pool, dense block, multi-pool, dilated
/// module. Decoder: two transposed-conv upsamplings each followed by a skip
/// concatenation and a 3^3 ConvBnRelu, then a 1^3 head and sigmoid.
/// Aux heads: 1^3 projection of the dilated-module output upsampled twice, and
/// of the first decoder stage upsampled once, each followed by a sigmoid.
///
/// Spatial dims of the input must be divisible by 4.
template <class T>
class MffNet {
 public:
  explicit MffNet(NetworkConfig config = {}, std::uint64_t seed = 0);

  const NetworkConfig& config() const { return config_; }

  MffOutput<T> forward(const Tensor4<T>& x, Mode mode);

  /// Gradients of the loss with respect to the sigmoid outputs of the last
  /// forward. Accumulates into parameter gradients and returns the input gradient.
  Tensor4<T> backward(const Tensor4<T>& grad_main, const std::vector<Tensor4<T>>& grad_aux);

  /// Stable order; names are unique.
  std::vector<NamedParam<T>> parameters();
  std::vector<NamedParam<T>> buffers();
  std::size_t parameter_count();
  void zero_grad();

  /// Re-draws every weight from `seed`; biases and batch-norm state reset.
  void initialize(std::uint64_t seed);

  /// Intermediate activation shapes of the last forward, for inspection.
  struct Trace {
    Shape4 db1, mp1, db2, mp2, dcm, up1, dec1, up2, dec2;
  };
  const Trace& trace() const { return trace_; }

 private:
  ParamSet<T> collect();

  NetworkConfig config_;
  ConvBnRelu<T> stem_;
  DenseBlock<T> db1_;
  MultiPoolModule<T> mp1_;
  DenseBlock<T> db2_;
  MultiPoolModule<T> mp2_;
  DilatedConvModule<T> dcm_;
  Conv<T> up1_;
  ConvBnRelu<T> dec1_;
  Conv<T> up2_;
  ConvBnRelu<T> dec2_;
  Conv<T> head_;
  Conv<T> aux_a_proj_;
  Conv<T> aux_a_up1_;
  Conv<T> aux_a_up2_;
  Conv<T> aux_b_proj_;
  Conv<T> aux_b_up_;

  bool has_forward_ = false;
  Trace trace_;
  Tensor4<T> main_out_;
  std::vector<Tensor4<T>> aux_out_;
};

}  // namespace lsc::nn
