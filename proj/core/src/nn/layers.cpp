#include "lsc/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace lsc::nn {
namespace {

template <class T>
void add_into(std::vector<T>& acc, const std::vector<T>& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

}  // namespace

template <class T>
void init_conv(ConvParams<T>& p, std::mt19937_64& rng) {
  const int k3 = p.geom.kernel * p.geom.kernel * p.geom.kernel;
  const double fan_in = double(p.geom.in_ch) * k3;
  const double fan_out = double(p.geom.out_ch) * k3;
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& w : p.weight.value) w = T(dist(rng));
  std::fill(p.bias.value.begin(), p.bias.value.end(), T(0));
}

// ---- Conv ----

template <class T>
Tensor4<T> Conv<T>::forward(const Tensor4<T>& x) {
  input_ = x;
  return transposed_ ? conv_transpose3d_forward(x, params) : conv3d_forward(x, params);
}

template <class T>
Tensor4<T> Conv<T>::backward(const Tensor4<T>& grad_out) {
  if (input_.size() == 0) throw std::logic_error("Conv::backward called before forward");
  ConvGrads<T> g = transposed_ ? conv_transpose3d_backward(input_, params, grad_out)
                               : conv3d_backward(input_, params, grad_out);
  add_into(params.weight.grad, g.grad_weight);
  add_into(params.bias.grad, g.grad_bias);
  return std::move(g.grad_x);
}

template <class T>
void Conv<T>::collect(const std::string& prefix, ParamSet<T>& set) {
  set.trainable.push_back({prefix + ".weight", &params.weight});
  set.trainable.push_back({prefix + ".bias", &params.bias});
}

// ---- ConvBnRelu ----

template <class T>
Tensor4<T> ConvBnRelu<T>::forward(const Tensor4<T>& x, Mode mode) {
  Tensor4<T> y = conv.forward(x);
  y = batch_norm_forward(y, bn, mode, &bn_cache_);
  output_ = relu_forward(y);
  return output_;
}

template <class T>
Tensor4<T> ConvBnRelu<T>::backward(const Tensor4<T>& grad_out) {
  Tensor4<T> g = relu_backward(output_, grad_out);
  BatchNormGrads<T> bg = batch_norm_backward(bn_cache_, bn, g);
  add_into(bn.gamma.grad, bg.grad_gamma);
  add_into(bn.beta.grad, bg.grad_beta);
  return conv.backward(bg.grad_x);
}

template <class T>
void ConvBnRelu<T>::collect(const std::string& prefix, ParamSet<T>& set) {
  conv.collect(prefix + ".conv", set);
  set.trainable.push_back({prefix + ".bn.gamma", &bn.gamma});
  set.trainable.push_back({prefix + ".bn.beta", &bn.beta});
  set.buffers.push_back({prefix + ".bn.running_mean", &bn.running_mean});
  set.buffers.push_back({prefix + ".bn.running_var", &bn.running_var});
}

// ---- DenseBlock ----

template <class T>
DenseBlock<T>::DenseBlock(int in_channels, int growth, int n_layers, int out_channels)
    : in_channels_(in_channels), growth_(growth) {
  for (int i = 0; i < n_layers; ++i) {
    ConvGeometry g{in_channels + i * growth, growth, 3, 1, 1, {1, 1, 1}};
    layers.emplace_back(g);
  }
  reduce = ConvBnRelu<T>(ConvGeometry{concat_channels(), out_channels, 1, 1, 1, {0, 0, 0}});
}

template <class T>
Tensor4<T> DenseBlock<T>::forward(const Tensor4<T>& x, Mode mode) {
  if (x.shape().c != in_channels_) {
    throw std::invalid_argument("DenseBlock: input has " + std::to_string(x.shape().c) +
                                " channels, expected " + std::to_string(in_channels_));
  }
  feature_channels_.clear();
  Tensor4<T> features = x;
  for (auto& layer : layers) {
    feature_channels_.push_back(features.shape().c);
    Tensor4<T> y = layer.forward(features, mode);
    features = nn::concat_channels<T>({&features, &y});
  }
  return reduce.forward(features, mode);
}

template <class T>
Tensor4<T> DenseBlock<T>::backward(const Tensor4<T>& grad_out) {
  Tensor4<T> g = reduce.backward(grad_out);
  for (std::size_t i = layers.size(); i-- > 0;) {
    auto parts = split_channels(g, {feature_channels_[i], growth_});
    accumulate(parts[0], layers[i].backward(parts[1]));
    g = std::move(parts[0]);
  }
  return g;
}

template <class T>
void DenseBlock<T>::collect(const std::string& prefix, ParamSet<T>& set) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(prefix + ".layer" + std::to_string(i), set);
  }
  reduce.collect(prefix + ".reduce", set);
}

template <class T>
void DenseBlock<T>::init(std::mt19937_64& rng) {
  for (auto& l : layers) l.init(rng);
  reduce.init(rng);
}

// ---- DilatedConvModule ----

template <class T>
DilatedConvModule<T>::DilatedConvModule(int in_channels, int branch_channels, int out_channels) {
  for (int d = 1; d <= 3; ++d) {
    branches.emplace_back(ConvGeometry{in_channels, branch_channels, 3, d, 1, {d, d, d}});
  }
  reduce = ConvBnRelu<T>(ConvGeometry{3 * branch_channels, out_channels, 1, 1, 1, {0, 0, 0}});
}

template <class T>
Tensor4<T> DilatedConvModule<T>::forward(const Tensor4<T>& x, Mode mode) {
  std::vector<Tensor4<T>> outs;
  for (auto& b : branches) outs.push_back(b.forward(x, mode));
  return reduce.forward(concat_channels<T>({&outs[0], &outs[1], &outs[2]}), mode);
}

template <class T>
Tensor4<T> DilatedConvModule<T>::backward(const Tensor4<T>& grad_out) {
  const Tensor4<T> g = reduce.backward(grad_out);
  std::vector<int> sizes;
  for (auto& b : branches) sizes.push_back(b.conv.params.geom.out_ch);
  auto parts = split_channels(g, sizes);
  Tensor4<T> gx = branches[0].backward(parts[0]);
  for (std::size_t i = 1; i < branches.size(); ++i) accumulate(gx, branches[i].backward(parts[i]));
  return gx;
}

template <class T>
void DilatedConvModule<T>::collect(const std::string& prefix, ParamSet<T>& set) {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    branches[i].collect(prefix + ".dilation" + std::to_string(i + 1), set);
  }
  reduce.collect(prefix + ".reduce", set);
}

template <class T>
void DilatedConvModule<T>::init(std::mt19937_64& rng) {
  for (auto& b : branches) b.init(rng);
  reduce.init(rng);
}

// ---- MultiPoolModule ----

namespace {

struct Branch {
  PoolKind kind;
  PoolGeometry geom;
};

constexpr Branch kBranches[4] = {
    {PoolKind::Max, {2, 2, 0}},
    {PoolKind::Average, {2, 2, 0}},
    {PoolKind::Max, {3, 2, 1}},
    {PoolKind::Average, {3, 2, 1}},
};

}  // namespace

template <class T>
MultiPoolModule<T>::MultiPoolModule(int channels)
    : reduce(ConvGeometry{4 * channels, channels, 1, 1, 1, {0, 0, 0}}) {}

template <class T>
std::vector<Tensor4<T>> MultiPoolModule<T>::branch_outputs(const Tensor4<T>& x) const {
  const Shape4& s = x.shape();
  if (s.d % 2 || s.h % 2 || s.w % 2) {
    throw std::invalid_argument("MultiPoolModule: spatial dims must be even, got " + s.str());
  }
  std::vector<Tensor4<T>> outs;
  for (const auto& b : kBranches) outs.push_back(pool3d_forward(x, b.kind, b.geom).out);
  return outs;
}

template <class T>
Tensor4<T> MultiPoolModule<T>::forward(const Tensor4<T>& x, Mode) {
  const Shape4& s = x.shape();
  if (s.d % 2 || s.h % 2 || s.w % 2) {
    throw std::invalid_argument("MultiPoolModule: spatial dims must be even, got " + s.str());
  }
  input_shape_ = s;
  argmax_.clear();
  std::vector<Tensor4<T>> outs;
  for (const auto& b : kBranches) {
    PoolResult<T> r = pool3d_forward(x, b.kind, b.geom);
    argmax_.push_back(std::move(r.argmax));
    outs.push_back(std::move(r.out));
  }
  return reduce.forward(concat_channels<T>({&outs[0], &outs[1], &outs[2], &outs[3]}));
}

template <class T>
Tensor4<T> MultiPoolModule<T>::backward(const Tensor4<T>& grad_out) {
  const Tensor4<T> g = reduce.backward(grad_out);
  const int c = input_shape_.c;
  auto parts = split_channels(g, {c, c, c, c});
  Tensor4<T> gx(input_shape_);
  for (int i = 0; i < 4; ++i) {
    accumulate(gx, pool3d_backward(input_shape_, kBranches[i].kind, kBranches[i].geom, argmax_[std::size_t(i)],
                                   parts[std::size_t(i)]));
  }
  return gx;
}

template <class T>
void MultiPoolModule<T>::collect(const std::string& prefix, ParamSet<T>& set) {
  reduce.collect(prefix + ".reduce", set);
}

#define LSC_INSTANTIATE(T)                                          \
  template void init_conv(ConvParams<T>&, std::mt19937_64&);        \
  template class Conv<T>;                                           \
  template class ConvBnRelu<T>;                                     \
  template class DenseBlock<T>;                                     \
  template class DilatedConvModule<T>;                              \
  template class MultiPoolModule<T>;

LSC_INSTANTIATE(float)
LSC_INSTANTIATE(double)
#undef LSC_INSTANTIATE

}  // namespace lsc::nn
