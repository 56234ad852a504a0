#include "lsc/nn/mff_net.hpp"

#include <stdexcept>

namespace lsc::nn {

void NetworkConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw std::invalid_argument(std::string("network config: ") + name + " must be positive");
  };
  positive(in_channels, "in_channels");
  positive(stem_channels, "stem_channels");
  positive(growth, "growth");
  positive(dense_layers, "dense_layers");
  positive(c1, "c1");
  positive(c2, "c2");
  positive(c3, "c3");
  if (lambda.size() != std::size_t(kAuxHeads)) {
    throw std::invalid_argument("network config: lambda needs " + std::to_string(kAuxHeads) + " values");
  }
  for (double l : lambda) {
    if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("network config: lambda must lie in [0, 1]");
  }
}

namespace {

ConvGeometry cube3(int in, int out) { return {in, out, 3, 1, 1, {1, 1, 1}}; }
ConvGeometry point(int in, int out) { return {in, out, 1, 1, 1, {0, 0, 0}}; }
ConvGeometry up2x(int in, int out) { return {in, out, 2, 1, 2, {0, 0, 0}}; }

}  // namespace

template <class T>
MffNet<T>::MffNet(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  initialize(seed);
}

template <class T>
void MffNet<T>::initialize(std::uint64_t seed) {
  const NetworkConfig& c = config_;
  stem_ = ConvBnRelu<T>(cube3(c.in_channels, c.stem_channels));
  db1_ = DenseBlock<T>(c.stem_channels, c.growth, c.dense_layers, c.c1);
  mp1_ = MultiPoolModule<T>(c.c1);
  db2_ = DenseBlock<T>(c.c1, c.growth, c.dense_layers, c.c2);
  mp2_ = MultiPoolModule<T>(c.c2);
  dcm_ = DilatedConvModule<T>(c.c2, c.c2, c.c3);
  up1_ = Conv<T>(up2x(c.c3, c.c2), true);
  dec1_ = ConvBnRelu<T>(cube3(2 * c.c2, c.c2));
  up2_ = Conv<T>(up2x(c.c2, c.c1), true);
  dec2_ = ConvBnRelu<T>(cube3(2 * c.c1, c.c1));
  head_ = Conv<T>(point(c.c1, 1));
  aux_a_proj_ = Conv<T>(point(c.c3, 1));
  aux_a_up1_ = Conv<T>(up2x(1, 1), true);
  aux_a_up2_ = Conv<T>(up2x(1, 1), true);
  aux_b_proj_ = Conv<T>(point(c.c2, 1));
  aux_b_up_ = Conv<T>(up2x(1, 1), true);

  std::mt19937_64 rng(seed);
  stem_.init(rng);
  db1_.init(rng);
  mp1_.init(rng);
  db2_.init(rng);
  mp2_.init(rng);
  dcm_.init(rng);
  up1_.init(rng);
  dec1_.init(rng);
  up2_.init(rng);
  dec2_.init(rng);
  head_.init(rng);
  aux_a_proj_.init(rng);
  aux_a_up1_.init(rng);
  aux_a_up2_.init(rng);
  aux_b_proj_.init(rng);
  aux_b_up_.init(rng);
  has_forward_ = false;
}

template <class T>
MffOutput<T> MffNet<T>::forward(const Tensor4<T>& x, Mode mode) {
  const Shape4& s = x.shape();
  if (s.c != config_.in_channels) {
    throw std::invalid_argument("MffNet: input has " + std::to_string(s.c) + " channels, expected " +
                                std::to_string(config_.in_channels));
  }
  if (s.d % 4 || s.h % 4 || s.w % 4 || s.d == 0 || s.h == 0 || s.w == 0) {
    throw std::invalid_argument("MffNet: spatial dims must be positive multiples of 4, got " + s.str());
  }
  const Tensor4<T> f0 = stem_.forward(x, mode);
  const Tensor4<T> f1 = db1_.forward(f0, mode);
  const Tensor4<T> p1 = mp1_.forward(f1, mode);
  const Tensor4<T> f2 = db2_.forward(p1, mode);
  const Tensor4<T> p2 = mp2_.forward(f2, mode);
  const Tensor4<T> f3 = dcm_.forward(p2, mode);

  const Tensor4<T> u1 = up1_.forward(f3);
  const Tensor4<T> d1 = dec1_.forward(concat_channels<T>({&u1, &f2}), mode);
  const Tensor4<T> u2 = up2_.forward(d1);
  const Tensor4<T> d2 = dec2_.forward(concat_channels<T>({&u2, &f1}), mode);

  MffOutput<T> out;
  out.main = sigmoid_forward(head_.forward(d2));
  Tensor4<T> a = aux_a_up2_.forward(aux_a_up1_.forward(aux_a_proj_.forward(f3)));
  out.aux.push_back(sigmoid_forward(a));
  Tensor4<T> b = aux_b_up_.forward(aux_b_proj_.forward(d1));
  out.aux.push_back(sigmoid_forward(b));

  trace_ = {f1.shape(), p1.shape(), f2.shape(), p2.shape(), f3.shape(),
            u1.shape(), d1.shape(), u2.shape(), d2.shape()};
  main_out_ = out.main;
  aux_out_ = out.aux;
  has_forward_ = true;
  return out;
}

template <class T>
Tensor4<T> MffNet<T>::backward(const Tensor4<T>& grad_main, const std::vector<Tensor4<T>>& grad_aux) {
  if (!has_forward_) throw std::logic_error("MffNet::backward called before forward");
  if (grad_aux.size() != aux_out_.size()) {
    throw std::invalid_argument("MffNet::backward: expected " + std::to_string(aux_out_.size()) +
                                " aux gradients, got " + std::to_string(grad_aux.size()));
  }
  const int c1 = config_.c1, c2 = config_.c2;

  // Aux heads.
  Tensor4<T> g_f3 =
      aux_a_proj_.backward(aux_a_up1_.backward(aux_a_up2_.backward(sigmoid_backward(aux_out_[0], grad_aux[0]))));
  Tensor4<T> g_d1 = aux_b_proj_.backward(aux_b_up_.backward(sigmoid_backward(aux_out_[1], grad_aux[1])));

  // Main path.
  const Tensor4<T> g_d2 = head_.backward(sigmoid_backward(main_out_, grad_main));
  auto cat2 = split_channels(dec2_.backward(g_d2), {c1, c1});
  Tensor4<T> g_f1 = std::move(cat2[1]);
  accumulate(g_d1, up2_.backward(cat2[0]));

  auto cat1 = split_channels(dec1_.backward(g_d1), {c2, c2});
  Tensor4<T> g_f2 = std::move(cat1[1]);
  accumulate(g_f3, up1_.backward(cat1[0]));

  const Tensor4<T> g_p2 = dcm_.backward(g_f3);
  accumulate(g_f2, mp2_.backward(g_p2));
  const Tensor4<T> g_p1 = db2_.backward(g_f2);
  accumulate(g_f1, mp1_.backward(g_p1));
  const Tensor4<T> g_f0 = db1_.backward(g_f1);
  return stem_.backward(g_f0);
}

template <class T>
ParamSet<T> MffNet<T>::collect() {
  ParamSet<T> set;
  stem_.collect("stem", set);
  db1_.collect("db1", set);
  mp1_.collect("mp1", set);
  db2_.collect("db2", set);
  mp2_.collect("mp2", set);
  dcm_.collect("dcm", set);
  up1_.collect("up1", set);
  dec1_.collect("dec1", set);
  up2_.collect("up2", set);
  dec2_.collect("dec2", set);
  head_.collect("head", set);
  aux_a_proj_.collect("aux_quarter.proj", set);
  aux_a_up1_.collect("aux_quarter.up1", set);
  aux_a_up2_.collect("aux_quarter.up2", set);
  aux_b_proj_.collect("aux_half.proj", set);
  aux_b_up_.collect("aux_half.up", set);
  return set;
}

template <class T>
std::vector<NamedParam<T>> MffNet<T>::parameters() {
  return collect().trainable;
}

template <class T>
std::vector<NamedParam<T>> MffNet<T>::buffers() {
  return collect().buffers;
}

template <class T>
std::size_t MffNet<T>::parameter_count() {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.param->size();
  return n;
}

template <class T>
void MffNet<T>::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

template class MffNet<float>;
template class MffNet<double>;

}  // namespace lsc::nn
