#include <cmath>
#include <stdexcept>

#include "lsc/nn/ops.hpp"

namespace lsc::nn {

template <class T>
BatchNormParams<T>::BatchNormParams(int channels)
    : gamma({channels}, T(1)),
      beta({channels}, T(0)),
      running_mean({channels}, T(0)),
      running_var({channels}, T(1)) {}

template <class T>
Tensor4<T> batch_norm_forward(const Tensor4<T>& x, BatchNormParams<T>& p, Mode mode,
                              BatchNormCache<T>* cache) {
  const Shape4& s = x.shape();
  if (std::size_t(s.c) != p.gamma.size()) {
    throw std::invalid_argument("batch_norm: channel mismatch for shape " + s.str());
  }
  const std::size_t n = s.spatial();
  Tensor4<T> y(s);
  Tensor4<T> xhat(s);
  std::vector<T> inv_std(std::size_t(s.c));
  for (int c = 0; c < s.c; ++c) {
    const T* xc = x.channel(c);
    double mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += xc[i];
      mean = sum / double(n);
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) sq += (xc[i] - mean) * (xc[i] - mean);
      var = sq / double(n);
      auto& rm = p.running_mean.value[std::size_t(c)];
      auto& rv = p.running_var.value[std::size_t(c)];
      rm = T(p.momentum * rm + (1.0 - p.momentum) * mean);
      rv = T(p.momentum * rv + (1.0 - p.momentum) * var);
    } else {
      mean = p.running_mean.value[std::size_t(c)];
      var = p.running_var.value[std::size_t(c)];
    }
    const double istd = 1.0 / std::sqrt(var + p.eps);
    inv_std[std::size_t(c)] = T(istd);
    const T g = p.gamma.value[std::size_t(c)], b = p.beta.value[std::size_t(c)];
    T* hc = xhat.channel(c);
    T* yc = y.channel(c);
    for (std::size_t i = 0; i < n; ++i) {
      hc[i] = T((xc[i] - mean) * istd);
      yc[i] = hc[i] * g + b;
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <class T>
BatchNormGrads<T> batch_norm_backward(const BatchNormCache<T>& cache,
                                      const BatchNormParams<T>& p, const Tensor4<T>& grad_out) {
  const Shape4& s = cache.xhat.shape();
  if (!(grad_out.shape() == s)) throw std::invalid_argument("batch_norm_backward: shape mismatch");
  const std::size_t n = s.spatial();
  BatchNormGrads<T> g;
  g.grad_x = Tensor4<T>(s);
  g.grad_gamma.assign(std::size_t(s.c), T(0));
  g.grad_beta.assign(std::size_t(s.c), T(0));
  for (int c = 0; c < s.c; ++c) {
    const T* dy = grad_out.channel(c);
    const T* xh = cache.xhat.channel(c);
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_dy += dy[i];
      sum_dy_xh += double(dy[i]) * xh[i];
    }
    g.grad_beta[std::size_t(c)] = T(sum_dy);
    g.grad_gamma[std::size_t(c)] = T(sum_dy_xh);
    const double scale = double(p.gamma.value[std::size_t(c)]) * cache.inv_std[std::size_t(c)];
    T* dx = g.grad_x.channel(c);
    if (cache.mode == Mode::Infer) {
      for (std::size_t i = 0; i < n; ++i) dx[i] = T(dy[i] * scale);
    } else {
      const double mean_dy = sum_dy / double(n), mean_dy_xh = sum_dy_xh / double(n);
      for (std::size_t i = 0; i < n; ++i) dx[i] = T(scale * (dy[i] - mean_dy - xh[i] * mean_dy_xh));
    }
  }
  return g;
}

template <class T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
  Tensor4<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  return y;
}

template <class T>
Tensor4<T> relu_backward(const Tensor4<T>& y, const Tensor4<T>& grad_out) {
  if (!(y.shape() == grad_out.shape())) throw std::invalid_argument("relu_backward: shape mismatch");
  Tensor4<T> g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) g.data()[i] = y.data()[i] > T(0) ? grad_out.data()[i] : T(0);
  return g;
}

template <class T>
Tensor4<T> sigmoid_forward(const Tensor4<T>& x) {
  Tensor4<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x.data()[i];
    // Branch keeps exp() from overflowing for large |v|.
    if (v >= T(0)) {
      y.data()[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y.data()[i] = e / (T(1) + e);
    }
  }
  return y;
}

template <class T>
Tensor4<T> sigmoid_backward(const Tensor4<T>& y, const Tensor4<T>& grad_out) {
  if (!(y.shape() == grad_out.shape())) throw std::invalid_argument("sigmoid_backward: shape mismatch");
  Tensor4<T> g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T p = y.data()[i];
    g.data()[i] = grad_out.data()[i] * p * (T(1) - p);
  }
  return g;
}

#define LSC_INSTANTIATE(T)                                                                      \
  template struct BatchNormParams<T>;                                                           \
  template Tensor4<T> batch_norm_forward(const Tensor4<T>&, BatchNormParams<T>&, Mode,          \
                                         BatchNormCache<T>*);                                   \
  template BatchNormGrads<T> batch_norm_backward(const BatchNormCache<T>&,                      \
                                                 const BatchNormParams<T>&, const Tensor4<T>&); \
  template Tensor4<T> relu_forward(const Tensor4<T>&);                                          \
  template Tensor4<T> relu_backward(const Tensor4<T>&, const Tensor4<T>&);                      \
  template Tensor4<T> sigmoid_forward(const Tensor4<T>&);                                       \
  template Tensor4<T> sigmoid_backward(const Tensor4<T>&, const Tensor4<T>&);

LSC_INSTANTIATE(float)
LSC_INSTANTIATE(double)
#undef LSC_INSTANTIATE

}  // namespace lsc::nn
