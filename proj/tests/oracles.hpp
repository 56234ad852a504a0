#pragma once

// Reference implementations used only by tests: direct nested loops with no
// sharing of code paths with the library kernels.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "lsc/nn/ops.hpp"

namespace lsc::test {

using nn::ConvGeometry;
using nn::ConvParams;
using nn::Shape4;
using nn::Tensor4;

template <class T>
void fill_uniform(std::vector<T>& v, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (T& x : v) x = T(d(rng));
}

template <class T>
Tensor4<T> random_tensor(const Shape4& s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<T> v(s.count());
  fill_uniform(v, rng, lo, hi);
  return Tensor4<T>(s, std::move(v));
}

template <class T>
ConvParams<T> random_conv(const ConvGeometry& g, std::mt19937_64& rng, bool transposed = false) {
  ConvParams<T> p(g, transposed);
  fill_uniform(p.weight.value, rng);
  fill_uniform(p.bias.value, rng);
  return p;
}

inline int conv_extent(int in, int k, int dilation, int stride, int pad) {
  return (in + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
}

/// y[o, z, y, x] = b[o] + sum_{i, a, b, c} w[o, i, a, b, c] * x[i, z*s - p + a*d, ...]
template <class T>
Tensor4<T> naive_conv3d(const Tensor4<T>& x, const ConvParams<T>& p) {
  const ConvGeometry& g = p.geom;
  const Shape4& s = x.shape();
  const int k = g.kernel;
  const Shape4 os{g.out_ch, conv_extent(s.d, k, g.dilation, g.stride, g.pad[0]),
                  conv_extent(s.h, k, g.dilation, g.stride, g.pad[1]),
                  conv_extent(s.w, k, g.dilation, g.stride, g.pad[2])};
  Tensor4<T> y(os);
  for (int o = 0; o < os.c; ++o)
    for (int z = 0; z < os.d; ++z)
      for (int yy = 0; yy < os.h; ++yy)
        for (int xx = 0; xx < os.w; ++xx) {
          double acc = p.bias.value[std::size_t(o)];
          for (int i = 0; i < s.c; ++i)
            for (int a = 0; a < k; ++a)
              for (int b = 0; b < k; ++b)
                for (int c = 0; c < k; ++c) {
                  const int iz = z * g.stride - g.pad[0] + a * g.dilation;
                  const int iy = yy * g.stride - g.pad[1] + b * g.dilation;
                  const int ix = xx * g.stride - g.pad[2] + c * g.dilation;
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= s.d || iy >= s.h || ix >= s.w) continue;
                  const std::size_t wi = ((((std::size_t(o) * s.c + i) * k + a) * k + b) * k + c);
                  acc += double(p.weight.value[wi]) * double(x.at(i, iz, iy, ix));
                }
          y.at(o, z, yy, xx) = T(acc);
        }
  return y;
}

/// Kernel with dilation - 1 zeros inserted between taps, as an undilated kernel.
template <class T>
ConvParams<T> zero_inflate(const ConvParams<T>& p) {
  const ConvGeometry& g = p.geom;
  const int k = g.kernel;
  const int kd = g.dilation * (k - 1) + 1;
  ConvGeometry dense = g;
  dense.kernel = kd;
  dense.dilation = 1;
  ConvParams<T> q(dense);
  q.bias.value = p.bias.value;
  std::fill(q.weight.value.begin(), q.weight.value.end(), T(0));
  for (int o = 0; o < g.out_ch; ++o)
    for (int i = 0; i < g.in_ch; ++i)
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
          for (int c = 0; c < k; ++c) {
            const std::size_t src = ((((std::size_t(o) * g.in_ch + i) * k + a) * k + b) * k + c);
            const std::size_t dst = ((((std::size_t(o) * g.in_ch + i) * kd + a * g.dilation) * kd +
                                      b * g.dilation) * kd + c * g.dilation);
            q.weight.value[dst] = p.weight.value[src];
          }
  return q;
}

/// Scatter form of the stride-2, 2^3 transposed convolution; weight (in, out, 2, 2, 2).
template <class T>
Tensor4<T> naive_conv_transpose3d(const Tensor4<T>& x, const ConvParams<T>& p) {
  const Shape4& s = x.shape();
  const int oc = p.geom.out_ch;
  std::vector<double> acc(std::size_t(oc) * 8 * s.spatial(), 0.0);
  const Shape4 os{oc, 2 * s.d, 2 * s.h, 2 * s.w};
  auto at = [&](int o, int z, int y, int xx) -> double& {
    return acc[((std::size_t(o) * os.d + z) * os.h + y) * os.w + xx];
  };
  for (int i = 0; i < s.c; ++i)
    for (int z = 0; z < s.d; ++z)
      for (int y = 0; y < s.h; ++y)
        for (int xx = 0; xx < s.w; ++xx)
          for (int o = 0; o < oc; ++o)
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b)
                for (int c = 0; c < 2; ++c) {
                  const std::size_t wi = ((((std::size_t(i) * oc + o) * 2 + a) * 2 + b) * 2 + c);
                  at(o, 2 * z + a, 2 * y + b, 2 * xx + c) += double(p.weight.value[wi]) * double(x.at(i, z, y, xx));
                }
  Tensor4<T> out(os);
  for (int o = 0; o < oc; ++o)
    for (int z = 0; z < os.d; ++z)
      for (int y = 0; y < os.h; ++y)
        for (int xx = 0; xx < os.w; ++xx) out.at(o, z, y, xx) = T(at(o, z, y, xx) + p.bias.value[std::size_t(o)]);
  return out;
}

/// Padded taps are skipped; average divides by the in-bounds tap count.
template <class T>
Tensor4<T> naive_pool3d(const Tensor4<T>& x, nn::PoolKind kind, const nn::PoolGeometry& g) {
  const Shape4& s = x.shape();
  auto ext = [&](int n) { return (n + 2 * g.pad - g.kernel) / g.stride + 1; };
  const Shape4 os{s.c, ext(s.d), ext(s.h), ext(s.w)};
  Tensor4<T> y(os);
  for (int c = 0; c < s.c; ++c)
    for (int z = 0; z < os.d; ++z)
      for (int yy = 0; yy < os.h; ++yy)
        for (int xx = 0; xx < os.w; ++xx) {
          T best = -std::numeric_limits<T>::infinity();
          T sum = 0;
          int count = 0;
          for (int a = 0; a < g.kernel; ++a)
            for (int b = 0; b < g.kernel; ++b)
              for (int e = 0; e < g.kernel; ++e) {
                const int iz = z * g.stride - g.pad + a;
                const int iy = yy * g.stride - g.pad + b;
                const int ix = xx * g.stride - g.pad + e;
                if (iz < 0 || iy < 0 || ix < 0 || iz >= s.d || iy >= s.h || ix >= s.w) continue;
                const T v = x.at(c, iz, iy, ix);
                best = std::max(best, v);
                sum += v;
                ++count;
              }
          y.at(c, z, yy, xx) = kind == nn::PoolKind::Max ? best : sum / T(count);
        }
  return y;
}

/// Central differences of f with respect to every entry of v, h = 1e-4.
inline std::vector<double> numeric_gradient(std::vector<double>& v, const std::function<double()>& f,
                                            double h = 1e-4) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + h;
    const double up = f();
    v[i] = keep - h;
    const double down = f();
    v[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), or the absolute norm when both are tiny.
template <class A, class B>
double relative_error(const A& a, const B& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
    na += double(a[i]) * double(a[i]);
    nb += double(b[i]) * double(b[i]);
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

/// sum r * y, the scalar used to probe a vector-valued map.
inline double dot(const Tensor4<double>& y, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += y.data()[i] * r[i];
  return s;
}

}  // namespace lsc::test
