#include <algorithm>
#include <limits>
#include <stdexcept>

#include "lsc/nn/ops.hpp"

namespace lsc::nn {

Shape4 pool3d_output_shape(const Shape4& in, const PoolGeometry& g) {
  if (g.kernel <= 0 || g.stride <= 0 || g.pad < 0 || g.pad >= g.kernel) {
    throw std::invalid_argument("pool3d: invalid geometry");
  }
  auto axis = [&](int n) {
    const int padded = n + 2 * g.pad;
    if (padded < g.kernel) throw std::invalid_argument("pool3d: input smaller than kernel");
    return (padded - g.kernel) / g.stride + 1;
  };
  return {in.c, axis(in.d), axis(in.h), axis(in.w)};
}

template <class T>
PoolResult<T> pool3d_forward(const Tensor4<T>& x, PoolKind kind, const PoolGeometry& g) {
  const Shape4& is = x.shape();
  const Shape4 os = pool3d_output_shape(is, g);
  PoolResult<T> r;
  r.out = Tensor4<T>(os);
  if (kind == PoolKind::Max) r.argmax.assign(os.count(), -1);

  std::size_t oi = 0;
  for (int c = 0; c < os.c; ++c) {
    const T* xc = x.channel(c);
    const auto cbase = static_cast<std::int32_t>(std::size_t(c) * is.spatial());
    for (int oz = 0; oz < os.d; ++oz) {
      const int z0 = std::max(oz * g.stride - g.pad, 0);
      const int z1 = std::min(oz * g.stride - g.pad + g.kernel, is.d);
      for (int oy = 0; oy < os.h; ++oy) {
        const int y0 = std::max(oy * g.stride - g.pad, 0);
        const int y1 = std::min(oy * g.stride - g.pad + g.kernel, is.h);
        for (int ox = 0; ox < os.w; ++ox, ++oi) {
          const int x0 = std::max(ox * g.stride - g.pad, 0);
          const int x1 = std::min(ox * g.stride - g.pad + g.kernel, is.w);
          if (kind == PoolKind::Max) {
            T best = -std::numeric_limits<T>::infinity();
            std::int32_t arg = -1;
            for (int z = z0; z < z1; ++z)
              for (int y = y0; y < y1; ++y)
                for (int xx = x0; xx < x1; ++xx) {
                  const auto idx = static_cast<std::int32_t>((std::size_t(z) * is.h + y) * is.w + xx);
                  if (xc[idx] > best) {
                    best = xc[idx];
                    arg = idx;
                  }
                }
            r.out.data()[oi] = best;
            r.argmax[oi] = cbase + arg;
          } else {
            T sum = 0;
            for (int z = z0; z < z1; ++z)
              for (int y = y0; y < y1; ++y)
                for (int xx = x0; xx < x1; ++xx) sum += xc[(std::size_t(z) * is.h + y) * is.w + xx];
            const int count = (z1 - z0) * (y1 - y0) * (x1 - x0);
            r.out.data()[oi] = sum / T(count);
          }
        }
      }
    }
  }
  return r;
}

template <class T>
Tensor4<T> pool3d_backward(const Shape4& is, PoolKind kind, const PoolGeometry& g,
                           const std::vector<std::int32_t>& argmax, const Tensor4<T>& grad_out) {
  const Shape4 os = pool3d_output_shape(is, g);
  if (!(grad_out.shape() == os)) {
    throw std::invalid_argument("pool3d_backward: grad_out shape " + grad_out.shape().str() +
                                " != " + os.str());
  }
  Tensor4<T> gx(is);
  if (kind == PoolKind::Max) {
    if (argmax.size() != os.count()) throw std::invalid_argument("pool3d_backward: argmax size");
    const T* go = grad_out.data();
    for (std::size_t i = 0; i < os.count(); ++i) gx.data()[argmax[i]] += go[i];
    return gx;
  }
  std::size_t oi = 0;
  for (int c = 0; c < os.c; ++c) {
    T* gc = gx.channel(c);
    for (int oz = 0; oz < os.d; ++oz) {
      const int z0 = std::max(oz * g.stride - g.pad, 0);
      const int z1 = std::min(oz * g.stride - g.pad + g.kernel, is.d);
      for (int oy = 0; oy < os.h; ++oy) {
        const int y0 = std::max(oy * g.stride - g.pad, 0);
        const int y1 = std::min(oy * g.stride - g.pad + g.kernel, is.h);
        for (int ox = 0; ox < os.w; ++ox, ++oi) {
          const int x0 = std::max(ox * g.stride - g.pad, 0);
          const int x1 = std::min(ox * g.stride - g.pad + g.kernel, is.w);
          const T share = grad_out.data()[oi] / T((z1 - z0) * (y1 - y0) * (x1 - x0));
          for (int z = z0; z < z1; ++z)
            for (int y = y0; y < y1; ++y)
              for (int xx = x0; xx < x1; ++xx) gc[(std::size_t(z) * is.h + y) * is.w + xx] += share;
        }
      }
    }
  }
  return gx;
}

#define LSC_INSTANTIATE(T)                                                              \
  template PoolResult<T> pool3d_forward(const Tensor4<T>&, PoolKind, const PoolGeometry&); \
  template Tensor4<T> pool3d_backward(const Shape4&, PoolKind, const PoolGeometry&,     \
                                      const std::vector<std::int32_t>&, const Tensor4<T>&);

LSC_INSTANTIATE(float)
LSC_INSTANTIATE(double)
#undef LSC_INSTANTIATE

}  // namespace lsc::nn
