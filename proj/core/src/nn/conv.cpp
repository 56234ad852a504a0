#include <algorithm>
#include <cstring>
#include <stdexcept>

#include <Eigen/Core>

#include "lsc/nn/ops.hpp"

namespace lsc::nn {
namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <class T>
using Map = Eigen::Map<RowMat<T>>;
template <class T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
// Column-major views of the same buffers: a row-major (r x c) block read as its (c x r) transpose.
// Routing the products through these keeps the long spatial axis on the GEMM row dimension.
template <class T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <class T>
using ConstColMap = Eigen::Map<const ColMat<T>>;
template <class T>
using ColMap = Eigen::Map<ColMat<T>>;
template <class T>
using StridedColMap = Eigen::Map<ColMat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using ConstStridedColMap = Eigen::Map<const ColMat<T>, 0, Eigen::OuterStride<>>;

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel == 1 && g.stride == 1 && g.pad == std::array<int, 3>{0, 0, 0};
}

void check_input(const Shape4& in, const ConvGeometry& g) {
  if (in.c != g.in_ch) {
    throw std::invalid_argument("conv3d: input has " + std::to_string(in.c) +
                                " channels, expected " + std::to_string(g.in_ch));
  }
}

// Valid output range [lo, hi) along one axis for tap offset `tap`, i.e. the
// outputs whose source coordinate o * stride - pad + tap lies in [0, n).
void valid_range(int out_n, int in_n, int stride, int pad, int tap, int& lo, int& hi) {
  const int shift = tap - pad;
  lo = shift >= 0 ? 0 : std::min(out_n, (-shift + stride - 1) / stride);
  const int last = in_n - 1 - shift;  // o * stride <= last
  hi = last < 0 ? 0 : std::min(out_n, last / stride + 1);
  if (hi < lo) hi = lo;
}

// Column buffer for output rows [oy0, oy1) of slice oz: rows (c, kz, ky, kx), columns (oy, ox).
template <class T>
void im2col_slice(const Tensor4<T>& x, const ConvGeometry& g, const Shape4& os, int oz, int oy0, int oy1, T* col) {
  const Shape4& is = x.shape();
  const int k = g.kernel, d = g.dilation, s = g.stride;
  const std::size_t n = std::size_t(oy1 - oy0) * os.w;
  T* row = col;
  for (int c = 0; c < is.c; ++c) {
    const T* xc = x.channel(c);
    for (int kz = 0; kz < k; ++kz) {
      const int iz = oz * s - g.pad[0] + kz * d;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx, row += n) {
          if (iz < 0 || iz >= is.d) {
            std::fill(row, row + n, T(0));
            continue;
          }
          int xlo, xhi;
          valid_range(os.w, is.w, s, g.pad[2], kx * d, xlo, xhi);
          for (int oy = oy0; oy < oy1; ++oy) {
            T* dst = row + std::size_t(oy - oy0) * os.w;
            const int iy = oy * s - g.pad[1] + ky * d;
            if (iy < 0 || iy >= is.h) {
              std::fill(dst, dst + os.w, T(0));
              continue;
            }
            const T* src = xc + (std::size_t(iz) * is.h + iy) * is.w;
            std::fill(dst, dst + xlo, T(0));
            const int base = kx * d - g.pad[2];
            if (s == 1) {
              std::copy(src + xlo + base, src + xhi + base, dst + xlo);
            } else {
              for (int ox = xlo; ox < xhi; ++ox) dst[ox] = src[ox * s + base];
            }
            std::fill(dst + xhi, dst + os.w, T(0));
          }
        }
      }
    }
  }
}

// Adjoint of im2col_slice: scatter-adds column gradients into grad_x.
template <class T>
void col2im_slice(const T* col, const ConvGeometry& g, const Shape4& os, int oz, int oy0, int oy1, Tensor4<T>& gx) {
  const Shape4& is = gx.shape();
  const int k = g.kernel, d = g.dilation, s = g.stride;
  const std::size_t n = std::size_t(oy1 - oy0) * os.w;
  const T* row = col;
  for (int c = 0; c < is.c; ++c) {
    T* gc = gx.channel(c);
    for (int kz = 0; kz < k; ++kz) {
      const int iz = oz * s - g.pad[0] + kz * d;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx, row += n) {
          if (iz < 0 || iz >= is.d) continue;
          int xlo, xhi;
          valid_range(os.w, is.w, s, g.pad[2], kx * d, xlo, xhi);
          const int base = kx * d - g.pad[2];
          for (int oy = oy0; oy < oy1; ++oy) {
            const int iy = oy * s - g.pad[1] + ky * d;
            if (iy < 0 || iy >= is.h) continue;
            const T* src = row + std::size_t(oy - oy0) * os.w;
            T* dst = gc + (std::size_t(iz) * is.h + iy) * is.w;
            for (int ox = xlo; ox < xhi; ++ox) dst[ox * s + base] += src[ox];
          }
        }
      }
    }
  }
}

// Output rows per im2col tile, sized so that the column buffer stays cache resident.
int tile_rows(Eigen::Index K, const Shape4& os) {
  constexpr Eigen::Index kTileElements = 196608;
  return int(std::clamp<Eigen::Index>(kTileElements / (K * os.w), 1, os.h));
}

template <class T>
void add_bias(Tensor4<T>& out, const std::vector<T>& bias) {
  const std::size_t sp = out.shape().spatial();
  for (int o = 0; o < out.shape().c; ++o) {
    T* p = out.channel(o);
    const T b = bias[std::size_t(o)];
    for (std::size_t i = 0; i < sp; ++i) p[i] += b;
  }
}

template <class T>
std::vector<T> channel_sums(const Tensor4<T>& t) {
  std::vector<T> sums(std::size_t(t.shape().c), T(0));
  const std::size_t sp = t.shape().spatial();
  for (int o = 0; o < t.shape().c; ++o) {
    const T* p = t.channel(o);
    T acc = 0;
    for (std::size_t i = 0; i < sp; ++i) acc += p[i];
    sums[std::size_t(o)] = acc;
  }
  return sums;
}

void check_transposed(const Shape4& in, const ConvGeometry& g) {
  if (g.kernel != 2 || g.stride != 2) {
    throw std::invalid_argument("conv_transpose3d: only kernel 2, stride 2 is supported");
  }
  if (in.c != g.in_ch) {
    throw std::invalid_argument("conv_transpose3d: input has " + std::to_string(in.c) +
                                " channels, expected " + std::to_string(g.in_ch));
  }
}

// Weight slice for tap (a, b, c) as an (out x in) matrix.
template <class T>
RowMat<T> transposed_tap(const ConvParams<T>& p, int tap) {
  const int in = p.geom.in_ch, out = p.geom.out_ch;
  RowMat<T> w(out, in);
  for (int i = 0; i < in; ++i)
    for (int o = 0; o < out; ++o) w(o, i) = p.weight.value[(std::size_t(i) * out + o) * 8 + tap];
  return w;
}

}  // namespace

template <class T>
ConvParams<T>::ConvParams(const ConvGeometry& g, bool transposed)
    : geom(g),
      weight(transposed ? std::vector<int>{g.in_ch, g.out_ch, g.kernel, g.kernel, g.kernel}
                        : std::vector<int>{g.out_ch, g.in_ch, g.kernel, g.kernel, g.kernel}),
      bias(std::vector<int>{g.out_ch}) {
  if (g.in_ch <= 0 || g.out_ch <= 0 || g.kernel <= 0 || g.dilation <= 0 || g.stride <= 0) {
    throw std::invalid_argument("conv geometry requires positive channels, kernel, dilation, stride");
  }
  for (int p : g.pad) {
    if (p < 0) throw std::invalid_argument("conv padding must be non-negative");
  }
}

Shape4 conv3d_output_shape(const Shape4& in, const ConvGeometry& g) {
  check_input(in, g);
  const int extent = g.dilation * (g.kernel - 1) + 1;
  const int sizes[3] = {in.d, in.h, in.w};
  int out[3];
  for (int a = 0; a < 3; ++a) {
    const int padded = sizes[a] + 2 * g.pad[a];
    if (padded < extent) {
      throw std::invalid_argument("conv3d: padded extent " + std::to_string(padded) +
                                  " smaller than dilated kernel " + std::to_string(extent));
    }
    if ((padded - extent) % g.stride != 0) {
      throw std::invalid_argument("conv3d: non-integral output size on axis " + std::to_string(a));
    }
    out[a] = (padded - extent) / g.stride + 1;
  }
  return {g.out_ch, out[0], out[1], out[2]};
}

template <class T>
Tensor4<T> conv3d_forward(const Tensor4<T>& x, const ConvParams<T>& p) {
  const ConvGeometry& g = p.geom;
  const Shape4 os = conv3d_output_shape(x.shape(), g);
  Tensor4<T> out(os);
  const int k3 = g.kernel * g.kernel * g.kernel;
  const Eigen::Index K = Eigen::Index(g.in_ch) * k3;
  ConstMap<T> w(p.weight.value.data(), g.out_ch, K);

  ConstColMap<T> wt(p.weight.value.data(), K, g.out_ch);
  if (is_pointwise(g)) {
    const auto sp = Eigen::Index(os.spatial());
    ColMap<T>(out.data(), sp, g.out_ch).noalias() = ConstColMap<T>(x.data(), sp, g.in_ch) * wt;
  } else {
    const auto n = Eigen::Index(os.h) * os.w;
    const int rows = tile_rows(K, os);
    std::vector<T> col(std::size_t(K) * std::size_t(rows) * os.w);
    for (int oz = 0; oz < os.d; ++oz) {
      for (int oy0 = 0; oy0 < os.h; oy0 += rows) {
        const int oy1 = std::min(os.h, oy0 + rows);
        const auto nt = Eigen::Index(oy1 - oy0) * os.w;
        im2col_slice(x, g, os, oz, oy0, oy1, col.data());
        StridedColMap<T> yt(out.data() + oz * n + oy0 * os.w, nt, g.out_ch, Eigen::OuterStride<>(os.d * n));
        yt.noalias() = ConstColMap<T>(col.data(), nt, K) * wt;
      }
    }
  }
  add_bias(out, p.bias.value);
  return out;
}

template <class T>
ConvGrads<T> conv3d_backward(const Tensor4<T>& x, const ConvParams<T>& p,
                             const Tensor4<T>& grad_out) {
  const ConvGeometry& g = p.geom;
  const Shape4 os = conv3d_output_shape(x.shape(), g);
  if (!(grad_out.shape() == os)) {
    throw std::invalid_argument("conv3d_backward: grad_out shape " + grad_out.shape().str() +
                                " != " + os.str());
  }
  const int k3 = g.kernel * g.kernel * g.kernel;
  const Eigen::Index K = Eigen::Index(g.in_ch) * k3;
  ConstMap<T> w(p.weight.value.data(), g.out_ch, K);

  ConvGrads<T> grads;
  grads.grad_x = Tensor4<T>(x.shape());
  grads.grad_weight.assign(p.weight.size(), T(0));
  grads.grad_bias = channel_sums(grad_out);
  ColMap<T> gwt(grads.grad_weight.data(), K, g.out_ch);

  if (is_pointwise(g)) {
    const auto sp = Eigen::Index(os.spatial());
    ConstColMap<T> gyt(grad_out.data(), sp, g.out_ch);
    gwt.noalias() = ConstMap<T>(x.data(), g.in_ch, sp) * gyt;
    ColMap<T>(grads.grad_x.data(), sp, g.in_ch).noalias() = gyt * w;
    return grads;
  }

  const auto n = Eigen::Index(os.h) * os.w;
  const int rows = tile_rows(K, os);
  std::vector<T> col(std::size_t(K) * std::size_t(rows) * os.w);
  std::vector<T> gcol(col.size());
  for (int oz = 0; oz < os.d; ++oz) {
    for (int oy0 = 0; oy0 < os.h; oy0 += rows) {
      const int oy1 = std::min(os.h, oy0 + rows);
      const auto nt = Eigen::Index(oy1 - oy0) * os.w;
      ConstStridedColMap<T> gyt(grad_out.data() + oz * n + oy0 * os.w, nt, g.out_ch, Eigen::OuterStride<>(os.d * n));
      im2col_slice(x, g, os, oz, oy0, oy1, col.data());
      gwt.noalias() += ConstMap<T>(col.data(), K, nt) * gyt;
      ColMap<T>(gcol.data(), nt, K).noalias() = gyt * w;
      col2im_slice(gcol.data(), g, os, oz, oy0, oy1, grads.grad_x);
    }
  }
  return grads;
}

template <class T>
Tensor4<T> conv_transpose3d_forward(const Tensor4<T>& x, const ConvParams<T>& p) {
  const ConvGeometry& g = p.geom;
  check_transposed(x.shape(), g);
  const Shape4& is = x.shape();
  const Shape4 os{g.out_ch, 2 * is.d, 2 * is.h, 2 * is.w};
  Tensor4<T> out(os);
  const auto sp = Eigen::Index(is.spatial());
  ConstMap<T> xm(x.data(), g.in_ch, sp);
  RowMat<T> y(g.out_ch, sp);
  for (int tap = 0; tap < 8; ++tap) {
    const int a = tap >> 2, b = (tap >> 1) & 1, c = tap & 1;
    y.noalias() = transposed_tap(p, tap) * xm;
    for (int o = 0; o < g.out_ch; ++o) {
      const T bias = p.bias.value[std::size_t(o)];
      const T* src = y.data() + std::size_t(o) * std::size_t(sp);
      for (int z = 0; z < is.d; ++z)
        for (int yy = 0; yy < is.h; ++yy) {
          T* dst = &out.at(o, 2 * z + a, 2 * yy + b, c);
          for (int xx = 0; xx < is.w; ++xx) dst[2 * xx] = *src++ + bias;
        }
    }
  }
  return out;
}

template <class T>
ConvGrads<T> conv_transpose3d_backward(const Tensor4<T>& x, const ConvParams<T>& p,
                                       const Tensor4<T>& grad_out) {
  const ConvGeometry& g = p.geom;
  check_transposed(x.shape(), g);
  const Shape4& is = x.shape();
  const Shape4 os{g.out_ch, 2 * is.d, 2 * is.h, 2 * is.w};
  if (!(grad_out.shape() == os)) {
    throw std::invalid_argument("conv_transpose3d_backward: grad_out shape " +
                                grad_out.shape().str() + " != " + os.str());
  }
  const auto sp = Eigen::Index(is.spatial());
  ConstMap<T> xm(x.data(), g.in_ch, sp);

  ConvGrads<T> grads;
  grads.grad_x = Tensor4<T>(is);
  grads.grad_weight.assign(p.weight.size(), T(0));
  grads.grad_bias = channel_sums(grad_out);
  Map<T> gx(grads.grad_x.data(), g.in_ch, sp);

  RowMat<T> gy(g.out_ch, sp);
  for (int tap = 0; tap < 8; ++tap) {
    const int a = tap >> 2, b = (tap >> 1) & 1, c = tap & 1;
    for (int o = 0; o < g.out_ch; ++o) {
      T* dst = gy.data() + std::size_t(o) * std::size_t(sp);
      for (int z = 0; z < is.d; ++z)
        for (int yy = 0; yy < is.h; ++yy) {
          const T* src = &grad_out.at(o, 2 * z + a, 2 * yy + b, c);
          for (int xx = 0; xx < is.w; ++xx) *dst++ = src[2 * xx];
        }
    }
    gx.noalias() += transposed_tap(p, tap).transpose() * gy;
    const RowMat<T> gw = gy * xm.transpose();  // out x in
    for (int i = 0; i < g.in_ch; ++i)
      for (int o = 0; o < g.out_ch; ++o)
        grads.grad_weight[(std::size_t(i) * g.out_ch + o) * 8 + tap] = gw(o, i);
  }
  return grads;
}

#define LSC_INSTANTIATE(T)                                                                        \
  template struct ConvParams<T>;                                                                  \
  template Tensor4<T> conv3d_forward(const Tensor4<T>&, const ConvParams<T>&);                    \
  template ConvGrads<T> conv3d_backward(const Tensor4<T>&, const ConvParams<T>&, const Tensor4<T>&); \
  template Tensor4<T> conv_transpose3d_forward(const Tensor4<T>&, const ConvParams<T>&);          \
  template ConvGrads<T> conv_transpose3d_backward(const Tensor4<T>&, const ConvParams<T>&,        \
                                                  const Tensor4<T>&);

LSC_INSTANTIATE(float)
LSC_INSTANTIATE(double)
#undef LSC_INSTANTIATE

}  // namespace lsc::nn
