#include "lsc/resample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

namespace lsc {
namespace {

constexpr double kEdgeTolerance = 1e-6;

// Maps a continuous coordinate onto [0, n-1], tolerating rounding at the edges.
bool clamp_axis(double& f, std::uint32_t n) {
  if (f < -kEdgeTolerance || f > double(n - 1) + kEdgeTolerance) return false;
  f = std::clamp(f, 0.0, double(n - 1));
  return true;
}

template <class Fn>
void for_each_slice(std::uint32_t nz, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(nz)));
  if (workers == 1) {
    for (std::uint32_t z = 0; z < nz; ++z) fn(z);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::uint32_t z = static_cast<std::uint32_t>(w); z < nz; z += static_cast<std::uint32_t>(workers)) fn(z);
    });
  }
  for (auto& t : pool) t.join();
}

template <class T, class Sampler>
std::vector<T> resample_values(const GridGeometry& in, const GridGeometry& out,
                               const RigidPose& world_to_calibrated, int workers,
                               Sampler&& sample) {
  const RigidPose calibrated_to_world = world_to_calibrated.inverse();
  // index_in = A * index_out + b, composed once per volume.
  const Vec3 s_out(out.spacing[0], out.spacing[1], out.spacing[2]);
  const Vec3 s_in(in.spacing[0], in.spacing[1], in.spacing[2]);
  const Vec3 o_out(out.origin[0], out.origin[1], out.origin[2]);
  const Vec3 o_in(in.origin[0], in.origin[1], in.origin[2]);
  const Mat3 a = s_in.cwiseInverse().asDiagonal() * calibrated_to_world.rotation * s_out.asDiagonal();
  const Vec3 b = s_in.cwiseInverse().asDiagonal() *
                 (calibrated_to_world.rotation * o_out + calibrated_to_world.translation - o_in);

  std::vector<T> values(out.dims.count());
  for_each_slice(out.dims.nz, workers, [&](std::uint32_t z) {
    for (std::uint32_t y = 0; y < out.dims.ny; ++y) {
      const Vec3 row = a * Vec3(0.0, double(y), double(z)) + b;
      T* dst = values.data() + out.linear(0, y, z);
      for (std::uint32_t x = 0; x < out.dims.nx; ++x) {
        dst[x] = sample(row + a.col(0) * double(x));
      }
    }
  });
  return values;
}

template <class T>
double trilinear(const Grid<T>& vol, const Vec3& index, double fill) {
  const Dims& d = vol.dims();
  double f[3] = {index.x(), index.y(), index.z()};
  if (!clamp_axis(f[0], d.nx) || !clamp_axis(f[1], d.ny) || !clamp_axis(f[2], d.nz)) return fill;
  std::int64_t i0[3], i1[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const std::int64_t n = d[a];
    i0[a] = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(f[a])), std::max<std::int64_t>(n - 2, 0));
    i1[a] = std::min<std::int64_t>(i0[a] + 1, n - 1);
    t[a] = f[a] - double(i0[a]);
  }
  auto v = [&](std::int64_t x, std::int64_t y, std::int64_t z) { return double(vol.at(x, y, z)); };
  const double c00 = v(i0[0], i0[1], i0[2]) * (1 - t[0]) + v(i1[0], i0[1], i0[2]) * t[0];
  const double c10 = v(i0[0], i1[1], i0[2]) * (1 - t[0]) + v(i1[0], i1[1], i0[2]) * t[0];
  const double c01 = v(i0[0], i0[1], i1[2]) * (1 - t[0]) + v(i1[0], i0[1], i1[2]) * t[0];
  const double c11 = v(i0[0], i1[1], i1[2]) * (1 - t[0]) + v(i1[0], i1[1], i1[2]) * t[0];
  const double c0 = c00 * (1 - t[1]) + c10 * t[1];
  const double c1 = c01 * (1 - t[1]) + c11 * t[1];
  return c0 * (1 - t[2]) + c1 * t[2];
}

}  // namespace

float sample_trilinear(const Volume& vol, const Vec3& index, float fill) {
  return static_cast<float>(trilinear(vol, index, fill));
}

std::uint8_t sample_linear_label(const LabelMask& mask, const Vec3& index) {
  return trilinear<std::uint8_t>(mask, index, 0.0) >= 0.5 ? 1 : 0;
}

std::uint8_t sample_nearest(const LabelMask& mask, const Vec3& index) {
  const Index3 p{static_cast<std::int64_t>(std::lround(index.x())),
                 static_cast<std::int64_t>(std::lround(index.y())),
                 static_cast<std::int64_t>(std::lround(index.z()))};
  if (!mask.geometry().contains(p)) return 0;
  return mask.at(p.x, p.y, p.z);
}

GridGeometry calibrated_grid(const GridGeometry& input, const RigidPose& world_to_calibrated,
                             double spacing, int pad) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw std::invalid_argument("resample spacing must be > 0");
  }
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 idx((corner & 1) ? input.dims.nx - 1 : 0, (corner & 2) ? input.dims.ny - 1 : 0,
                   (corner & 4) ? input.dims.nz - 1 : 0);
    const Vec3 q = world_to_calibrated.apply(input.world(idx));
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  GridGeometry out;
  out.spacing = {float(spacing), float(spacing), float(spacing)};
  const double half_x = std::max(std::abs(lo.x()), std::abs(hi.x()));
  const auto kx = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(half_x / spacing - 0.5 - 1e-9))) +
                  1 + pad;
  out.dims.nx = static_cast<std::uint32_t>(2 * kx);
  out.origin[0] = static_cast<float>(-(double(kx) - 0.5) * spacing);
  for (int a = 1; a < 3; ++a) {
    const auto first = static_cast<std::int64_t>(std::floor(lo[a] / spacing - 0.5 + 1e-9)) - pad;
    const auto last = static_cast<std::int64_t>(std::ceil(hi[a] / spacing - 0.5 - 1e-9)) + pad;
    (a == 1 ? out.dims.ny : out.dims.nz) = static_cast<std::uint32_t>(last - first + 1);
    out.origin[a] = static_cast<float>((double(first) + 0.5) * spacing);
  }
  return out;
}

Volume resample(const Volume& vol, const RigidPose& world_to_calibrated, double spacing,
                int workers) {
  const GridGeometry out = calibrated_grid(vol.geometry(), world_to_calibrated, spacing);
  const float air = min_value(vol);
  auto values = resample_values<float>(vol.geometry(), out, world_to_calibrated, workers,
                                       [&](const Vec3& idx) { return sample_trilinear(vol, idx, air); });
  return {out, std::move(values)};
}

LabelMask resample(const LabelMask& mask, const RigidPose& world_to_calibrated, double spacing,
                   int workers, MaskInterpolation interpolation) {
  const GridGeometry out = calibrated_grid(mask.geometry(), world_to_calibrated, spacing);
  auto values = resample_values<std::uint8_t>(mask.geometry(), out, world_to_calibrated, workers,
                                              [&](const Vec3& idx) {
                                                return interpolation == MaskInterpolation::Linear
                                                           ? sample_linear_label(mask, idx)
                                                           : sample_nearest(mask, idx);
                                              });
  return {out, std::move(values)};
}

}  // namespace lsc
